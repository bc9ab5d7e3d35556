"""Exception types shared across the package."""

from __future__ import annotations


class ChainedFilterError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateLambda(ChainedFilterError):
    """The imbalance ratio is too small for a two-stage split to help."""


class DuplicateKey(ChainedFilterError):
    """The same key appears twice in a build input."""


class PeelingFailed(ChainedFilterError):
    """Table construction failed after exhausting seed retries."""


class InsufficientSurvivors(ChainedFilterError):
    """First-stage filtering passed fewer negatives than calibration needs."""


class ConflictingLabel(ChainedFilterError):
    """A key was inserted twice with opposite labels."""


class TableFull(ChainedFilterError):
    """A bounded dynamic structure ran out of room."""


class NotFound(ChainedFilterError):
    """Attempt to delete a key that was never inserted."""


class CapacityExceeded(ChainedFilterError):
    """Training demand exceeded the allocated layer structure."""


class NonConvergence(ChainedFilterError):
    """Alternating construction failed to terminate within its layer budget."""


class CodeTooDeep(ChainedFilterError):
    """A prefix code exceeds the depth supported by the index layout."""


class RebuildLoop(ChainedFilterError):
    """Displacement-table rebuilds repeated beyond the allowed attempts."""


class EmptyAlphabet(ChainedFilterError):
    """Code construction was asked to cover zero symbols."""
