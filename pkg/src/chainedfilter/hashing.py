"""Key mixing and slot/fingerprint derivation shared by every filter here.

Keys are 64-bit unsigned integers throughout; callers pre-hash anything wider.
One :func:`mix64` call yields a digest per (key, seed).  Slot selection reads
the high ``SLOT_REGION_BITS`` of the digest and fingerprints read the low
``FINGERPRINT_BITS``, so the two are independent by construction: flipping
fingerprint-region bits can never move a key's slots, and vice versa.

Scalar and numpy batch variants are provided for the hot paths; they agree
bit-for-bit (property-tested).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix64 finalizer. The mixer name is written into serialized headers so
# a reader can reject tables built with a different mixer.
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
GAMMA = 0x9E3779B97F4A7C15
MIXER_ID = "splitmix64-v1"

FINGERPRINT_BITS = 20
SLOT_REGION_BITS = 64 - FINGERPRINT_BITS
_FP_MASK = (1 << FINGERPRINT_BITS) - 1


def mix64(key: int, seed: int = 0) -> int:
    """Mix a 64-bit key with a 64-bit seed into a 64-bit digest."""
    z = (key + seed) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_batch(keys: np.ndarray, seed: int = 0) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    z = np.asarray(keys, dtype=np.uint64) + np.uint64(seed & MASK64)
    z = (z ^ (z >> 30)) * np.uint64(_M1)
    z = (z ^ (z >> 27)) * np.uint64(_M2)
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SlotLayout:
    """Cell geometry of one retrieval table.

    The table has ``window + j`` consecutive segments of ``segment_len`` cells.
    Each key occupies one slot in each of ``j`` consecutive segments; the first
    segment index is drawn uniformly from ``window + 1`` choices, so every run
    of ``j`` segments fits and the j slots are pairwise distinct.
    """

    j: int = 3
    window: int = 120
    segment_len: int = 1

    def __post_init__(self) -> None:
        if self.j < 1:
            raise ValueError("j must be >= 1")
        if not 0 <= self.window < (1 << 20):
            raise ValueError("window out of range")
        if self.segment_len < 1 or self.segment_len >= (1 << 32):
            raise ValueError("segment_len out of range")

    @property
    def segment_count(self) -> int:
        return self.window + self.j

    @property
    def m(self) -> int:
        """Total cell count."""
        return self.segment_count * self.segment_len

    # Below this key count the coupled chain is too short to stay full rank
    # and builds fall back to window 0 (one independent slot per segment).
    COUPLING_MIN = 16384

    @classmethod
    def for_capacity(
        cls,
        n: int,
        c: Fraction = Fraction(113, 100),
        *,
        j: int = 3,
        max_window: int = 120,
    ) -> "SlotLayout":
        """Smallest reliable layout holding about ``n * c`` cells.

        Large inputs get the widest window whose per-segment offset space
        keeps expected duplicate slot-tuples ~< 0.05 per attempt.  Small
        inputs use window 0 with a sublinear cell surcharge: short coupled
        chains go rank-deficient even without duplicates, while independent
        segment-local slots stay solvable once the surcharge damps small
        even covers.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        if c <= 0:
            raise ValueError("c must be positive")
        c = Fraction(c)
        cells = -((-n * c.numerator) // c.denominator)  # ceil(n * c)
        if n < cls.COUPLING_MIN:
            cells += 16 + math.isqrt(64 * n)
            return cls(j=j, window=0, segment_len=-(-cells // j))
        window = 1
        for z in range(max_window, 0, -1):
            seg_len = -(-cells // (z + j))
            if (z + 1) * seg_len**3 >= 10 * n * n:
                window = z
                break
        seg_len = -(-cells // (window + j))
        return cls(j=j, window=window, segment_len=seg_len)


def derive_slots(digest: int, layout: SlotLayout) -> tuple[int, ...]:
    """The key's cell indices, one per segment of its run.

    Pure in (digest, layout): only the slot region of the digest is read, and
    per-slot offsets come from fixed rehash streams of that region.
    """
    region = digest >> FINGERPRINT_BITS
    start = (region * (layout.window + 1)) >> SLOT_REGION_BITS
    out = []
    for i in range(layout.j):
        r = mix64(region, (GAMMA * (i + 1)) & MASK64)
        off = ((r >> 32) * layout.segment_len) >> 32
        out.append((start + i) * layout.segment_len + off)
    return tuple(out)


def derive_slots_batch(digests: np.ndarray, layout: SlotLayout) -> np.ndarray:
    """Vectorized :func:`derive_slots`; returns an (n, j) uint64 array."""
    d = np.asarray(digests, dtype=np.uint64)
    region = d >> FINGERPRINT_BITS
    start = (region * np.uint64(layout.window + 1)) >> SLOT_REGION_BITS
    seg_len = np.uint64(layout.segment_len)
    out = np.empty((d.shape[0], layout.j), dtype=np.uint64)
    for i in range(layout.j):
        r = mix64_batch(region, (GAMMA * (i + 1)) & MASK64)
        off = ((r >> 32) * seg_len) >> 32
        out[:, i] = (start + i) * seg_len + off
    return out


def derive_fingerprint(digest: int, alpha: int) -> int:
    """An alpha-bit fingerprint from the digest's fingerprint region.

    Prefix-stable: the low bits of a wider fingerprint equal the narrower
    one.  Widths past FINGERPRINT_BITS are filled from a rehash of the
    region, so they still never touch slot-selection bits.
    """
    if not 1 <= alpha <= 64:
        raise ValueError("alpha must be in [1, 64]")
    low = digest & _FP_MASK
    if alpha <= FINGERPRINT_BITS:
        return low & ((1 << alpha) - 1)
    ext = mix64(low, GAMMA)
    return (low | ((ext << FINGERPRINT_BITS) & MASK64)) & ((1 << alpha) - 1)


def derive_fingerprint_batch(digests: np.ndarray, alpha: int) -> np.ndarray:
    """Vectorized :func:`derive_fingerprint`."""
    if not 1 <= alpha <= 64:
        raise ValueError("alpha must be in [1, 64]")
    d = np.asarray(digests, dtype=np.uint64)
    low = d & np.uint64(_FP_MASK)
    if alpha <= FINGERPRINT_BITS:
        return low & np.uint64((1 << alpha) - 1)
    ext = mix64_batch(low, GAMMA)
    wide = low | (ext << FINGERPRINT_BITS)
    return wide & np.uint64(((1 << alpha) - 1) & MASK64)


def as_u64_array(keys) -> np.ndarray:
    """Coerce a key iterable to a 1-D uint64 array (values taken mod 2^64)."""
    if isinstance(keys, np.ndarray) and keys.dtype == np.uint64:
        return keys
    return np.array([int(k) & MASK64 for k in keys], dtype=np.uint64)


def floor_log2(x: float) -> int:
    """Exact floor(log2 x) for positive x, safe where log() rounding lies."""
    if x <= 0:
        raise ValueError("x must be positive")
    mant, exp = math.frexp(x)  # x = mant * 2**exp, mant in [0.5, 1)
    return exp - 1
