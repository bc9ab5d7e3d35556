"""Static dictionary over a known universe.

A membership dictionary for a fixed key set inside a fixed universe is the
exact two-stage cascade; this wrapper builds it and reports how far the
realized space sits above the entropy of the membership indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..bounds import entropy
from ..chained import ChainedAndFilter, build_exact_and
from ..hashing import as_u64_array
from ..retrieval import DEFAULT_C

# worst-case overhead factor of the cascade against the indicator entropy,
# attained in the limit at lambda = 4
DICT_OVERHEAD_BOUND = 4.0 * float(DEFAULT_C) / (5.0 * math.log2(5.0) - 8.0)


@dataclass
class DictReport:
    """Built dictionary plus its space accounting."""

    filter: ChainedAndFilter
    bits_per_universe_item: float
    overhead_ratio: float

    @property
    def within_bound(self) -> bool:
        return self.overhead_ratio <= DICT_OVERHEAD_BOUND + 1e-9


def dict_build(universe, positives, *, config=None, seed=0,
               keep_inputs=False) -> DictReport:
    """Build an exact membership dictionary and report its space.

    ``overhead_ratio`` divides the realized bits per universe element by the
    entropy of a membership bit, H(1/(lambda+1)); the cascade keeps it below
    DICT_OVERHEAD_BOUND once the table expansion settles.  Small ratios
    (lambda < 2) degenerate to a single exact stage, which is already within
    the bound.
    """
    universe = as_u64_array(universe)
    if universe.size == 0:
        raise ValueError("universe must not be empty")
    f = build_exact_and(universe, positives, config=config, seed=seed,
                        keep_inputs=keep_inputs)
    bits = f.size_bits / universe.size
    h = entropy(1.0 / (f.lam + 1.0))
    return DictReport(filter=f, bits_per_universe_item=bits,
                      overhead_ratio=bits / h)
