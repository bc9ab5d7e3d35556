"""Point queries over immutable sorted runs.

Each run carries a dynamic cascade filter.  When a newer run arrives, its
keys are pinned as negatives in every older filter that would have passed
them, so a query scanning runs in index order can stop at its first actual
read: a hit is the answer and a miss proves no later run holds the key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..chained import ChainedAndFilter
from ..dynfilters import BloomFilter, OthelloFilter
from ..errors import DuplicateKey
from ..hashing import as_u64_array, mix64


@dataclass
class LsmRun:
    """One immutable sorted run and its filter."""

    keys: np.ndarray
    filter: ChainedAndFilter

    def contains_key(self, key: int) -> bool:
        i = int(np.searchsorted(self.keys, np.uint64(key)))
        return i < self.keys.size and int(self.keys[i]) == int(key)


@dataclass
class LsmQueryResult:
    found_in: int | None
    runs_read: int


@dataclass
class LsmLevel:
    """Ordered collection of runs, oldest first."""

    seed: int = 0
    bits_per_key: float = 9.6
    runs: list[LsmRun] = field(default_factory=list)
    exclusions: int = 0

    @property
    def size_bits(self) -> int:
        return sum(r.filter.size_bits for r in self.runs)


def _run_filter(keys: np.ndarray, bits_per_key: float, seed: int) -> ChainedAndFilter:
    stage1 = BloomFilter.for_items(keys.size, bits_per_key=bits_per_key,
                                   seed=mix64(seed, 1))
    stage1.insert_batch(keys)
    stage2 = OthelloFilter(math.ceil(1.1 * keys.size) + 16, seed=mix64(seed, 2))
    for k in keys:
        stage2.insert(int(k), 1)
    return ChainedAndFilter(stage1, stage2, lam=0.0, epsilon=0.0,
                            alpha=stage1.k, beta=0.0)


def lsm_add_run(level: LsmLevel, keys) -> LsmRun:
    """Append a run and pin its keys out of the older filters.

    Every older filter that passes one of the new keys without holding it
    gets that key excluded, which is what licenses the early stop in
    ``lsm_point_query``.  Keys already present in an older run are left
    alone there; the older copy stays the visible one.
    """
    keys = np.sort(as_u64_array(keys))
    if keys.size == 0:
        raise ValueError("a run needs at least one key")
    if np.unique(keys).size != keys.size:
        raise DuplicateKey("duplicate key inside one run")
    run = LsmRun(keys=keys,
                 filter=_run_filter(keys, level.bits_per_key,
                                    mix64(level.seed, len(level.runs) + 1)))
    for older in level.runs:
        # the pin decision must come from the static first stage alone: the
        # exact stage answers arbitrarily for unregistered keys and those
        # answers can flip when it later grows
        passing = keys[older.filter.stage1.contains_batch(keys)]
        if passing.size == 0:
            continue
        idx = np.searchsorted(older.keys, passing)
        idx_c = np.minimum(idx, older.keys.size - 1)
        present = older.keys[idx_c] == passing
        for k in passing[~present]:
            older.filter.exclude_negative(int(k))
            level.exclusions += 1
    level.runs.append(run)
    return run


def lsm_point_query(level: LsmLevel, key: int, *,
                    check_oracle: bool = False) -> LsmQueryResult:
    """Scan run filters in index order, reading a run only on a filter hit.

    Stops at the first read either way: a containing run is the answer, and
    a non-containing read proves the key is absent from every later run
    (its filter would have been excluded otherwise).  ``check_oracle``
    verifies that proof against the raw key arrays on every early stop.
    """
    key = int(key)
    runs_read = 0
    for index, run in enumerate(level.runs, start=1):
        if not run.filter.contains(key):
            continue
        runs_read += 1
        if run.contains_key(key):
            return LsmQueryResult(found_in=index, runs_read=runs_read)
        if check_oracle:
            for later in level.runs[index:]:
                if later.contains_key(key):
                    raise AssertionError(
                        f"early stop at run {index} hides key in a later run")
        return LsmQueryResult(found_in=None, runs_read=runs_read)
    return LsmQueryResult(found_in=None, runs_read=runs_read)
