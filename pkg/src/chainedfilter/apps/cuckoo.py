"""Two-table cuckoo hashing with a trainable placement predictor.

Insertions always start in the first table and displaced keys move to their
slot in the other table, so below half load the first table fills much
denser than the second.  A layered filter trained on "which table holds this
key" then lets lookups probe the right table first, collapsing the mean
probe count to one.
"""

from __future__ import annotations

import math

import numpy as np

from ..bounds import cuckoo_negative_ratio
from ..chained import ChainedAndNotFilter, build_trainable_andnot
from ..errors import NonConvergence, RebuildLoop, TableFull
from ..hashing import MASK64, as_u64_array, mix64

_MAX_KICKS = 500
_MAX_REBUILDS = 8


class CuckooTable:
    """Single-slot cuckoo hash: two tables of ``num_slots`` entries each.

    Displacement chains longer than 500 kicks trigger a full rebuild with
    fresh hash seeds; eight failed rebuilds raise RebuildLoop.  The load
    factor must stay below one half for placement to succeed with high
    probability.
    """

    __slots__ = ("num_slots", "seed", "rebuilds", "_h_seeds", "_keys",
                 "_payloads", "_occ", "_counts")

    def __init__(self, num_slots: int, seed: int = 0):
        if num_slots < 1:
            raise ValueError("table needs at least one slot")
        self.num_slots = int(num_slots)
        self.seed = int(seed) & MASK64
        self.rebuilds = 0
        self._reseed(0)
        self._keys = np.zeros((2, self.num_slots), dtype=np.uint64)
        self._payloads = np.zeros((2, self.num_slots), dtype=np.uint64)
        self._occ = np.zeros((2, self.num_slots), dtype=bool)
        self._counts = [0, 0]

    def _reseed(self, round_: int) -> None:
        base = mix64(self.seed, 1000 + round_)
        self._h_seeds = (mix64(base, 1), mix64(base, 2))

    def _slot(self, key: int, table: int) -> int:
        # Lemire reduction of the digest high bits onto the slot range
        return ((mix64(key, self._h_seeds[table]) >> 32) * self.num_slots) >> 32

    @property
    def count(self) -> int:
        return self._counts[0] + self._counts[1]

    @property
    def load(self) -> float:
        return self.count / (2 * self.num_slots)

    def table_counts(self) -> tuple[int, int]:
        return (self._counts[0], self._counts[1])

    @property
    def lambda_measured(self) -> float:
        """Ratio of first-table to second-table residents."""
        if self._counts[1] == 0:
            return math.inf
        return self._counts[0] / self._counts[1]

    def keys_in(self, table: int) -> np.ndarray:
        if table not in (1, 2):
            raise ValueError("table index is 1 or 2")
        t = table - 1
        return self._keys[t][self._occ[t]].copy()

    def stored(self) -> tuple[np.ndarray, np.ndarray]:
        """All keys and their in-second-table labels, first table first."""
        k1, k2 = self.keys_in(1), self.keys_in(2)
        keys = np.concatenate([k1, k2])
        labels = np.zeros(keys.size, dtype=bool)
        labels[k1.size:] = True
        return keys, labels

    def lookup(self, key: int):
        """(table index, payload) when present, None otherwise."""
        key = int(key)
        for t in (0, 1):
            i = self._slot(key, t)
            if self._occ[t, i] and int(self._keys[t, i]) == key:
                return (t + 1, int(self._payloads[t, i]))
        return None

    def probe(self, table: int, key: int):
        """Payload from one table only; a single memory access."""
        t = table - 1
        i = self._slot(key, t)
        if self._occ[t, i] and int(self._keys[t, i]) == int(key):
            return int(self._payloads[t, i])
        return None

    def _place(self, key: int, payload: int) -> tuple[int, int] | None:
        """Run the displacement chain; the leftover entry on failure."""
        cur_key, cur_pay, t = key, payload, 0
        occ, keys, pays = self._occ, self._keys, self._payloads
        for _ in range(_MAX_KICKS):
            i = self._slot(cur_key, t)
            if not occ[t, i]:
                occ[t, i] = True
                keys[t, i] = cur_key
                pays[t, i] = cur_pay
                self._counts[t] += 1
                return None
            cur_key, keys[t, i] = int(keys[t, i]), cur_key
            cur_pay, pays[t, i] = int(pays[t, i]), cur_pay
            t = 1 - t
        return (cur_key, cur_pay)

    def insert(self, key: int, payload: int = 0) -> None:
        """Insert or update; rebuilds with fresh seeds on a stuck chain."""
        key = int(key) & MASK64
        payload = int(payload) & MASK64
        hit = self.lookup(key)
        if hit is not None:
            t, i = hit[0] - 1, self._slot(key, hit[0] - 1)
            self._payloads[t, i] = payload
            return
        if self.count >= 2 * self.num_slots:
            raise TableFull("every slot is occupied")
        left = self._place(key, payload)
        if left is not None:
            self._rebuild(extra=left)

    def _rebuild(self, extra: tuple[int, int]) -> None:
        pairs = [(int(k), int(p)) for t in (0, 1)
                 for k, p in zip(self._keys[t][self._occ[t]],
                                 self._payloads[t][self._occ[t]])]
        pairs.append(extra)
        while True:
            self.rebuilds += 1
            if self.rebuilds > _MAX_REBUILDS:
                raise RebuildLoop(f"{_MAX_REBUILDS} rebuilds without placement")
            self._reseed(self.rebuilds)
            self._occ[:] = False
            self._counts = [0, 0]
            leftover = None
            for k, p in pairs:
                leftover = self._place(k, p)
                if leftover is not None:
                    break
            if leftover is None:
                return


def cuckoo_insert(table: CuckooTable, key: int, payload: int = 0) -> None:
    table.insert(key, payload)


def cuckoo_lookup(table: CuckooTable, key: int):
    return table.lookup(key)


def build_table(num_slots: int, load: float, seed: int = 0,
                payload_of=None) -> CuckooTable:
    """Fill a fresh table with distinct random keys up to ``load``."""
    if not 0.0 < load < 0.5:
        raise ValueError("load must be in (0, 0.5)")
    n = round(2 * num_slots * load)
    rng = np.random.default_rng(seed)
    keys = rng.integers(1, 1 << 63, size=n, dtype=np.uint64)
    keys = np.unique(keys)
    while keys.size < n:
        more = rng.integers(1, 1 << 63, size=n - keys.size, dtype=np.uint64)
        keys = np.unique(np.concatenate([keys, more]))
    table = CuckooTable(num_slots, seed=seed)
    for k in keys[:n]:
        k = int(k)
        table.insert(k, payload_of(k) if payload_of else mix64(k, 7))
    return table


class PredictedCuckoo:
    """Cuckoo table plus a layered filter predicting the resident table.

    The predictor treats second-table residents as positives; its negative
    ratio comes from the closed-form first/second table split at the current
    load, and its first layer is pre-seeded with the current second-table
    keys.  Train rounds replay every stored key and flip whichever layer the
    mispredicted ones stopped at.
    """

    def __init__(self, table: CuckooTable, *, use_othello: bool = True,
                 seed: int = 0):
        if table.count == 0:
            raise ValueError("cannot attach a predictor to an empty table")
        self.table = table
        lam = cuckoo_negative_ratio(table.load)
        n_pred = max(1, math.ceil(table.count / (lam + 1.0)))
        self.predictor: ChainedAndNotFilter = build_trainable_andnot(
            n_pred, lam, use_othello=use_othello, seed=seed,
            positives=table.keys_in(2))
        self.error_history: list[float] = []

    @property
    def space_bits(self) -> int:
        return self.predictor.size_bits

    def predict_table(self, key: int) -> int:
        return 2 if self.predictor.contains(int(key)) else 1

    def predictor_train_round(self) -> float:
        """One pass over all stored keys; the error rate seen before any
        corrections were applied this round."""
        keys, labels = self.table.stored()
        wrong = self.predictor.train_round(keys, labels)
        rate = wrong / keys.size
        self.error_history.append(rate)
        return rate

    def train_to_zero(self, max_rounds: int = 32) -> int:
        """Train rounds until a clean pass; rounds taken."""
        for rounds in range(1, max_rounds + 1):
            if self.predictor_train_round() == 0.0:
                return rounds
        raise NonConvergence(f"predictor still erring after {max_rounds} rounds")

    def predicted_lookup(self, key: int):
        """(payload or None, memory accesses), probing the predicted table
        first and the other one only on a miss."""
        key = int(key)
        first = self.predict_table(key)
        payload = self.table.probe(first, key)
        if payload is not None:
            return (payload, 1)
        return (self.table.probe(3 - first, key), 2)

    def mean_probes(self, keys) -> float:
        keys = as_u64_array(keys)
        total = 0
        for k in keys:
            total += self.predicted_lookup(int(k))[1]
        return total / keys.size
