"""The two filter combinators.

The "&" form cascades an approximate stage into an exact stage: a query is
positive only if both agree, and the exact stage is consulted only for keys
the first stage passes.  The "&~" form stacks approximate layers that
alternately over-approximate the positives and their false-positive
shadows; the answer is the parity of the leading run of passing layers.

Both come in a static flavor built from a closed universe (retrieval-table
stages) and a dynamic flavor (Bloom or cuckoo first stage, XOR-classifier
second stage) that accepts later exclusions and insertions.  The "&~" form
also has a trainable flavor whose layers are plain Bloom filters corrected
by forcing bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import Strategy
from .dynfilters import BloomFilter, CuckooFilter, OthelloFilter
from .errors import (
    CapacityExceeded,
    ChainedFilterError,
    ConflictingLabel,
    InsufficientSurvivors,
    NonConvergence,
)
from .hashing import GAMMA, MASK64, mix64, as_u64_array
from .retrieval import (
    ApproxBloomier,
    BuildConfig,
    ExactBloomier,
    VARIANT_APPROX,
    VARIANT_EXACT_A,
    VARIANT_EXACT_B,
    build_approx_bloomier,
    build_exact_bloomier,
    read_table,
)
from . import serialize
from .serialize import ByteReader, ByteWriter, FormatError

# bits per stored item, per bit of log2(1/fpr), for a well-tuned Bloom layer
C_PRIME = math.log2(math.e)

_LN2_INV = 1.0 / math.log(2.0)

TAG_AND = 0
TAG_ANDNOT = 1


@dataclass
class WhitelistLedger:
    """Excluded-negative sets recorded while a combinator is built.

    For the cascade this is the single set of first-stage false positives
    that the exact stage must overrule; for the layered form it is the
    shrinking chain of shadow sets, one per layer.  Construction state
    only: never serialized, never consulted by queries.
    """

    stages: list = field(default_factory=list)

    def add(self, keys: np.ndarray) -> None:
        self.stages.append(keys)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.stages]


def _ratio(universe_size: int, positive_count: int) -> float:
    if positive_count < 1:
        raise ValueError("need at least one positive key")
    if universe_size < positive_count:
        raise ValueError("universe smaller than positive set")
    return (universe_size - positive_count) / positive_count


def _split_universe(universe, positives):
    universe = as_u64_array(universe)
    positives = as_u64_array(positives)
    member = np.isin(universe, positives)
    if int(member.sum()) != positives.size:
        raise ValueError("positives must be distinct keys drawn from the universe")
    return universe, positives, universe[~member]


def _stage_pass(stage, key: int) -> bool:
    if isinstance(stage, OthelloFilter):
        return stage.query(key) == 1
    return stage.contains(key)


def _stage_pass_batch(stage, keys) -> np.ndarray:
    if isinstance(stage, OthelloFilter):
        return stage.query_batch(keys) == 1
    return stage.contains_batch(keys)


class ChainedAndFilter:
    """Cascade filter: positive iff both stages accept.

    ``stage1`` is approximate over the positives and ``stage2`` exactly
    labels the positives (1) plus the recorded first-stage false positives
    (0).  ``stage1`` may be None in the small-ratio regime where one exact
    stage over the whole universe is already optimal.  Query counters track
    how often the second stage is touched.
    """

    def __init__(self, stage1, stage2, *, lam, epsilon=0.0, alpha=0, beta=0.0,
                 ledger=None, universe=None, positives=None):
        self.stage1 = stage1
        self.stage2 = stage2
        self.lam = float(lam)
        self.epsilon = float(epsilon)
        self.alpha = int(alpha)
        self.beta = float(beta)
        self.ledger = ledger
        self.queries = 0
        self.stage1_passes = 0
        self.stage2_lookups = 0
        self._universe = universe
        self._positives = positives

    @property
    def is_dynamic(self) -> bool:
        return isinstance(self.stage2, OthelloFilter)

    @property
    def size_bits(self) -> int:
        total = 0 if self.stage1 is None else _stage_bits(self.stage1)
        return total + _stage_bits(self.stage2)

    def reset_counters(self) -> None:
        self.queries = 0
        self.stage1_passes = 0
        self.stage2_lookups = 0

    def contains(self, key: int) -> bool:
        self.queries += 1
        if self.stage1 is not None and not self.stage1.contains(key):
            return False
        self.stage1_passes += 1
        self.stage2_lookups += 1
        return _stage_pass(self.stage2, key)

    def contains_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        self.queries += keys.size
        if self.stage1 is None:
            survivors = np.ones(keys.size, dtype=bool)
        else:
            survivors = self.stage1.contains_batch(keys)
        hits = int(survivors.sum())
        self.stage1_passes += hits
        self.stage2_lookups += hits
        out = np.zeros(keys.size, dtype=bool)
        if hits:
            out[survivors] = _stage_pass_batch(self.stage2, keys[survivors])
        return out

    def exclude_negative(self, key: int) -> None:
        """Pin a new negative: after this, query(key) is false forever."""
        if not self.is_dynamic:
            raise ChainedFilterError("second stage is static; rebuild with dynamic stages")
        if self.stage1 is not None and not self.stage1.contains(key):
            return
        self.stage2.insert(key, 0)

    def insert_positive(self, key: int) -> None:
        if not self.is_dynamic or self.stage1 is None or isinstance(self.stage1, ApproxBloomier):
            raise ChainedFilterError("both stages must be dynamic to insert")
        try:
            self.stage2.insert(key, 1)
        except ConflictingLabel:
            raise ConflictingLabel(f"key {key} was excluded as a negative") from None
        self.stage1.insert(key)

    def to_bytes(self) -> bytes:
        w = ByteWriter()
        w.raw(serialize.MAGIC_CHAINED)
        w.u16(serialize.FORMAT_VERSION)
        w.u8(TAG_AND)
        w.f64(self.lam)
        w.f64(self.epsilon)
        w.u16(self.alpha)
        w.f64(self.beta)
        stages = [s for s in (self.stage1, self.stage2) if s is not None]
        w.u8(len(stages))
        w.u8(0 if self.stage1 is None else 1)
        for s in stages:
            w.blob(s.to_bytes())
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ChainedAndFilter":
        r = ByteReader(data)
        r.expect_magic(serialize.MAGIC_CHAINED)
        if r.u16() != serialize.FORMAT_VERSION:
            raise FormatError("unsupported version")
        if r.u8() != TAG_AND:
            raise FormatError("not a cascade container")
        lam = r.f64()
        epsilon = r.f64()
        alpha = r.u16()
        beta = r.f64()
        count = r.u8()
        has_stage1 = r.u8()
        stages = [_load_stage(r.blob()) for _ in range(count)]
        if has_stage1:
            stage1, stage2 = stages
        else:
            (stage2,) = stages
            stage1 = None
        return cls(stage1, stage2, lam=lam, epsilon=epsilon, alpha=alpha, beta=beta)


class ChainedAndNotFilter:
    """Layered filter evaluated by the parity rule.

    Scan the layers while each accepts; with d leading acceptances the
    answer is ``d odd``.  An optional terminal exact layer settles the keys
    that pass every approximate layer, counting as one more acceptance when
    its label says the chain continues.
    """

    def __init__(self, layers, terminal, *, lam, delta, ledger=None):
        self.layers = list(layers)
        self.terminal = terminal
        self.lam = float(lam)
        self.delta = float(delta)
        self.ledger = ledger

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def size_bits(self) -> int:
        total = sum(_stage_bits(f) for f in self.layers)
        if self.terminal is not None:
            total += _stage_bits(self.terminal)
        return total

    @property
    def trainable(self) -> bool:
        return all(isinstance(f, BloomFilter) for f in self.layers)

    def contains(self, key: int) -> bool:
        d = 0
        for f in self.layers:
            if not f.contains(key):
                return bool(d & 1)
            d += 1
        if self.terminal is not None and _stage_pass(self.terminal, key):
            d += 1
        return bool(d & 1)

    def _depths_batch(self, keys) -> np.ndarray:
        """Leading consecutive layer acceptances per key (terminal not
        counted)."""
        d = np.zeros(len(keys), dtype=np.int64)
        alive = np.arange(len(keys))
        for f in self.layers:
            if alive.size == 0:
                break
            ok = f.contains_batch(keys[alive])
            alive = alive[ok]
            d[alive] += 1
        return d

    def contains_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        d = self._depths_batch(keys)
        if self.terminal is not None:
            deep = d == len(self.layers)
            if deep.any():
                d[deep] += _stage_pass_batch(self.terminal, keys[deep])
        return (d & 1).astype(bool)

    def _contains_recursive(self, key: int, i: int = 0) -> bool:
        """Direct evaluation of F_1 & ~(F_2 & ~(F_3 & ...)); the parity
        scan must agree with this on every key."""
        if i == len(self.layers):
            return self.terminal is not None and _stage_pass(self.terminal, key)
        return self.layers[i].contains(key) and not self._contains_recursive(key, i + 1)

    def train(self, key: int, true_label: bool) -> bool:
        """Force bits until the query matches; returns whether anything
        changed.  Layers must be Bloom filters; a key that must deepen past
        the last layer lands in the terminal classifier when present and
        raises CapacityExceeded otherwise."""
        if not self.trainable:
            raise ChainedFilterError("layers are static; build the trainable flavor")
        corrected = False
        for _ in range(len(self.layers) + 2):
            if self.contains(key) == true_label:
                return corrected
            corrected = True
            d = 0
            for f in self.layers:
                if not f.contains(key):
                    break
                d += 1
            if d < len(self.layers):
                self.layers[d].insert(key)
            elif isinstance(self.terminal, OthelloFilter):
                want = int(true_label) ^ (len(self.layers) & 1)
                self.terminal.set(key, want)
            else:
                raise CapacityExceeded("correction would deepen past the last layer")
        raise ChainedFilterError("training did not settle")  # pragma: no cover

    def train_round(self, keys, labels) -> int:
        """One pass over a labeled sample: count the mispredictions, then
        correct each.  Returns the count observed before correcting.

        With an exact terminal, every key currently reaching it is pinned
        with its true label, right or wrong; pinned keys are immune to the
        label churn later corrections would otherwise cause, which is what
        makes the round count small.
        """
        keys = as_u64_array(keys)
        labels = np.asarray(labels, dtype=bool)
        wrong = self.contains_batch(keys) != labels
        if isinstance(self.terminal, OthelloFilter):
            deep = self._depths_batch(keys) == len(self.layers)
            par = len(self.layers) & 1
            for k, lab in zip(keys[deep], labels[deep]):
                self.terminal.set(int(k), int(lab) ^ par)
        for k, lab in zip(keys[wrong], labels[wrong]):
            self.train(int(k), bool(lab))
        return int(wrong.sum())

    def to_bytes(self) -> bytes:
        w = ByteWriter()
        w.raw(serialize.MAGIC_CHAINED)
        w.u16(serialize.FORMAT_VERSION)
        w.u8(TAG_ANDNOT)
        w.f64(self.lam)
        w.f64(self.delta)
        w.u8(0 if self.terminal is None else 1)
        w.u16(len(self.layers))
        for f in self.layers:
            w.blob(f.to_bytes())
        if self.terminal is not None:
            w.blob(self.terminal.to_bytes())
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ChainedAndNotFilter":
        r = ByteReader(data)
        r.expect_magic(serialize.MAGIC_CHAINED)
        if r.u16() != serialize.FORMAT_VERSION:
            raise FormatError("unsupported version")
        if r.u8() != TAG_ANDNOT:
            raise FormatError("not a layered container")
        lam = r.f64()
        delta = r.f64()
        has_terminal = r.u8()
        count = r.u16()
        layers = [_load_stage(r.blob()) for _ in range(count)]
        terminal = _load_stage(r.blob()) if has_terminal else None
        return cls(layers, terminal, lam=lam, delta=delta)


def _stage_bits(stage) -> int:
    # dynamic stages expose size_bits; retrieval stages expose bits
    if hasattr(stage, "size_bits"):
        return stage.size_bits
    return stage.bits


def _load_stage(blob: bytes):
    magic = blob[:4]
    if magic == serialize.MAGIC_RETRIEVAL:
        table, variant = read_table(ByteReader(blob))
        if variant == VARIANT_APPROX:
            return ApproxBloomier(table)
        if variant == VARIANT_EXACT_A:
            return ExactBloomier(table, Strategy.A)
        if variant == VARIANT_EXACT_B:
            return ExactBloomier(table, Strategy.B)
        raise FormatError("raw retrieval table cannot be a filter stage")
    if magic == serialize.MAGIC_BLOOM:
        return BloomFilter.from_bytes(blob)
    if magic == serialize.MAGIC_CUCKOO:
        return CuckooFilter.from_bytes(blob)
    if magic == serialize.MAGIC_OTHELLO:
        return OthelloFilter.from_bytes(blob)
    raise FormatError(f"unknown stage magic {magic!r}")


def _and_alpha(epsilon: float, lam: float) -> tuple[int, float]:
    """Integer fingerprint width minimizing alpha + 1 + beta(alpha), with
    beta = max(lam 2^-alpha - 2 eps lam, 0); ties break to the wider
    fingerprint (cheaper second stage)."""
    best = None
    for a in range(1, 65):
        beta = max(lam * 2.0 ** -a - 2.0 * epsilon * lam, 0.0)
        cost = a + 1 + beta
        if best is None or cost <= best[0]:
            best = (cost, a, beta)
        elif a > math.log2(max(lam, 2.0)) + 2:
            break
    return best[1], best[2]


def build_exact_and(universe, positives, *, config=None, seed=0,
                    strategy=Strategy.A, keep_inputs=True):
    """Cascade filter that is exact over ``universe``.

    The first stage keeps floor(log2 lam) fingerprint bits per positive;
    the second stage exactly labels the positives and every first-stage
    false positive.  When the negative/positive ratio is too small for a
    fingerprint stage to pay off, the result is a single exact stage over
    the whole universe.
    """
    return build_general_and(universe, positives, 0.0, config=config, seed=seed,
                             strategy=strategy, keep_inputs=keep_inputs)


def build_general_and(universe, positives, epsilon_target, *, config=None, seed=0,
                      strategy=Strategy.A, keep_inputs=True):
    """Cascade filter with target false-positive rate ``epsilon_target``
    over the universe negatives (zero makes it exact).

    The second stage encodes the positives plus the first beta*n survivors
    of the first stage in universe scan order; survivors beyond that stay
    unencoded and pass the second stage at its unencoded rate, which is
    what realizes the target rate.
    """
    if config is None:
        config = BuildConfig()
    eps = float(epsilon_target)
    if not 0.0 <= eps < 1.0:
        raise ValueError("epsilon_target must be in [0, 1)")
    universe, positives, negatives = _split_universe(universe, positives)
    n = positives.size
    lam = _ratio(universe.size, n)
    kept_u = universe if keep_inputs else None
    kept_p = positives if keep_inputs else None

    alpha = math.floor(math.log2(lam)) if lam >= 1.0 else 0
    if alpha < 1:
        # one exact stage over everything is already the optimal chain
        labels = np.zeros(universe.size, dtype=bool)
        labels[np.isin(universe, positives)] = True
        stage2 = build_exact_bloomier(universe, labels, strategy=strategy,
                                      config=config, seed=seed)
        return ChainedAndFilter(None, stage2, lam=lam, epsilon=eps, alpha=0,
                                beta=lam, ledger=WhitelistLedger([negatives]),
                                universe=kept_u, positives=kept_p)

    if eps > 0.0:
        alpha, beta = _and_alpha(eps, lam)
    else:
        beta = lam * 2.0 ** -alpha
    want = int(round(beta * n))

    seed_t = int(seed) & MASK64
    for _ in range(config.max_retries + 1):
        stage1 = build_approx_bloomier(positives, alpha, config=config, seed=seed_t)
        survivors = negatives[stage1.contains_batch(negatives)]
        if eps == 0.0:
            encode = survivors
            break
        if survivors.size >= want:
            encode = survivors[:want]
            break
        seed_t = (seed_t + GAMMA) & MASK64
    else:
        raise InsufficientSurvivors(
            f"first stage yielded {survivors.size} survivors, need {want}")

    keys2 = np.concatenate([positives, encode])
    labels2 = np.zeros(keys2.size, dtype=bool)
    labels2[:n] = True
    slack = max(0, math.ceil((beta + 1.0) * n) - keys2.size)
    stage2 = build_exact_bloomier(keys2, labels2, strategy=strategy, config=config,
                                  seed=(seed_t + GAMMA) & MASK64, extra_capacity=slack)
    return ChainedAndFilter(stage1, stage2, lam=lam, epsilon=eps, alpha=alpha,
                            beta=beta, ledger=WhitelistLedger([survivors]),
                            universe=kept_u, positives=kept_p)


def query_and(f: ChainedAndFilter, key: int) -> bool:
    return f.contains(key)


_STAGE1_KINDS = ("bloom", "cuckoo")
_STAGE2_KINDS = ("othello",)


def build_dynamic_and(universe, positives, *, stage1_kind="bloom",
                      stage2_kind="othello", config=None, seed=0, keep_inputs=True):
    """Cascade filter with mutable stages, exact over ``universe`` at build
    time and maintaining that contract through exclude_negative and
    insert_positive."""
    if stage1_kind not in _STAGE1_KINDS:
        raise ValueError(f"stage1_kind must be one of {_STAGE1_KINDS}")
    if stage2_kind not in _STAGE2_KINDS:
        raise ValueError(f"stage2_kind must be one of {_STAGE2_KINDS}")
    universe, positives, negatives = _split_universe(universe, positives)
    n = positives.size
    lam = _ratio(universe.size, n)
    alpha = max(1, math.floor(math.log2(lam)) if lam >= 1.0 else 1)
    seed_t = int(seed) & MASK64

    if stage1_kind == "bloom":
        stage1 = BloomFilter(max(64, math.ceil(C_PRIME * alpha * n)), alpha, seed=seed_t)
        stage1.insert_batch(positives)
    else:
        # a fingerprint of alpha+3 bits gives the same 2^-alpha pass rate
        # through two four-slot buckets
        stage1 = CuckooFilter.for_capacity(max(n, 4), min(16, alpha + 3), seed=seed_t)
        for k in positives:
            stage1.insert(int(k))

    survivors = negatives[stage1.contains_batch(negatives)]
    stage2 = OthelloFilter(max(16, math.ceil(1.1 * (n + survivors.size))),
                           seed=(seed_t + GAMMA) & MASK64)
    for k in positives:
        stage2.insert(int(k), 1)
    for k in survivors:
        stage2.insert(int(k), 0)
    beta = survivors.size / n
    return ChainedAndFilter(stage1, stage2, lam=lam, epsilon=0.0, alpha=alpha,
                            beta=beta, ledger=WhitelistLedger([survivors]),
                            universe=universe if keep_inputs else None,
                            positives=positives if keep_inputs else None)


def make_dynamic(f: ChainedAndFilter, stage1_kind="bloom", stage2_kind="othello",
                 *, seed=0, keep_inputs=True) -> ChainedAndFilter:
    """Rebuild a static cascade with dynamic stages.

    This is a fresh construction over the inputs the static build retained,
    not an in-place conversion; filters built with keep_inputs=False cannot
    be converted and should be rebuilt via build_dynamic_and.
    """
    if f._universe is None or f._positives is None:
        raise ValueError("filter was built without keep_inputs; use build_dynamic_and")
    return build_dynamic_and(f._universe, f._positives, stage1_kind=stage1_kind,
                             stage2_kind=stage2_kind, seed=seed, keep_inputs=keep_inputs)


def exclude_negative(f: ChainedAndFilter, key: int) -> None:
    f.exclude_negative(key)


def insert_positive(f: ChainedAndFilter, key: int) -> None:
    f.insert_positive(key)


def build_exact_andnot(universe, positives, delta=0.5, *, use_terminal_exact=True,
                       config=None, seed=0, strategy=Strategy.A):
    """Layered filter that is exact over ``universe``.

    Layer 1 over-approximates the positives at rate delta/lam; each later
    layer over-approximates the previous layer's false positives at rate
    delta^2, alternating sides.  The chain stops when the shadow set dies
    out, or (default) once it is small enough that a single exact layer
    over the last two sets is cheaper than continuing.
    """
    if config is None:
        config = BuildConfig()
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    universe, positives, negatives = _split_universe(universe, positives)
    n = positives.size
    lam = _ratio(universe.size, n)
    if lam <= 1.0:
        raise ValueError("layered build needs more negatives than positives")

    alpha1 = max(1, math.ceil(math.log2(lam / delta)))
    alpha_rest = max(1, math.ceil(math.log2(1.0 / (delta * delta))))
    threshold = n / max(1.0, math.log2(n))
    max_layers = math.ceil(4 * math.log2(max(n, 2)))

    layers, ledger = [], WhitelistLedger()
    side_a, side_b = positives, negatives
    terminal = None
    for i in range(1, max_layers + 2):
        if i > max_layers:
            raise NonConvergence(f"layer count exceeded {max_layers}")
        f_i = build_approx_bloomier(side_a, alpha1 if i == 1 else alpha_rest,
                                    config=config, seed=mix64(seed, i))
        layers.append(f_i)
        shadow = side_b[f_i.contains_batch(side_b)] if side_b.size else side_b
        ledger.add(shadow)
        if shadow.size == 0:
            break
        if use_terminal_exact and shadow.size <= threshold:
            keys = np.concatenate([shadow, side_a])
            labels = np.zeros(keys.size, dtype=bool)
            labels[:shadow.size] = True
            terminal = build_exact_bloomier(keys, labels, strategy=strategy,
                                            config=config, seed=mix64(seed, 0))
            break
        side_a, side_b = shadow, side_a
    return ChainedAndNotFilter(layers, terminal, lam=lam, delta=delta, ledger=ledger)


def query_andnot(f: ChainedAndNotFilter, key: int) -> bool:
    return f.contains(key)


def build_trainable_andnot(n, lam, *, delta=0.5, depth=None, use_othello=True,
                           seed=0, positives=None):
    """Empty layered filter sized for ``n`` positives at negative ratio
    ``lam``, ready for bit-flip training.

    Layers are Bloom filters on the same shrinking schedule as the static
    build; with ``use_othello`` the deepest layer is replaced by an exact
    classifier absorbing whatever survives, funded by the remainder of the
    log2(16 lam) space budget.  Pass ``positives`` to pre-seed layer 1.
    """
    n = int(n)
    lam = float(lam)
    if n < 1:
        raise ValueError("n must be positive")
    if lam <= 1.0:
        raise ValueError("need negative ratio above one")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if depth is None:
        if use_othello:
            depth = max(2, math.floor(math.log2(max(2.0, math.log2(max(n, 4))))))
        else:
            depth = 12
    if depth < 2:
        raise ValueError("depth must be at least 2")

    k1 = max(1, math.ceil(math.log2(lam / delta)))
    # the schedule gives every later layer 2 log2(1/delta) bits per key it
    # is expected to hold, so that is also its optimal probe count
    k_rest = max(1, round(2.0 * math.log2(1.0 / delta)))
    n_blooms = depth - 1 if use_othello else depth
    layers = []
    spent = 0
    for i in range(1, n_blooms + 1):
        if i == 1:
            bits, k = max(64, math.ceil(C_PRIME * n * k1)), k1
        else:
            share = 2.0 * delta ** (i - 1) * math.log2(1.0 / delta)
            bits, k = max(64, math.ceil(C_PRIME * n * share)), k_rest
        layers.append(BloomFilter(bits, k, seed=mix64(seed, i)))
        spent += bits
    terminal = None
    if use_othello:
        budget = C_PRIME * n * math.log2(16.0 * lam) - spent
        capacity = max(16, int(budget / (2.0 * OthelloFilter.LOAD)))
        terminal = OthelloFilter(capacity, seed=mix64(seed, 0))
    if positives is not None:
        layers[0].insert_batch(as_u64_array(positives))
    return ChainedAndNotFilter(layers, terminal, lam=lam, delta=delta)


def train_andnot(f: ChainedAndNotFilter, key: int, true_label: bool) -> bool:
    return f.train(key, true_label)
