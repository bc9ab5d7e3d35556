"""Static retrieval tables built on spatially coupled XOR systems.

A table stores one alpha-bit value per key in an array of ``m`` cells, with
``m`` about 1.13x the number of keys.  Each key selects ``j`` cells in
consecutive segments of a sliding window; the XOR of those cells yields the
key's value.  Construction solves the induced linear system over GF(2):
greedy peeling removes every key that owns a cell of degree one, and the
remaining 2-core is solved by banded Gaussian elimination, which stays cheap
because every row's support spans at most ``j`` consecutive segments.

On top of the raw table sit two membership views: an approximate filter that
stores an alpha-bit fingerprint per key, and an exact one-bit filter over a
closed key set that stores the key's label.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bounds import Strategy
from .errors import DuplicateKey, PeelingFailed
from .hashing import (
    GAMMA,
    MASK64,
    MIXER_ID,
    SlotLayout,
    as_u64_array,
    derive_fingerprint,
    derive_fingerprint_batch,
    derive_slots,
    derive_slots_batch,
    mix64,
    mix64_batch,
)
from . import serialize
from .serialize import ByteReader, ByteWriter, FormatError

DEFAULT_C = Fraction(113, 100)

VARIANT_RAW = 0
VARIANT_APPROX = 1
VARIANT_EXACT_A = 2
VARIANT_EXACT_B = 3


@dataclass(frozen=True)
class BuildConfig:
    """Construction knobs for retrieval tables.

    ``c`` is the cell-per-key ratio as an exact rational, ``j`` the number of
    probed segments, ``z`` the maximum coupling window (the builder shrinks it
    for small inputs so that slot collisions stay rare), and ``max_retries``
    the number of fresh seeds tried when a build attempt hits an inconsistent
    2-core.
    """

    c: Fraction = DEFAULT_C
    j: int = 3
    z: int = 120
    max_retries: int = 16

    def __post_init__(self) -> None:
        if self.c <= 1:
            raise ValueError("cell ratio c must exceed 1")
        if self.j < 2:
            raise ValueError("need at least two segments per key")
        if self.z < 1:
            raise ValueError("window must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")


@dataclass
class PeelOrder:
    """Record of one successful construction.

    ``keys`` lists peeled key indices in peel order, ``places`` the cell each
    peeled key owns, and ``core`` the key indices left to the linear solver.
    """

    keys: np.ndarray
    places: np.ndarray
    core: np.ndarray


def solve_xor_system(slot_rows, values, m, alpha):
    """Solve ``xor(cells[row]) == value`` for all rows; None if insoluble.

    ``slot_rows`` is an (n, j) array of strictly increasing cell indices per
    row.  Returns ``(cells, order)`` where ``cells`` is a length-``m`` uint64
    array with unconstrained cells left zero.  Peeling runs first-in
    first-out over cells that reach degree one; the residual core is solved
    by banded elimination with rows processed in ascending support order.
    """
    rows_arr = np.asarray(slot_rows, dtype=np.int64).reshape(-1, len(slot_rows[0]) if len(slot_rows) else 1)
    n, j = rows_arr.shape if rows_arr.size else (0, 1)
    if n == 0:
        return np.zeros(m, dtype=np.uint64), PeelOrder(
            keys=np.zeros(0, dtype=np.int64),
            places=np.zeros(0, dtype=np.int64),
            core=np.zeros(0, dtype=np.int64),
        )

    flat = rows_arr.ravel()
    deg_np = np.bincount(flat, minlength=m)
    keyrep = np.repeat(np.arange(n, dtype=np.int64), j)
    order = np.argsort(flat, kind="stable")
    sc = flat[order]
    sk = keyrep[order]
    starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]])
    xs = np.bitwise_xor.reduceat(sk, starts)
    xsum_np = np.zeros(m, dtype=np.int64)
    xsum_np[sc[starts]] = xs

    deg = deg_np.tolist()
    xsum = xsum_np.tolist()
    rows = rows_arr.tolist()
    vals = [int(v) for v in values]

    queue = [int(c) for c in np.flatnonzero(deg_np == 1)]
    head = 0
    peel_keys: list[int] = []
    peel_places: list[int] = []
    removed = bytearray(n)
    while head < len(queue):
        c = queue[head]
        head += 1
        if deg[c] != 1:
            continue
        k = xsum[c]
        removed[k] = 1
        peel_keys.append(k)
        peel_places.append(c)
        for s in rows[k]:
            deg[s] -= 1
            xsum[s] ^= k
            if s != c and deg[s] == 1:
                queue.append(s)

    core = [k for k in range(n) if not removed[k]]
    cells = [0] * m

    if core:
        ge_rows = []
        for k in core:
            row = rows[k]
            s0 = row[0]
            bits = 0
            for s in row:
                bits |= 1 << (s - s0)
            ge_rows.append((s0, bits, vals[k]))
        ge_rows.sort(key=lambda r: r[0])

        pivot: dict[int, tuple[int, int]] = {}
        for col, bits, rhs in ge_rows:
            while True:
                entry = pivot.get(col)
                if entry is None:
                    pivot[col] = (bits, rhs)
                    break
                bits ^= entry[0]
                rhs ^= entry[1]
                if bits == 0:
                    if rhs:
                        return None
                    break
                sh = (bits & -bits).bit_length() - 1
                bits >>= sh
                col += sh

        # Back-substitute in descending column order.  A rolling window per
        # value bit holds already-solved cells so each row costs one masked
        # popcount instead of a scan over its support.
        span = rows_arr[:, -1].max() - rows_arr[:, 0].min() + 2
        wmask = (1 << int(span + 1)) - 1
        sol = [0] * alpha
        prev_col = -1
        prev_val = 0
        for col in sorted(pivot, reverse=True):
            if prev_col >= 0:
                shift = prev_col - col
                for b in range(alpha):
                    sol[b] = ((sol[b] << shift) | (((prev_val >> b) & 1) << (shift - 1))) & wmask
            bits, rhs = pivot[col]
            mask = bits >> 1
            v = 0
            for b in range(alpha):
                par = (mask & sol[b]).bit_count() & 1
                v |= (((rhs >> b) & 1) ^ par) << b
            cells[col] = v
            prev_col = col
            prev_val = v

    for t in range(len(peel_keys) - 1, -1, -1):
        k = peel_keys[t]
        c = peel_places[t]
        v = vals[k]
        for s in rows[k]:
            if s != c:
                v ^= cells[s]
        cells[c] = v

    order_rec = PeelOrder(
        keys=np.asarray(peel_keys, dtype=np.int64),
        places=np.asarray(peel_places, dtype=np.int64),
        core=np.asarray(core, dtype=np.int64),
    )
    return np.asarray(cells, dtype=np.uint64), order_rec


class RetrievalTable:
    """Immutable alpha-bit retrieval structure."""

    __slots__ = ("layout", "alpha", "seed", "cells", "encoded_count", "c", "peel_order")

    def __init__(self, layout, alpha, seed, cells, encoded_count, c, peel_order=None):
        self.layout = layout
        self.alpha = int(alpha)
        self.seed = int(seed) & MASK64
        self.cells = cells
        self.encoded_count = int(encoded_count)
        self.c = c
        self.peel_order = peel_order

    @property
    def m(self) -> int:
        return self.layout.m

    @property
    def bits(self) -> int:
        """Payload size: cells times cell width (headers excluded)."""
        return self.layout.m * self.alpha

    def retrieve(self, key: int) -> int:
        d = mix64(key, self.seed)
        v = 0
        for s in derive_slots(d, self.layout):
            v ^= int(self.cells[s])
        return v

    def retrieve_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        if keys.size == 0:
            return np.zeros(0, dtype=np.uint64)
        slots = derive_slots_batch(mix64_batch(keys, self.seed), self.layout)
        out = self.cells[slots[:, 0]]
        for i in range(1, slots.shape[1]):
            out = out ^ self.cells[slots[:, i]]
        return out

    def to_bytes(self, variant: int = VARIANT_RAW) -> bytes:
        w = ByteWriter()
        w.raw(serialize.MAGIC_RETRIEVAL)
        w.u16(serialize.FORMAT_VERSION)
        w.u16(variant)
        w.u64(self.seed)
        frac = Fraction(self.c)
        w.u32(frac.numerator)
        w.u32(frac.denominator)
        w.u16(self.layout.j)
        w.u32(self.layout.window)
        w.u32(self.layout.segment_len)
        w.u16(self.alpha)
        w.u64(self.layout.m)
        w.u64(self.encoded_count)
        w.text(MIXER_ID)
        w.blob(serialize.pack_cells(self.cells, self.alpha))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RetrievalTable":
        table, variant = read_table(ByteReader(data))
        if variant != VARIANT_RAW:
            raise FormatError("not a raw retrieval table")
        return table


def read_table(r: ByteReader):
    """Read one serialized table from ``r``; returns (table, variant)."""
    r.expect_magic(serialize.MAGIC_RETRIEVAL)
    version = r.u16()
    if version != serialize.FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    variant = r.u16()
    seed = r.u64()
    c = Fraction(r.u32(), r.u32())
    j = r.u16()
    window = r.u32()
    segment_len = r.u32()
    alpha = r.u16()
    m = r.u64()
    encoded_count = r.u64()
    mixer = r.text()
    if mixer != MIXER_ID:
        raise FormatError(f"table built with mixer {mixer!r}, expected {MIXER_ID!r}")
    layout = SlotLayout(j=j, window=window, segment_len=segment_len)
    if layout.m != m:
        raise FormatError("cell count disagrees with layout")
    cells = serialize.unpack_cells(r.blob(), alpha, m)
    return RetrievalTable(layout, alpha, seed, cells, encoded_count, c), variant


def build_retrieval(keys, values, alpha, *, config=None, seed=0, capacity=None):
    """Build a table mapping each key to its alpha-bit value.

    ``capacity`` (default ``len(keys)``) sizes the cell array; pass a larger
    value to leave slack.  Raises DuplicateKey on repeated keys and
    PeelingFailed when every seed retry hits an inconsistent core.
    """
    if config is None:
        config = BuildConfig()
    if not 1 <= alpha <= 64:
        raise ValueError("alpha must be in [1, 64]")
    keys = as_u64_array(keys)
    values = as_u64_array(values)
    if keys.shape != values.shape:
        raise ValueError("keys and values must align")
    n = keys.size
    if n and np.unique(keys).size != n:
        raise DuplicateKey("build input contains a repeated key")
    if alpha < 64 and values.size and int(values.max()) >> alpha:
        raise ValueError("value does not fit in alpha bits")

    cap = n if capacity is None else int(capacity)
    if cap < n:
        raise ValueError("capacity below key count")
    if cap == 0:
        layout = SlotLayout(j=config.j, window=1, segment_len=1)
    else:
        layout = SlotLayout.for_capacity(cap, config.c, j=config.j, max_window=config.z)

    seed_t = int(seed) & MASK64
    for _ in range(config.max_retries + 1):
        table = _attempt_build(keys, values, alpha, layout, seed_t, config)
        if table is not None:
            return table
        seed_t = (seed_t + GAMMA) & MASK64
    raise PeelingFailed(
        f"no consistent assignment for {n} keys after {config.max_retries + 1} attempts"
    )


def _attempt_build(keys, values, alpha, layout, seed, config):
    n = keys.size
    if n == 0:
        cells = np.zeros(layout.m, dtype=np.uint64)
        order = PeelOrder(
            keys=np.zeros(0, dtype=np.int64),
            places=np.zeros(0, dtype=np.int64),
            core=np.zeros(0, dtype=np.int64),
        )
        return RetrievalTable(layout, alpha, seed, cells, 0, config.c, order)
    slots = derive_slots_batch(mix64_batch(keys, seed), layout).astype(np.int64)
    solved = solve_xor_system(slots, values.tolist(), layout.m, alpha)
    if solved is None:
        return None
    cells, order = solved
    table = RetrievalTable(layout, alpha, seed, cells, n, config.c, order)
    if not np.array_equal(table.retrieve_batch(keys), values):
        return None
    return table


class ApproxBloomier:
    """Approximate membership filter: stores an alpha-bit fingerprint per key.

    Positives always pass; a fresh key passes with probability 2^-alpha.
    """

    __slots__ = ("table",)

    def __init__(self, table: RetrievalTable):
        self.table = table

    @property
    def alpha(self) -> int:
        return self.table.alpha

    @property
    def bits(self) -> int:
        return self.table.bits

    def fpr_bound(self) -> float:
        return 2.0 ** -self.table.alpha

    def contains(self, key: int) -> bool:
        d = mix64(key, self.table.seed)
        return self.table.retrieve(key) == derive_fingerprint(d, self.table.alpha)

    def contains_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        if keys.size == 0:
            return np.zeros(0, dtype=bool)
        fp = derive_fingerprint_batch(mix64_batch(keys, self.table.seed), self.table.alpha)
        return self.table.retrieve_batch(keys) == fp

    def to_bytes(self) -> bytes:
        return self.table.to_bytes(VARIANT_APPROX)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ApproxBloomier":
        table, variant = read_table(ByteReader(data))
        if variant != VARIANT_APPROX:
            raise FormatError("not an approximate filter")
        return cls(table)


class ExactBloomier:
    """Exact one-bit membership over a closed key set.

    Strategy A stores ``h1(key)`` for positives and its complement for
    negatives, so unencoded keys pass with probability about one half.
    Strategy B stores the label bit directly.
    """

    __slots__ = ("table", "strategy")

    def __init__(self, table: RetrievalTable, strategy: Strategy):
        if strategy not in (Strategy.A, Strategy.B):
            raise ValueError("exact filter needs strategy A or B")
        self.table = table
        self.strategy = strategy

    @property
    def bits(self) -> int:
        return self.table.bits

    def contains(self, key: int) -> bool:
        got = self.table.retrieve(key)
        if self.strategy is Strategy.A:
            return got == (mix64(key, self.table.seed) & 1)
        return got == 1

    def contains_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        if keys.size == 0:
            return np.zeros(0, dtype=bool)
        got = self.table.retrieve_batch(keys)
        if self.strategy is Strategy.A:
            h1 = mix64_batch(keys, self.table.seed) & np.uint64(1)
            return got == h1
        return got == np.uint64(1)

    def to_bytes(self) -> bytes:
        tag = VARIANT_EXACT_A if self.strategy is Strategy.A else VARIANT_EXACT_B
        return self.table.to_bytes(tag)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ExactBloomier":
        table, variant = read_table(ByteReader(data))
        if variant == VARIANT_EXACT_A:
            return cls(table, Strategy.A)
        if variant == VARIANT_EXACT_B:
            return cls(table, Strategy.B)
        raise FormatError("not an exact filter")


def build_approx_bloomier(positives, alpha, *, config=None, seed=0, extra_capacity=0):
    """Filter passing every positive and fresh keys at rate 2^-alpha."""
    if config is None:
        config = BuildConfig()
    positives = as_u64_array(positives)
    if positives.size and np.unique(positives).size != positives.size:
        raise DuplicateKey("positive set contains a repeated key")
    seed_t = int(seed) & MASK64
    cap = positives.size + int(extra_capacity)
    for _ in range(config.max_retries + 1):
        fp = derive_fingerprint_batch(mix64_batch(positives, seed_t), alpha)
        try:
            table = build_retrieval(
                positives,
                fp,
                alpha,
                config=BuildConfig(config.c, config.j, config.z, 0),
                seed=seed_t,
                capacity=cap,
            )
            return ApproxBloomier(table)
        except PeelingFailed:
            seed_t = (seed_t + GAMMA) & MASK64
    raise PeelingFailed("approximate filter construction exhausted retries")


def build_exact_bloomier(keys, labels, *, strategy=Strategy.A, config=None, seed=0, extra_capacity=0):
    """Exact filter over ``keys``: contains(k) == labels[k] for every input."""
    if config is None:
        config = BuildConfig()
    keys = as_u64_array(keys)
    labels = np.asarray(labels, dtype=bool)
    if keys.shape != labels.shape:
        raise ValueError("keys and labels must align")
    seed_t = int(seed) & MASK64
    cap = keys.size + int(extra_capacity)
    for _ in range(config.max_retries + 1):
        if strategy is Strategy.A:
            h1 = mix64_batch(keys, seed_t) & np.uint64(1)
            vals = np.where(labels, h1, h1 ^ np.uint64(1))
        else:
            vals = labels.astype(np.uint64)
        try:
            table = build_retrieval(
                keys,
                vals,
                1,
                config=BuildConfig(config.c, config.j, config.z, 0),
                seed=seed_t,
                capacity=cap,
            )
            return ExactBloomier(table, strategy)
        except PeelingFailed:
            seed_t = (seed_t + GAMMA) & MASK64
    raise PeelingFailed("exact filter construction exhausted retries")
