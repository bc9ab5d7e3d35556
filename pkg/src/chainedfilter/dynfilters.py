"""Dynamic membership structures: Bloom filter, cuckoo filter, and a
two-array XOR classifier for one-bit labels.

These are the mutable building blocks used by the chained combinators when
the key set is not closed at build time.  All three hash through
:func:`chainedfilter.hashing.mix64` and serialize to compact little-endian
containers.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    ChainedFilterError,
    ConflictingLabel,
    NotFound,
    RebuildLoop,
    TableFull,
)
from .hashing import GAMMA, MASK64, MIXER_ID, as_u64_array, mix64, mix64_batch
from . import serialize
from .serialize import ByteReader, ByteWriter, FormatError

_LO32 = (1 << 32) - 1


class BloomFilter:
    """Plain Bloom filter, double hashing from a single digest."""

    __slots__ = ("m", "k", "seed", "bits")

    def __init__(self, m: int, k: int, seed: int = 0, bits: np.ndarray | None = None):
        if m < 1:
            raise ValueError("m must be positive")
        if not 1 <= k <= 64:
            raise ValueError("k out of range")
        self.m = int(m)
        self.k = int(k)
        self.seed = int(seed) & MASK64
        self.bits = np.zeros(m, dtype=np.uint8) if bits is None else bits

    @classmethod
    def for_items(cls, n: int, bits_per_key: float = 9.6, k: int | None = None, seed: int = 0):
        """Sized for ``n`` keys at ``bits_per_key``; k defaults to the
        false-positive-optimal round(bits_per_key * ln 2)."""
        if n < 1:
            raise ValueError("n must be positive")
        m = max(64, math.ceil(n * bits_per_key))
        if k is None:
            k = max(1, round(bits_per_key * math.log(2)))
        return cls(m, k, seed)

    def _indices(self, key: int) -> list[int]:
        d = mix64(key, self.seed)
        h1 = d & _LO32
        h2 = (d >> 32) | 1
        return [(h1 + i * h2) % self.m for i in range(self.k)]

    def _indices_batch(self, keys: np.ndarray) -> np.ndarray:
        d = mix64_batch(keys, self.seed)
        h1 = d & np.uint64(_LO32)
        h2 = (d >> np.uint64(32)) | np.uint64(1)
        i = np.arange(self.k, dtype=np.uint64)
        return (h1[:, None] + i[None, :] * h2[:, None]) % np.uint64(self.m)

    def insert(self, key: int) -> None:
        for i in self._indices(key):
            self.bits[i] = 1

    def insert_batch(self, keys) -> None:
        keys = as_u64_array(keys)
        if keys.size:
            self.bits[self._indices_batch(keys).ravel()] = 1

    # training code "forces" a key to pass; for a Bloom filter that is
    # exactly an insert
    force_bits = insert

    def contains(self, key: int) -> bool:
        return all(self.bits[i] for i in self._indices(key))

    def contains_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        if keys.size == 0:
            return np.zeros(0, dtype=bool)
        got = self.bits[self._indices_batch(keys)]
        return got.all(axis=1)

    @property
    def size_bits(self) -> int:
        return self.m

    def fill_ratio(self) -> float:
        return float(self.bits.mean())

    def to_bytes(self) -> bytes:
        w = ByteWriter()
        w.raw(serialize.MAGIC_BLOOM)
        w.u16(serialize.FORMAT_VERSION)
        w.u64(self.seed)
        w.u64(self.m)
        w.u16(self.k)
        w.text(MIXER_ID)
        w.blob(serialize.pack_bitarray(self.bits))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        r = ByteReader(data)
        out = cls._read(r)
        return out

    @classmethod
    def _read(cls, r: ByteReader) -> "BloomFilter":
        r.expect_magic(serialize.MAGIC_BLOOM)
        if r.u16() != serialize.FORMAT_VERSION:
            raise FormatError("unsupported version")
        seed = r.u64()
        m = r.u64()
        k = r.u16()
        if r.text() != MIXER_ID:
            raise FormatError("mixer mismatch")
        bits = serialize.unpack_bitarray(r.blob(), m)
        return cls(m, k, seed, bits=bits)


_MAX_KICKS = 500


class CuckooFilter:
    """Cuckoo filter with four-slot buckets and partial-key displacement.

    The alternate bucket of a fingerprint is ``bucket ^ mix(fingerprint)``,
    so relocation never needs the original key.  ``delete`` removes one copy
    of a stored fingerprint and raises NotFound when no slot matches, which
    is safe only for keys that were actually inserted.
    """

    __slots__ = ("num_buckets", "fingerprint_bits", "seed", "slots", "count", "_kick_state")

    SLOTS_PER_BUCKET = 4

    def __init__(self, num_buckets: int, fingerprint_bits: int = 12, seed: int = 0,
                 slots: np.ndarray | None = None, count: int = 0):
        if num_buckets < 1 or num_buckets & (num_buckets - 1):
            raise ValueError("num_buckets must be a power of two")
        if not 2 <= fingerprint_bits <= 16:
            raise ValueError("fingerprint_bits out of range")
        self.num_buckets = int(num_buckets)
        self.fingerprint_bits = int(fingerprint_bits)
        self.seed = int(seed) & MASK64
        if slots is None:
            slots = np.zeros((num_buckets, self.SLOTS_PER_BUCKET), dtype=np.uint16)
        self.slots = slots
        self.count = int(count)
        self._kick_state = self.seed

    @classmethod
    def for_capacity(cls, n: int, fingerprint_bits: int = 12, seed: int = 0):
        """Table able to hold ``n`` keys at ~95% slot load."""
        if n < 1:
            raise ValueError("n must be positive")
        need = math.ceil(n / (cls.SLOTS_PER_BUCKET * 0.95))
        nb = 1 << max(0, (need - 1).bit_length())
        return cls(nb, fingerprint_bits, seed)

    def _fingerprint(self, digest: int) -> int:
        return digest % ((1 << self.fingerprint_bits) - 1) + 1

    def _index(self, digest: int) -> int:
        return (digest >> 32) & (self.num_buckets - 1)

    def _alt_index(self, index: int, fp: int) -> int:
        return (index ^ mix64(fp, self.seed)) & (self.num_buckets - 1)

    def _next_rand(self) -> int:
        self._kick_state = (self._kick_state + GAMMA) & MASK64
        return mix64(self._kick_state)

    def _try_place(self, index: int, fp: int) -> bool:
        row = self.slots[index]
        for s in range(self.SLOTS_PER_BUCKET):
            if row[s] == 0:
                row[s] = fp
                return True
        return False

    def insert(self, key: int) -> None:
        d = mix64(key, self.seed)
        fp = self._fingerprint(d)
        i1 = self._index(d)
        if self._try_place(i1, fp) or self._try_place(self._alt_index(i1, fp), fp):
            self.count += 1
            return
        # displace residents until a hole opens
        idx = i1 if self._next_rand() & 1 else self._alt_index(i1, fp)
        for _ in range(_MAX_KICKS):
            slot = self._next_rand() % self.SLOTS_PER_BUCKET
            fp, self.slots[idx][slot] = int(self.slots[idx][slot]), fp
            idx = self._alt_index(idx, fp)
            if self._try_place(idx, fp):
                self.count += 1
                return
        raise TableFull(f"no room after {_MAX_KICKS} displacements")

    def contains(self, key: int) -> bool:
        d = mix64(key, self.seed)
        fp = self._fingerprint(d)
        i1 = self._index(d)
        if fp in self.slots[i1]:
            return True
        return fp in self.slots[self._alt_index(i1, fp)]

    def contains_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        return np.fromiter((self.contains(int(k)) for k in keys), dtype=bool, count=keys.size)

    def delete(self, key: int) -> None:
        d = mix64(key, self.seed)
        fp = self._fingerprint(d)
        i1 = self._index(d)
        for idx in (i1, self._alt_index(i1, fp)):
            row = self.slots[idx]
            for s in range(self.SLOTS_PER_BUCKET):
                if row[s] == fp:
                    row[s] = 0
                    self.count -= 1
                    return
        raise NotFound("fingerprint not present in either bucket")

    @property
    def size_bits(self) -> int:
        return self.num_buckets * self.SLOTS_PER_BUCKET * self.fingerprint_bits

    def load(self) -> float:
        return self.count / (self.num_buckets * self.SLOTS_PER_BUCKET)

    def to_bytes(self) -> bytes:
        w = ByteWriter()
        w.raw(serialize.MAGIC_CUCKOO)
        w.u16(serialize.FORMAT_VERSION)
        w.u64(self.seed)
        w.u32(self.num_buckets)
        w.u16(self.fingerprint_bits)
        w.u64(self.count)
        w.text(MIXER_ID)
        w.blob(serialize.pack_cells(self.slots.ravel().astype(np.uint64), self.fingerprint_bits))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CuckooFilter":
        r = ByteReader(data)
        r.expect_magic(serialize.MAGIC_CUCKOO)
        if r.u16() != serialize.FORMAT_VERSION:
            raise FormatError("unsupported version")
        seed = r.u64()
        nb = r.u32()
        fpb = r.u16()
        count = r.u64()
        if r.text() != MIXER_ID:
            raise FormatError("mixer mismatch")
        flat = serialize.unpack_cells(r.blob(), fpb, nb * cls.SLOTS_PER_BUCKET)
        slots = flat.astype(np.uint16).reshape(nb, cls.SLOTS_PER_BUCKET)
        return cls(nb, fpb, seed, slots=slots, count=count)


class OthelloFilter:
    """Exact one-bit classifier over a dynamic key set.

    Each key reads one cell from each of two bit arrays; its label is the
    XOR.  Inserts maintain a union-find forest over cells: joining two
    components may flip every cell of the smaller one, and an insert whose
    endpoints already share a component either agrees (no-op) or forces a
    rebuild under fresh seeds.  Reinserting a key with the opposite label
    raises ConflictingLabel.

    A deserialized instance answers queries but cannot accept inserts (the
    key map is not serialized).
    """

    __slots__ = (
        "capacity", "side", "seed_a", "seed_b", "color",
        "_labels", "_parent", "_compsize", "_nodes", "rebuilds", "_frozen",
    )

    LOAD = 1.165  # cells per side per key

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.rebuilds = 0
        self._labels: dict[int, int] = {}
        self._frozen = False
        self._reset(int(seed) & MASK64, (int(seed) + GAMMA) & MASK64)

    def _reset(self, seed_a: int, seed_b: int) -> None:
        self.side = math.ceil(self.LOAD * self.capacity)
        self.seed_a = seed_a
        self.seed_b = seed_b
        n = 2 * self.side
        self.color = np.zeros(n, dtype=np.uint8)
        self._parent = list(range(n))
        self._compsize = [1] * n
        self._nodes = [[i] for i in range(n)]

    def _endpoints(self, key: int) -> tuple[int, int]:
        u = ((mix64(key, self.seed_a) >> 32) * self.side) >> 32
        v = ((mix64(key, self.seed_b) >> 32) * self.side) >> 32
        return u, self.side + v

    def _find(self, x: int) -> int:
        p = self._parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return root

    def _link(self, u: int, v: int, flip_side: int | None) -> None:
        """Union the components of u and v, flipping one side first if the
        new edge's parity demands it."""
        ru, rv = self._find(u), self._find(v)
        if flip_side is not None:
            small = ru if self._compsize[ru] <= self._compsize[rv] else rv
            for node in self._nodes[small]:
                self.color[node] ^= 1
        if self._compsize[ru] < self._compsize[rv]:
            ru, rv = rv, ru
        self._parent[rv] = ru
        self._compsize[ru] += self._compsize[rv]
        self._nodes[ru].extend(self._nodes[rv])
        self._nodes[rv] = []

    def _insert_edge(self, key: int, bit: int) -> bool:
        """True on success, False when a rebuild is needed."""
        u, v = self._endpoints(key)
        need = bit ^ int(self.color[u]) ^ int(self.color[v])
        if self._find(u) == self._find(v):
            return not need
        self._link(u, v, flip_side=True if need else None)
        return True

    def insert(self, key: int, bit: int) -> None:
        if self._frozen:
            raise ChainedFilterError("deserialized classifier is query-only")
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        known = self._labels.get(key)
        if known is not None:
            if known != bit:
                raise ConflictingLabel(f"key {key} already labeled {known}")
            return
        self._labels[key] = bit
        if not self._insert_edge(key, bit):
            self._rebuild()

    def set(self, key: int, bit: int) -> None:
        """Insert-or-overwrite; a changed label forces a rebuild."""
        if self._frozen:
            raise ChainedFilterError("deserialized classifier is query-only")
        known = self._labels.get(key)
        if known == bit:
            return
        if known is None:
            self.insert(key, bit)
            return
        self._labels[key] = bit
        self._rebuild()

    def _rebuild(self) -> None:
        if len(self._labels) > self.capacity:
            self.capacity = math.ceil(self.capacity * 1.25)
        for attempt in range(64):
            self.rebuilds += 1
            self._reset((self.seed_a + GAMMA) & MASK64, (self.seed_b + GAMMA) & MASK64)
            if all(self._insert_edge(k, b) for k, b in self._labels.items()):
                return
        raise RebuildLoop("could not re-place labels after 64 seed attempts")

    def query(self, key: int) -> int:
        u, v = self._endpoints(key)
        return int(self.color[u]) ^ int(self.color[v])

    def query_batch(self, keys) -> np.ndarray:
        keys = as_u64_array(keys)
        if keys.size == 0:
            return np.zeros(0, dtype=np.uint8)
        side = np.uint64(self.side)
        u = (mix64_batch(keys, self.seed_a) >> np.uint64(32)) * side >> np.uint64(32)
        v = (mix64_batch(keys, self.seed_b) >> np.uint64(32)) * side >> np.uint64(32)
        return self.color[u] ^ self.color[v + side]

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def size_bits(self) -> int:
        return 2 * self.side

    def to_bytes(self) -> bytes:
        w = ByteWriter()
        w.raw(serialize.MAGIC_OTHELLO)
        w.u16(serialize.FORMAT_VERSION)
        w.u64(self.seed_a)
        w.u64(self.seed_b)
        w.u64(self.side)
        w.u64(self.capacity)
        w.text(MIXER_ID)
        w.blob(serialize.pack_bitarray(self.color))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "OthelloFilter":
        r = ByteReader(data)
        r.expect_magic(serialize.MAGIC_OTHELLO)
        if r.u16() != serialize.FORMAT_VERSION:
            raise FormatError("unsupported version")
        seed_a = r.u64()
        seed_b = r.u64()
        side = r.u64()
        capacity = r.u64()
        if r.text() != MIXER_ID:
            raise FormatError("mixer mismatch")
        color = serialize.unpack_bitarray(r.blob(), 2 * side)
        out = cls.__new__(cls)
        out.capacity = capacity
        out.side = side
        out.seed_a = seed_a
        out.seed_b = seed_b
        out.color = color
        out.rebuilds = 0
        out._labels = {}
        out._parent = []
        out._compsize = []
        out._nodes = []
        out._frozen = True
        return out


def make_bloom(n: int, bits_per_key: float = 9.6, k: int | None = None, seed: int = 0) -> BloomFilter:
    return BloomFilter.for_items(n, bits_per_key, k, seed)


def make_cuckoo_filter(capacity: int, fingerprint_bits: int = 12, seed: int = 0) -> CuckooFilter:
    return CuckooFilter.for_capacity(capacity, fingerprint_bits, seed)


def make_othello(capacity: int, seed: int = 0) -> OthelloFilter:
    return OthelloFilter(capacity, seed)
