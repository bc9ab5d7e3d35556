"""Random access into Huffman-coded text.

The coded bitstream is never stored.  Instead every code bit becomes a key
(position, depth) in a small universe and the set bits become the positives
of an exact cascade, so decoding symbol i walks the canonical code tree with
one membership probe per code bit.  When ones outnumber zeros the polarity
is flipped before building so the filter always stores the minority side.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..chained import ChainedAndFilter, build_exact_and
from ..errors import CodeTooDeep, EmptyAlphabet
from ..serialize import (
    FORMAT_VERSION,
    MAGIC_TEXT,
    ByteReader,
    ByteWriter,
    FormatError,
)

# depth is packed into the low byte of the key, so codes cap at 255 bits
MAX_CODE_LEN = 255
_DEPTH_BITS = 8


def _huffman_lengths(counts: dict[int, float]) -> dict[int, int]:
    """Code length per symbol, deterministic under ties."""
    if len(counts) == 1:
        return {next(iter(counts)): 1}
    heap = []
    for order, (sym, w) in enumerate(sorted(counts.items())):
        heap.append((float(w), order, {sym: 0}))
    heapq.heapify(heap)
    order = len(heap)
    while len(heap) > 1:
        w1, _, d1 = heapq.heappop(heap)
        w2, _, d2 = heapq.heappop(heap)
        merged = {s: ln + 1 for s, ln in d1.items()}
        merged.update({s: ln + 1 for s, ln in d2.items()})
        heapq.heappush(heap, (w1 + w2, order, merged))
        order += 1
    return heap[0][2]


def _canonical_codes(lengths: dict[int, int]) -> dict[int, tuple[int, int]]:
    """Assign codes longest-first: deepest symbol gets the all-zero code and
    each next code is the previous plus one, truncated to its own length."""
    items = sorted(lengths.items(), key=lambda kv: (-kv[1], kv[0]))
    codes: dict[int, tuple[int, int]] = {}
    code = 0
    prev_len = items[0][1]
    for sym, ln in items:
        code = (code + 1) >> (prev_len - ln) if codes else 0
        codes[sym] = (ln, code)
        prev_len = ln
    return codes


@dataclass
class HuffmanCodebook:
    """Canonical prefix code: symbol -> (length, code value)."""

    codes: dict[int, tuple[int, int]]
    _decode: dict[tuple[int, int], int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._decode = {lc: sym for sym, lc in self.codes.items()}
        if len(self._decode) != len(self.codes):
            raise ValueError("code table is not injective")

    @property
    def max_length(self) -> int:
        return max(ln for ln, _ in self.codes.values())

    def lengths(self) -> dict[int, int]:
        return {sym: ln for sym, (ln, _) in self.codes.items()}

    def encode_symbol(self, symbol: int) -> tuple[int, int]:
        return self.codes[symbol]

    def decode_prefix(self, length: int, code: int) -> int | None:
        return self._decode.get((length, code))

    def kraft_sum(self) -> float:
        return sum(2.0 ** -ln for ln, _ in self.codes.values())


def huffman_build(counts) -> HuffmanCodebook:
    """Canonical Huffman codebook from symbol frequencies.

    ``counts`` maps symbols (non-negative ints) to positive weights; bytes
    and other symbol iterables are tallied first.  A one-symbol alphabet
    still gets a 1-bit code so coded text has positive length.
    """
    if not isinstance(counts, dict):
        counts = Counter(counts)
    if not counts:
        raise EmptyAlphabet("no symbols to code")
    for sym, w in counts.items():
        if not isinstance(sym, (int, np.integer)) or sym < 0:
            raise ValueError(f"symbols must be non-negative ints, got {sym!r}")
        if w <= 0:
            raise ValueError(f"count for symbol {sym} must be positive")
    return HuffmanCodebook(_canonical_codes(_huffman_lengths(dict(counts))))


def code_stats(counts, codebook: HuffmanCodebook | None = None) -> dict[str, float]:
    """Entropy and mean code length of a frequency table."""
    if not isinstance(counts, dict):
        counts = Counter(counts)
    if not counts:
        raise EmptyAlphabet("no symbols to code")
    if codebook is None:
        codebook = huffman_build(counts)
    total = float(sum(counts.values()))
    h = 0.0
    avg = 0.0
    for sym, w in counts.items():
        p = w / total
        h -= p * math.log2(p)
        avg += p * codebook.codes[sym][0]
    return {"entropy": h, "avg_code_length": avg, "symbols": float(len(counts))}


def _code_bit_grid(symbols: np.ndarray, codebook: HuffmanCodebook):
    """Keys (i << 8) | j for every code bit of the text, plus each bit value.

    Positions i and depths j are 1-based; bit j of symbol i is the j-th most
    significant bit of its code.
    """
    if codebook.max_length > MAX_CODE_LEN:
        raise CodeTooDeep(f"code length {codebook.max_length} exceeds {MAX_CODE_LEN}")
    max_sym = int(symbols.max())
    len_by_sym = np.zeros(max_sym + 1, dtype=np.int64)
    code_by_sym = np.zeros(max_sym + 1, dtype=np.uint64)
    for sym, (ln, code) in codebook.codes.items():
        if sym <= max_sym:
            len_by_sym[sym] = ln
            code_by_sym[sym] = code
    lens = len_by_sym[symbols]
    if np.any(lens == 0):
        missing = int(symbols[lens == 0][0])
        raise ValueError(f"symbol {missing} is not in the codebook")
    total = int(lens.sum())
    pos = np.repeat(np.arange(1, symbols.size + 1, dtype=np.uint64), lens)
    starts = np.repeat(np.cumsum(lens) - lens, lens)
    depth = np.arange(total, dtype=np.uint64) - starts.astype(np.uint64) + np.uint64(1)
    keys = (pos << np.uint64(_DEPTH_BITS)) | depth
    shift = np.repeat(lens, lens).astype(np.uint64) - depth
    bits = (np.repeat(code_by_sym[symbols], lens) >> shift) & np.uint64(1)
    return keys, bits.astype(bool)


@dataclass
class RandomAccessText:
    """Coded text that answers decode-at-position without a bitstream."""

    filter: ChainedAndFilter
    codebook: HuffmanCodebook
    length: int
    flipped: bool
    total_code_bits: int

    @property
    def bits_per_symbol(self) -> float:
        return self.filter.size_bits / self.length

    def bit_at(self, position: int, depth: int) -> bool:
        key = (int(position) << _DEPTH_BITS) | int(depth)
        return self.filter.contains(key) ^ self.flipped

    def decode_at(self, position: int) -> int:
        """Decode the symbol at 1-based ``position`` with one membership
        probe per code bit."""
        if not 1 <= position <= self.length:
            raise IndexError(f"position {position} outside 1..{self.length}")
        code = 0
        for depth in range(1, self.codebook.max_length + 1):
            code = (code << 1) | int(self.bit_at(position, depth))
            sym = self.codebook.decode_prefix(depth, code)
            if sym is not None:
                return sym
        raise FormatError("bit walk left the codebook")

    def decode_all(self) -> np.ndarray:
        """Decode every position breadth-first with batched probes."""
        out = np.zeros(self.length, dtype=np.int64)
        pending = np.arange(1, self.length + 1, dtype=np.uint64)
        codes = np.zeros(self.length, dtype=np.int64)
        for depth in range(1, self.codebook.max_length + 1):
            if pending.size == 0:
                break
            keys = (pending << np.uint64(_DEPTH_BITS)) | np.uint64(depth)
            bits = self.filter.contains_batch(keys)
            if self.flipped:
                bits = ~bits
            idx = pending.astype(np.int64) - 1
            codes[idx] = (codes[idx] << 1) | bits.astype(np.int64)
            done = np.zeros(pending.size, dtype=bool)
            for t, p in enumerate(idx):
                sym = self.codebook.decode_prefix(depth, int(codes[p]))
                if sym is not None:
                    out[p] = sym
                    done[t] = True
            pending = pending[~done]
        if pending.size:
            raise FormatError("bit walk left the codebook")
        return out

    def to_bytes(self) -> bytes:
        w = ByteWriter()
        w.raw(MAGIC_TEXT)
        w.u8(FORMAT_VERSION)
        w.u8(int(self.flipped))
        w.u64(self.length)
        w.u64(self.total_code_bits)
        w.u16(len(self.codebook.codes))
        for sym in sorted(self.codebook.codes):
            w.u32(sym)
            w.u8(self.codebook.codes[sym][0])
        w.blob(self.filter.to_bytes())
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RandomAccessText":
        r = ByteReader(data)
        if r.raw(4) != MAGIC_TEXT:
            raise FormatError("not a coded-text container")
        if r.u8() != FORMAT_VERSION:
            raise FormatError("unsupported format version")
        flipped = bool(r.u8())
        length = r.u64()
        total_bits = r.u64()
        lengths = {}
        for _ in range(r.u16()):
            sym = r.u32()
            lengths[sym] = r.u8()
        codebook = HuffmanCodebook(_canonical_codes(lengths))
        filt = ChainedAndFilter.from_bytes(r.blob())
        return cls(filter=filt, codebook=codebook, length=length,
                   flipped=flipped, total_code_bits=total_bits)


def ra_encode(data, codebook: HuffmanCodebook | None = None, *,
              config=None, seed=0) -> RandomAccessText:
    """Code ``data`` (bytes or ints) into a randomly accessible filter.

    The universe is every (position, depth) code-bit key; the positives are
    the minority bit value, with the polarity recorded in the container.
    A codebook is built from the data itself when none is given.
    """
    symbols = np.frombuffer(bytes(data), dtype=np.uint8).astype(np.int64) \
        if isinstance(data, (bytes, bytearray)) else np.asarray(data, dtype=np.int64)
    if symbols.size == 0:
        raise EmptyAlphabet("cannot encode empty text")
    if codebook is None:
        codebook = huffman_build(Counter(symbols.tolist()))
    keys, bits = _code_bit_grid(symbols, codebook)
    ones = int(bits.sum())
    flipped = ones > keys.size - ones
    positives = keys[~bits] if flipped else keys[bits]
    if positives.size == 0:
        # constant bit pattern: store the populated side instead
        flipped = not flipped
        positives = keys[~bits] if flipped else keys[bits]
    filt = build_exact_and(keys, positives, config=config, seed=seed,
                           keep_inputs=False)
    return RandomAccessText(filter=filt, codebook=codebook,
                            length=int(symbols.size), flipped=flipped,
                            total_code_bits=int(keys.size))


def ra_decode_at(text: RandomAccessText, position: int) -> int:
    return text.decode_at(position)
