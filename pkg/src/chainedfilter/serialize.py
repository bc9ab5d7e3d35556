"""Binary container helpers: fixed little-endian scalars, length-prefixed
strings, and bit-packed cell arrays.

Every serialized structure starts with a 4-byte magic, a format version and a
variant tag, and embeds the mixer identity string so readers can reject
tables produced by an incompatible hash.  All encodings are little-endian and
bit-exact across platforms.
"""

from __future__ import annotations

import io
import struct

import numpy as np

MAGIC_RETRIEVAL = b"CFB1"
MAGIC_BLOOM = b"BLM1"
MAGIC_CUCKOO = b"CKF1"
MAGIC_OTHELLO = b"OTH1"
MAGIC_CHAINED = b"CFC1"
MAGIC_TEXT = b"CFH1"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed or incompatible serialized input."""


class ByteWriter:
    def __init__(self) -> None:
        self._buf = io.BytesIO()

    def raw(self, data: bytes) -> None:
        self._buf.write(data)

    def u8(self, v: int) -> None:
        self._buf.write(struct.pack("<B", v))

    def u16(self, v: int) -> None:
        self._buf.write(struct.pack("<H", v))

    def u32(self, v: int) -> None:
        self._buf.write(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self._buf.write(struct.pack("<Q", v))

    def f64(self, v: float) -> None:
        self._buf.write(struct.pack("<d", v))

    def blob(self, data: bytes) -> None:
        """Length-prefixed byte string."""
        self.u32(len(data))
        self._buf.write(data)

    def text(self, s: str) -> None:
        self.blob(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return self._buf.getvalue()


class ByteReader:
    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def raw(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise FormatError("truncated input")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def _unpack(self, fmt: str) -> int:
        size = struct.calcsize(fmt)
        (v,) = struct.unpack_from(fmt, self.raw(size))
        return v

    def u8(self) -> int:
        return self._unpack("<B")

    def u16(self) -> int:
        return self._unpack("<H")

    def u32(self) -> int:
        return self._unpack("<I")

    def u64(self) -> int:
        return self._unpack("<Q")

    def f64(self) -> float:
        size = struct.calcsize("<d")
        (v,) = struct.unpack_from("<d", self.raw(size))
        return v

    def blob(self) -> bytes:
        return self.raw(self.u32())

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def expect_magic(self, magic: bytes) -> None:
        got = self.raw(len(magic))
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}")

    def done(self) -> bool:
        return self._pos == len(self._data)


def pack_cells(values: np.ndarray, width: int) -> bytes:
    """Pack an array of width-bit values, little-endian bit order."""
    if width < 1 or width > 64:
        raise ValueError("width must be in [1, 64]")
    vals = np.ascontiguousarray(values, dtype="<u8")
    if vals.size == 0:
        return b""
    bits = np.unpackbits(vals.view(np.uint8).reshape(-1, 8), axis=1, bitorder="little")
    return np.packbits(bits[:, :width].ravel(), bitorder="little").tobytes()


def unpack_cells(data: bytes, width: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_cells`; returns a uint64 array of ``count``."""
    if width < 1 or width > 64:
        raise ValueError("width must be in [1, 64]")
    if count == 0:
        return np.zeros(0, dtype=np.uint64)
    need = (count * width + 7) // 8
    if len(data) < need:
        raise FormatError("cell payload shorter than declared")
    bits = np.unpackbits(np.frombuffer(data[:need], dtype=np.uint8), bitorder="little")
    rows = np.zeros((count, 64), dtype=np.uint8)
    rows[:, :width] = bits[: count * width].reshape(count, width)
    return np.packbits(rows, axis=1, bitorder="little").view("<u8").ravel().astype(np.uint64)


def pack_bitarray(bits: np.ndarray) -> bytes:
    """Pack a 0/1 uint8 array, little-endian bit order."""
    return np.packbits(np.ascontiguousarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bitarray(data: bytes, count: int) -> np.ndarray:
    out = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if out.size < count:
        raise FormatError("bit payload shorter than declared")
    return out[:count]
