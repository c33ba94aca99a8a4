"""Canonical binary encoding shared by every ledger structure.

Fixed field order, big-endian integers, length-prefixed byte strings.
Digests over these bytes must be reproducible bit-for-bit by any
independent implementation, so nothing here is allowed to depend on
platform, locale, or dict ordering.
"""

from __future__ import annotations

import hashlib

DIGEST_SIZE = 32
ZERO_DIGEST = b"\x00" * DIGEST_SIZE


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class Writer:
    """Append-only canonical encoder."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def u8(self, value: int) -> None:
        if not 0 <= value < 1 << 8:
            raise ValueError(f"u8 out of range: {value}")
        self._buf.append(value)

    def u16(self, value: int) -> None:
        if not 0 <= value < 1 << 16:
            raise ValueError(f"u16 out of range: {value}")
        self._buf += value.to_bytes(2, "big")

    def u32(self, value: int) -> None:
        if not 0 <= value < 1 << 32:
            raise ValueError(f"u32 out of range: {value}")
        self._buf += value.to_bytes(4, "big")

    def u64(self, value: int) -> None:
        if not 0 <= value < 1 << 64:
            raise ValueError(f"u64 out of range: {value}")
        self._buf += value.to_bytes(8, "big")

    def i64(self, value: int) -> None:
        if not -(1 << 63) <= value < 1 << 63:
            raise ValueError(f"i64 out of range: {value}")
        self._buf += value.to_bytes(8, "big", signed=True)

    def raw(self, data: bytes) -> None:
        self._buf += data

    def digest(self, data: bytes) -> None:
        if len(data) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(data)}")
        self._buf += data

    def bytes_(self, data: bytes) -> None:
        self.u32(len(data))
        self._buf += data

    def str_(self, text: str) -> None:
        self.bytes_(text.encode("utf-8"))

    def getvalue(self) -> bytes:
        return bytes(self._buf)


class DecodeError(ValueError):
    """Raised when bytes do not parse as the expected canonical structure."""


class Reader:
    """Cursor-based decoder matching :class:`Writer`."""

    def __init__(self, data: bytes, offset: int = 0) -> None:
        self._data = data
        self.offset = offset

    def _take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self._data):
            raise DecodeError(
                f"truncated input: need {n} bytes at offset {self.offset}, have {len(self._data) - self.offset}"
            )
        chunk = self._data[self.offset : end]
        self.offset = end
        return chunk

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self._take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self._take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self._take(8), "big")

    def i64(self) -> int:
        return int.from_bytes(self._take(8), "big", signed=True)

    def digest(self) -> bytes:
        return self._take(DIGEST_SIZE)

    def bytes_(self) -> bytes:
        n = self.u32()
        if n > len(self._data) - self.offset:
            raise DecodeError(f"length prefix {n} exceeds remaining input at offset {self.offset}")
        return self._take(n)

    def str_(self) -> str:
        raw = self.bytes_()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid utf-8 at offset {self.offset}: {exc}") from exc

    def done(self) -> bool:
        return self.offset == len(self._data)

    def expect_done(self) -> None:
        if not self.done():
            raise DecodeError(f"{len(self._data) - self.offset} trailing bytes after decode")
