"""Canonical byte encoding used by every on-wire and on-disk structure.

All compound records are encoded as a fixed-order sequence of fields, each
field length-prefixed with a 4-byte big-endian length. Integers are widened
to 8-byte big-endian before prefixing. The encoding has no optional fields
and no padding, so serializing the same value twice always yields identical
bytes.
"""

from __future__ import annotations

import hashlib
import struct

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")

ZERO32 = b"\x00" * 32


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def encode_u64(value: int) -> bytes:
    if value < 0:
        raise ValueError("canonical integers are unsigned")
    return _U64.pack(value)


def lp(field: bytes) -> bytes:
    """Length-prefix a single field."""
    return _U32.pack(len(field)) + field


def encode_fields(*fields: bytes | int) -> bytes:
    """Encode fields in order; ints are widened to 8-byte big-endian."""
    parts = []
    for field in fields:
        if isinstance(field, int):
            field = encode_u64(field)
        parts.append(lp(field))
    return b"".join(parts)


class Reader:
    """Sequential decoder for the length-prefixed encoding."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def exhausted(self) -> bool:
        return self._pos == len(self._data)

    def read_field(self) -> bytes:
        if self._pos + 4 > len(self._data):
            raise ValueError("truncated length prefix")
        (length,) = _U32.unpack_from(self._data, self._pos)
        self._pos += 4
        if self._pos + length > len(self._data):
            raise ValueError("truncated field body")
        field = self._data[self._pos : self._pos + length]
        self._pos += length
        return field

    def read_u64(self) -> int:
        field = self.read_field()
        if len(field) != 8:
            raise ValueError("integer field must be 8 bytes")
        return _U64.unpack(field)[0]
