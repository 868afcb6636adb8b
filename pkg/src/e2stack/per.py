"""Unaligned, PER-flavoured bit codec.

Everything on the wire in this package is built from a handful of
primitives: constrained integers (offset from the lower bound, minimal
width), fixed 64-bit unsigned integers, IEEE-754 binary64 reals, one-bit
booleans and length-prefixed strings of 8-bit characters.  All sizes are
bounded, so lengths are always plain constrained integers.

On top of the primitives sit small declarative field types (``Constrained``,
``CharString``, ``SequenceOf``, ``Sequence``, ``Choice`` ...) that the
service-model and E2AP schemas are written in.
"""
from __future__ import annotations

import dataclasses
import enum
import struct
from typing import Any, Callable, Sequence as Seq

__all__ = [
    "CodecError",
    "RangeError",
    "TruncationError",
    "MalformedError",
    "EncodingError",
    "BitBuffer",
    "constrained_width",
    "append_constrained_uint",
    "read_constrained_uint",
    "append_fixed_uint64",
    "read_fixed_uint64",
    "append_chars",
    "read_chars",
    "finalize",
    "to_hex",
    "from_hex",
]


class CodecError(ValueError):
    """Base class for every encode/decode failure."""


class RangeError(CodecError):
    def __init__(self, field: str, value: Any, lb: int, ub: int):
        super().__init__(f"{field}: value {value!r} outside [{lb}, {ub}]")
        self.field = field
        self.value = value
        self.lb = lb
        self.ub = ub


class TruncationError(CodecError):
    def __init__(self, field: str, expected: int, remaining: int):
        super().__init__(
            f"{field}: needed {expected} bits, only {remaining} remaining"
        )
        self.field = field
        self.expected = expected
        self.remaining = remaining


class MalformedError(CodecError):
    pass


class EncodingError(CodecError):
    pass


def constrained_width(lb: int, ub: int) -> int:
    """Bits needed for an integer constrained to ``[lb, ub]``."""
    if ub < lb:
        raise ValueError(f"empty range [{lb}, {ub}]")
    return (ub - lb).bit_length()


class BitBuffer:
    """Append-only bit sink in encode mode, cursor-driven source in decode mode.

    Bits are packed MSB first.  Build one with ``BitBuffer()`` to encode or
    ``BitBuffer.from_octets(data)`` to decode.
    """

    def __init__(self) -> None:
        self._out = bytearray()
        self._acc = 0
        self._acc_bits = 0
        self.bit_len = 0
        self._data: bytes | None = None
        self.cursor = 0

    @classmethod
    def from_octets(cls, data: bytes, bit_len: int | None = None) -> "BitBuffer":
        buf = cls()
        buf._data = bytes(data)
        buf.bit_len = len(data) * 8 if bit_len is None else bit_len
        if buf.bit_len > len(data) * 8:
            raise ValueError("bit_len exceeds data")
        return buf

    @property
    def decoding(self) -> bool:
        return self._data is not None

    @property
    def remaining(self) -> int:
        return self.bit_len - self.cursor

    # -- encode side -------------------------------------------------------

    def append_bits(self, value: int, width: int) -> "BitBuffer":
        if self._data is not None:
            raise RuntimeError("buffer is in decode mode")
        if width == 0:
            return self
        self._acc = (self._acc << width) | (value & ((1 << width) - 1))
        self._acc_bits += width
        self.bit_len += width
        while self._acc_bits >= 8:
            self._acc_bits -= 8
            self._out.append((self._acc >> self._acc_bits) & 0xFF)
        self._acc &= (1 << self._acc_bits) - 1
        return self

    def append_octets(self, data: bytes) -> "BitBuffer":
        if self._acc_bits == 0 and self._data is None:
            self._out += data
            self.bit_len += 8 * len(data)
            return self
        for b in data:
            self.append_bits(b, 8)
        return self

    def finalize(self) -> bytes:
        """Pad with zero bits to an octet boundary and return the octets."""
        out = bytes(self._out)
        if self._acc_bits:
            out += bytes([(self._acc << (8 - self._acc_bits)) & 0xFF])
        return out

    def to_bitstring(self) -> str:
        if self._data is not None:
            data, n = self._data, self.bit_len
        else:
            data, n = self.finalize(), self.bit_len
        return "".join(f"{b:08b}" for b in data)[:n]

    # -- decode side -------------------------------------------------------

    def read_bits(self, width: int, field: str = "bits") -> int:
        if self._data is None:
            raise RuntimeError("buffer is in encode mode")
        if width == 0:
            return 0
        if width > self.remaining:
            raise TruncationError(field, width, self.remaining)
        start = self.cursor
        end = start + width
        first, last = start >> 3, (end + 7) >> 3
        chunk = int.from_bytes(self._data[first:last], "big")
        chunk >>= (last << 3) - end
        self.cursor = end
        return chunk & ((1 << width) - 1)

    def read_octets(self, n: int, field: str = "octets") -> bytes:
        if 8 * n > self.remaining:
            raise TruncationError(field, 8 * n, self.remaining)
        if self.cursor & 7 == 0:
            start = self.cursor >> 3
            self.cursor += 8 * n
            return self._data[start:start + n]
        return bytes(self.read_bits(8, field) for _ in range(n))

    def expect_end(self) -> None:
        """Require only zero padding (< 8 bits) to remain."""
        rem = self.remaining
        if rem >= 8:
            raise MalformedError(f"{rem // 8} trailing octet(s) after message")
        if rem and self.read_bits(rem, "padding"):
            raise MalformedError("non-zero padding bits")

    def __repr__(self) -> str:
        mode = "decode" if self.decoding else "encode"
        return f"<BitBuffer {mode} bit_len={self.bit_len} cursor={self.cursor}>"


# -- primitive operations ---------------------------------------------------


def append_constrained_uint(buf: BitBuffer, value: int, lb: int, ub: int,
                            field: str = "value") -> BitBuffer:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EncodingError(f"{field}: expected int, got {type(value).__name__}")
    if not lb <= value <= ub:
        raise RangeError(field, value, lb, ub)
    return buf.append_bits(value - lb, constrained_width(lb, ub))


def read_constrained_uint(buf: BitBuffer, lb: int, ub: int,
                          field: str = "value") -> int:
    value = lb + buf.read_bits(constrained_width(lb, ub), field)
    if value > ub:
        raise MalformedError(f"{field}: decoded {value} above bound {ub}")
    return value


U64_MAX = (1 << 64) - 1


def append_fixed_uint64(buf: BitBuffer, value: int, field: str = "value") -> BitBuffer:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EncodingError(f"{field}: expected int, got {type(value).__name__}")
    if not 0 <= value <= U64_MAX:
        raise RangeError(field, value, 0, U64_MAX)
    return buf.append_bits(value, 64)


def read_fixed_uint64(buf: BitBuffer, field: str = "value") -> int:
    return buf.read_bits(64, field)


def append_real(buf: BitBuffer, value: float, field: str = "value") -> BitBuffer:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise EncodingError(f"{field}: expected float, got {type(value).__name__}")
    (raw,) = struct.unpack(">Q", struct.pack(">d", float(value)))
    return buf.append_bits(raw, 64)


def read_real(buf: BitBuffer, field: str = "value") -> float:
    raw = buf.read_bits(64, field)
    return struct.unpack(">d", raw.to_bytes(8, "big"))[0]


def append_chars(buf: BitBuffer, s: str, min_len: int, max_len: int,
                 field: str = "string") -> BitBuffer:
    if not isinstance(s, str):
        raise EncodingError(f"{field}: expected str, got {type(s).__name__}")
    try:
        raw = s.encode("latin-1")
    except UnicodeEncodeError as exc:
        raise EncodingError(f"{field}: character outside 8 bits at {exc.start}") from None
    append_constrained_uint(buf, len(raw), min_len, max_len, f"{field}.length")
    return buf.append_octets(raw)


def read_chars(buf: BitBuffer, min_len: int, max_len: int, field: str = "string") -> str:
    n = read_constrained_uint(buf, min_len, max_len, f"{field}.length")
    return buf.read_octets(n, field).decode("latin-1")


def finalize(buf: BitBuffer) -> bytes:
    return buf.finalize()


def to_hex(data: bytes) -> str:
    return data.hex().upper()


def from_hex(text: str) -> bytes:
    try:
        return bytes.fromhex("".join(text.split()))
    except ValueError as exc:
        raise CodecError(f"invalid hex: {exc}") from None


# -- declarative field types -----------------------------------------------


class Field:
    """A codec for one value.  Subclasses implement ``encode``/``decode``."""

    def encode(self, buf: BitBuffer, value: Any, name: str) -> None:
        raise NotImplementedError

    def decode(self, buf: BitBuffer, name: str) -> Any:
        raise NotImplementedError


@dataclasses.dataclass(frozen=True)
class Constrained(Field):
    lb: int
    ub: int

    def encode(self, buf, value, name):
        append_constrained_uint(buf, value, self.lb, self.ub, name)

    def decode(self, buf, name):
        return read_constrained_uint(buf, self.lb, self.ub, name)


class UInt64(Field):
    def encode(self, buf, value, name):
        append_fixed_uint64(buf, value, name)

    def decode(self, buf, name):
        return read_fixed_uint64(buf, name)


class Real(Field):
    def encode(self, buf, value, name):
        append_real(buf, value, name)

    def decode(self, buf, name):
        return read_real(buf, name)


class Boolean(Field):
    def encode(self, buf, value, name):
        if not isinstance(value, bool):
            raise EncodingError(f"{name}: expected bool")
        buf.append_bits(int(value), 1)

    def decode(self, buf, name):
        return bool(buf.read_bits(1, name))


@dataclasses.dataclass(frozen=True)
class CharString(Field):
    min_len: int
    max_len: int

    def encode(self, buf, value, name):
        append_chars(buf, value, self.min_len, self.max_len, name)

    def decode(self, buf, name):
        return read_chars(buf, self.min_len, self.max_len, name)


@dataclasses.dataclass(frozen=True)
class OctetString(Field):
    min_len: int
    max_len: int

    def encode(self, buf, value, name):
        if not isinstance(value, (bytes, bytearray)):
            raise EncodingError(f"{name}: expected bytes")
        append_constrained_uint(buf, len(value), self.min_len, self.max_len,
                                f"{name}.length")
        buf.append_octets(bytes(value))

    def decode(self, buf, name):
        n = read_constrained_uint(buf, self.min_len, self.max_len, f"{name}.length")
        return buf.read_octets(n, name)


@dataclasses.dataclass(frozen=True)
class FixedOctets(Field):
    size: int

    def encode(self, buf, value, name):
        if not isinstance(value, (bytes, bytearray)) or len(value) != self.size:
            raise EncodingError(f"{name}: expected {self.size} octets")
        buf.append_octets(bytes(value))

    def decode(self, buf, name):
        return buf.read_octets(self.size, name)


class Enumerated(Field):
    def __init__(self, enum_cls: type[enum.IntEnum]):
        self.enum_cls = enum_cls
        values = [int(m) for m in enum_cls]
        self.lb, self.ub = min(values), max(values)

    def encode(self, buf, value, name):
        append_constrained_uint(buf, int(self.enum_cls(value)), self.lb, self.ub, name)

    def decode(self, buf, name):
        raw = read_constrained_uint(buf, self.lb, self.ub, name)
        try:
            return self.enum_cls(raw)
        except ValueError:
            raise MalformedError(f"{name}: unknown enumeration value {raw}") from None


@dataclasses.dataclass(frozen=True)
class SequenceOf(Field):
    item: Field
    min_len: int
    max_len: int

    def encode(self, buf, value, name):
        append_constrained_uint(buf, len(value), self.min_len, self.max_len,
                                f"{name}.count")
        for i, v in enumerate(value):
            self.item.encode(buf, v, f"{name}[{i}]")

    def decode(self, buf, name):
        n = read_constrained_uint(buf, self.min_len, self.max_len, f"{name}.count")
        return tuple(self.item.decode(buf, f"{name}[{i}]") for i in range(n))


class Sequence(Field):
    """Fields of ``cls`` encoded in declaration order.

    ``check`` validates cross-field invariants; it runs before encoding and
    after decoding and should raise ``ValueError``.
    """

    def __init__(self, cls: type, fields: Seq[tuple[str, Field]],
                 check: Callable[[Any], None] | None = None):
        self.cls = cls
        self.fields = tuple(fields)
        self.check = check

    def encode(self, buf, value, name):
        if not isinstance(value, self.cls):
            raise EncodingError(f"{name}: expected {self.cls.__name__}")
        if self.check is not None:
            try:
                self.check(value)
            except CodecError:
                raise
            except ValueError as exc:
                raise EncodingError(f"{name}: {exc}") from None
        for fname, f in self.fields:
            f.encode(buf, getattr(value, fname), f"{name}.{fname}")

    def decode(self, buf, name):
        kwargs = {fname: f.decode(buf, f"{name}.{fname}") for fname, f in self.fields}
        value = self.cls(**kwargs)
        if self.check is not None:
            try:
                self.check(value)
            except ValueError as exc:
                raise MalformedError(f"{name}: {exc}") from None
        return value


class Choice(Field):
    """Alternative index over ``[0, n-1]`` followed by the chosen body."""

    def __init__(self, alternatives: Seq[tuple[type, Field]]):
        self.alternatives = tuple(alternatives)

    def _index(self, value) -> int:
        for i, (cls, _) in enumerate(self.alternatives):
            if type(value) is cls:
                return i
        raise EncodingError(f"no alternative for {type(value).__name__}")

    def encode(self, buf, value, name):
        i = self._index(value)
        append_constrained_uint(buf, i, 0, len(self.alternatives) - 1, f"{name}.choice")
        self.alternatives[i][1].encode(buf, value, name)

    def decode(self, buf, name):
        i = read_constrained_uint(buf, 0, len(self.alternatives) - 1, f"{name}.choice")
        return self.alternatives[i][1].decode(buf, name)


def encode_value(field: Field, value: Any, name: str = "msg") -> bytes:
    buf = BitBuffer()
    field.encode(buf, value, name)
    return buf.finalize()


def decode_value(field: Field, data: bytes, name: str = "msg") -> Any:
    buf = BitBuffer.from_octets(data)
    value = field.decode(buf, name)
    buf.expect_end()
    return value
