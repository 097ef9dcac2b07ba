"""Arithmetic in Z_2^64 and the fixed-point codec.

Ring elements are plain ``numpy.uint64`` values (or Python ints in
``[0, 2**64)``); numpy's unsigned integer ufuncs already wrap modulo 2^64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import RangeError

RING_BITS = 64
MODULUS = 1 << RING_BITS
MASK = MODULUS - 1
DTYPE = np.uint64


def as_ring(values) -> np.ndarray:
    """Coerce ints (possibly negative) or int arrays into uint64 residues."""
    if isinstance(values, np.ndarray):
        if values.dtype == DTYPE:
            return values
        if values.dtype.kind == "i":
            return values.astype(np.int64).view(DTYPE)
        if values.dtype.kind == "u":
            return values.astype(DTYPE)
        if values.dtype == object:
            return np.array([int(v) & MASK for v in values.ravel()], dtype=DTYPE).reshape(values.shape)
        raise TypeError(f"cannot interpret {values.dtype} as ring elements")
    if isinstance(values, (int, np.integer)):
        return np.array(int(values) & MASK, dtype=DTYPE)
    return as_ring(np.array([int(v) & MASK for v in np.ravel(values)], dtype=object).reshape(np.shape(values)))


def to_signed(values) -> np.ndarray:
    """Two's-complement view: residues >= 2^63 become negative."""
    return as_ring(values).view(np.int64)


def signed_int(value: int) -> int:
    value = int(value) & MASK
    return value - MODULUS if value >> (RING_BITS - 1) else value


def pack(values) -> bytes:
    return np.ascontiguousarray(as_ring(values), dtype="<u8").tobytes()


def unpack(buf: bytes) -> np.ndarray:
    if len(buf) % 8:
        raise ValueError(f"payload of {len(buf)} bytes is not a multiple of 8")
    return np.frombuffer(buf, dtype="<u8").astype(DTYPE)


def _round_half_away(y: float) -> int:
    mag = abs(y)
    whole = math.floor(mag)
    if mag - whole >= 0.5:
        whole += 1
    return -whole if y < 0 else whole


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed fixed point with ``frac_bits`` fractional bits in a 64-bit ring."""

    frac_bits: int = 16
    total_bits: int = RING_BITS

    def __post_init__(self):
        if self.total_bits != RING_BITS:
            raise ValueError("only a 64-bit ring is supported")
        if not 0 <= self.frac_bits <= 30:
            raise ValueError(f"frac_bits must be in [0, 30], got {self.frac_bits}")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def bound(self) -> int:
        """Exclusive bound on |r| for encodable reals."""
        return 1 << (self.total_bits - self.frac_bits - 1)

    def encode(self, r) -> int:
        if isinstance(r, Fraction):
            scaled = r * self.scale
            whole = abs(scaled.numerator) // scaled.denominator
            if abs(scaled) - whole >= Fraction(1, 2):
                whole += 1
            value = -whole if scaled < 0 else whole
            if abs(r) >= self.bound:
                raise RangeError(f"{r} is outside the representable range (|r| < 2^{self.total_bits - self.frac_bits - 1})")
            return value & MASK
        r = float(r)
        if not math.isfinite(r) or abs(r) >= self.bound:
            raise RangeError(f"{r} is outside the representable range (|r| < 2^{self.total_bits - self.frac_bits - 1})")
        return _round_half_away(r * self.scale) & MASK

    def decode(self, e) -> float:
        return signed_int(e) / self.scale

    def encode_array(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) >= self.bound):
            raise RangeError("array contains values outside the representable range")
        y = np.abs(arr) * self.scale
        whole = np.floor(y)
        whole += (y - whole) >= 0.5
        return (np.copysign(whole, arr).astype(np.int64)).view(DTYPE)

    def decode_array(self, values) -> np.ndarray:
        return to_signed(values).astype(np.float64) / self.scale
