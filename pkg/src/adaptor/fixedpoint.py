"""Signed fixed-point arithmetic: quantization, exact MAC, requantization.

Raw values are integers scaled by ``2**frac_bits``. A product of two raw
values carries ``2*frac_bits`` fractional bits and is summed exactly in a wide
accumulator; only :func:`requantize` rounds (half to even) and saturates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

_QFMT = re.compile(r"^Q(\d+)\.(\d+)$")


@dataclass(frozen=True)
class FixedFormat:
    total_bits: int = 16
    frac_bits: int = 8
    rounding: str = "nearest_even"
    overflow: str = "saturate"

    def __post_init__(self):
        if not 8 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in [8, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(f"frac_bits must be in [0, {self.total_bits - 1}], got {self.frac_bits}")
        if self.rounding != "nearest_even" or self.overflow != "saturate":
            raise ValueError("only nearest_even rounding with saturation is supported")

    @classmethod
    def parse(cls, text: str) -> "FixedFormat":
        """Parse ``"Qm.n"``: m integer bits (sign included), n fractional bits."""
        m = _QFMT.match(text.strip())
        if not m:
            raise ValueError(f"bad fixed-point format {text!r}, expected Qm.n")
        int_bits, frac_bits = int(m.group(1)), int(m.group(2))
        return cls(total_bits=int_bits + frac_bits, frac_bits=frac_bits)

    def __str__(self):
        return f"Q{self.total_bits - self.frac_bits}.{self.frac_bits}"

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def quantum(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return self.raw_min * self.quantum

    @property
    def max_value(self) -> float:
        return self.raw_max * self.quantum


Q8_8 = FixedFormat(16, 8)


def _scalar_or_array(a):
    return a[()] if isinstance(a, np.ndarray) and a.ndim == 0 else a


def saturate(raw, fmt: FixedFormat):
    raw = np.asarray(raw)
    out = np.minimum(np.maximum(raw, fmt.raw_min), fmt.raw_max)
    return _scalar_or_array(np.asarray(out).astype(np.int64))


def quantize(x, fmt: FixedFormat):
    """Real value(s) to raw integers: nearest, ties to even, saturating."""
    x = np.asarray(x, dtype=np.float64)
    scaled = np.rint(np.ldexp(x, fmt.frac_bits))  # rint rounds half to even
    scaled = np.clip(scaled, fmt.raw_min, fmt.raw_max)
    return _scalar_or_array(scaled.astype(np.int64))


def dequantize(raw, fmt: FixedFormat):
    return _scalar_or_array(np.ldexp(np.asarray(raw, dtype=np.float64), -fmt.frac_bits))


def accumulator_bits(fmt: FixedFormat, max_len: int) -> int:
    """Width that holds any sum of ``max_len`` in-range products, plus one bias term."""
    return 2 * fmt.total_bits + math.ceil(math.log2(max_len + 1))


def accumulator_dtype(fmt: FixedFormat, max_len: int):
    # int64 when provably overflow-free, else arbitrary-precision Python ints
    return np.int64 if accumulator_bits(fmt, max_len) <= 63 else object


def mac(acc, a, b):
    """``acc + a*b`` on raw values; exact, no intermediate rounding."""
    return acc + int(a) * int(b)


def round_shift(acc, shift: int):
    """Divide integer(s) by ``2**shift`` rounding half to even."""
    if shift == 0:
        return acc
    scalar = not isinstance(acc, np.ndarray)
    a = np.asarray(acc)
    if a.dtype != object:
        a = a.astype(np.int64)
    q = a >> shift
    r = a - (q << shift)
    half = 1 << (shift - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    out = q + up.astype(a.dtype) if a.dtype != object else q + np.where(up, 1, 0).astype(object)
    return out[()] if scalar else out


def requantize(acc, fmt: FixedFormat):
    """Wide accumulator (``2*frac_bits`` fractional bits) back to ``fmt``."""
    return saturate(round_shift(acc, fmt.frac_bits), fmt)


def wide_matmul(a, b, fmt: FixedFormat, reduction_len: int | None = None):
    """Exact integer product of raw matrices in an accumulator wide enough for
    ``reduction_len`` terms (defaults to the inner dimension)."""
    n = reduction_len if reduction_len is not None else a.shape[-1]
    dtype = accumulator_dtype(fmt, n)
    return np.asarray(a).astype(dtype) @ np.asarray(b).astype(dtype)
