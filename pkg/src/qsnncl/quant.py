"""Fixed-point ``Qi.f`` weight quantization.

A ``Qi.f`` number has one sign bit, ``i`` integer bits and ``f`` fractional
bits in two's complement, so it covers ``[-2**i, 2**i - 2**-f]`` on a grid of
step ``2**-f``.  Quantization is truncation: scale by ``2**f``, floor, clamp,
rescale.  Out-of-range inputs saturate instead of wrapping.

Scaling by a power of two is exact in binary floating point, so values
produced here sit exactly on the grid whether they are held as integer codes
(:class:`QuantizedValue`) or as float64 arrays (:func:`quantize_array`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError

TRUNCATE = "truncate"
NEAREST = "nearest"
_ROUNDING_MODES = (TRUNCATE, NEAREST)

# Widest format accepted; codes must fit a signed 64-bit integer comfortably.
MAX_TOTAL_BITS = 32
FULL_PRECISION_BITS = 32

_FORMAT_RE = re.compile(r"^Q(\d+)\.(\d+)$")


@dataclass(frozen=True)
class FixedPointFormat:
    """Signed fixed-point format with ``integer_bits`` and ``fractional_bits``.

    ``rounding`` selects ``"truncate"`` (floor toward -inf, the default) or
    ``"nearest"`` (round half up).  Only truncation matches two's-complement
    bit dropping.
    """

    integer_bits: int
    fractional_bits: int
    rounding: str = TRUNCATE

    def __post_init__(self):
        if self.integer_bits < 0:
            raise ConfigurationError(f"integer_bits must be >= 0, got {self.integer_bits}")
        if self.fractional_bits < 1:
            raise ConfigurationError(
                f"fractional_bits must be >= 1, got {self.fractional_bits}"
            )
        if self.total_bits > MAX_TOTAL_BITS:
            raise ConfigurationError(
                f"Q{self.integer_bits}.{self.fractional_bits} is {self.total_bits} bits wide; "
                f"at most {MAX_TOTAL_BITS} are supported"
            )
        if self.rounding not in _ROUNDING_MODES:
            raise ConfigurationError(
                f"rounding must be one of {_ROUNDING_MODES}, got {self.rounding!r}"
            )

    @property
    def scale(self) -> int:
        return 1 << self.fractional_bits

    @property
    def epsilon(self) -> float:
        return 2.0 ** -self.fractional_bits

    @property
    def min_code(self) -> int:
        return -(1 << (self.integer_bits + self.fractional_bits))

    @property
    def max_code(self) -> int:
        return (1 << (self.integer_bits + self.fractional_bits)) - 1

    @property
    def min_value(self) -> float:
        return -(2.0 ** self.integer_bits)

    @property
    def max_value(self) -> float:
        return 2.0 ** self.integer_bits - self.epsilon

    @property
    def total_bits(self) -> int:
        return 1 + self.integer_bits + self.fractional_bits

    def __str__(self):
        return f"Q{self.integer_bits}.{self.fractional_bits}"


@dataclass(frozen=True)
class QuantizedValue:
    """A real number on a format's grid, held as its integer code."""

    code: int
    format: FixedPointFormat

    def __post_init__(self):
        if not self.format.min_code <= self.code <= self.format.max_code:
            raise ValueError(f"code {self.code} outside the range of {self.format}")

    @property
    def value(self) -> float:
        return self.code / self.format.scale

    def __float__(self):
        return self.value


def make_format(integer_bits: int, fractional_bits: int, rounding: str = TRUNCATE) -> FixedPointFormat:
    return FixedPointFormat(int(integer_bits), int(fractional_bits), rounding)


def parse_format(text: str, rounding: str = TRUNCATE) -> FixedPointFormat | None:
    """Parse ``"Qi.f"``; ``"fp32"`` (or ``"float"``) means no quantization and returns None."""
    text = text.strip()
    if text.lower() in ("fp32", "float", "float32", "none"):
        return None
    m = _FORMAT_RE.match(text)
    if m is None:
        raise ConfigurationError(f"cannot parse weight format {text!r}; expected 'Qi.f' or 'fp32'")
    return make_format(int(m.group(1)), int(m.group(2)), rounding)


def format_name(fmt: FixedPointFormat | None) -> str:
    return "fp32" if fmt is None else str(fmt)


def bits_per_weight(fmt: FixedPointFormat | None) -> int:
    return FULL_PRECISION_BITS if fmt is None else fmt.total_bits


def _round_scaled(scaled, rounding):
    if rounding == TRUNCATE:
        return np.floor(scaled)
    return np.floor(scaled + 0.5)


def quantize(x: float, fmt: FixedPointFormat) -> QuantizedValue:
    """Quantize a finite scalar onto ``fmt``'s grid."""
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    scaled = x * fmt.scale
    code = math.floor(scaled) if fmt.rounding == TRUNCATE else math.floor(scaled + 0.5)
    code = min(max(code, fmt.min_code), fmt.max_code)
    return QuantizedValue(int(code), fmt)


def quantize_codes(x, fmt: FixedPointFormat) -> np.ndarray:
    """Integer codes of ``x`` on ``fmt`` (int64 array)."""
    scaled = _round_scaled(np.asarray(x, dtype=np.float64) * fmt.scale, fmt.rounding)
    return np.clip(scaled, fmt.min_code, fmt.max_code).astype(np.int64)


def quantize_array(x, fmt: FixedPointFormat | None) -> np.ndarray:
    """Elementwise quantization returning float64 values on the grid.

    ``fmt=None`` is full precision and returns a float64 copy unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if fmt is None:
        return x.copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    scaled = _round_scaled(x * fmt.scale, fmt.rounding)
    np.clip(scaled, fmt.min_code, fmt.max_code, out=scaled)
    return scaled / fmt.scale


def quantize_weights(weights, fmt: FixedPointFormat | None):
    """Snap the weight matrix of a synapse block onto ``fmt``.

    Accepts a :class:`~qsnncl.plasticity.SynapseMatrix` (returns a new one
    with traces copied untouched) or a bare array.
    """
    if isinstance(weights, np.ndarray):
        return quantize_array(weights, fmt)
    return replace(
        weights,
        weights=quantize_array(weights.weights, fmt),
        pre_traces=weights.pre_traces.copy(),
        post_traces=weights.post_traces.copy(),
        format=fmt,
    )
