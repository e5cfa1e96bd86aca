import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsnncl.errors import ConfigurationError
from qsnncl.plasticity import SynapseMatrix
from qsnncl.quant import (
    FixedPointFormat,
    bits_per_weight,
    format_name,
    make_format,
    parse_format,
    quantize,
    quantize_array,
    quantize_codes,
    quantize_weights,
)

FORMATS = [make_format(0, f) for f in (3, 5, 7, 11)] + [make_format(1, 2), make_format(2, 4)]
finite = st.floats(-8, 8, allow_nan=False, allow_infinity=False)
fmts = st.sampled_from(FORMATS)


def reference_quantize(x: float, i: int, f: int) -> float:
    """Scale to an exact rational, integer floor, clamp the integer, rescale."""
    code = math.floor(Fraction(x) * (1 << f))
    code = max(-(1 << (i + f)), min((1 << (i + f)) - 1, code))
    return float(Fraction(code, 1 << f))


def test_format_ranges():
    q12 = make_format(1, 2)
    assert (q12.min_value, q12.max_value, q12.epsilon) == (-2.0, 1.75, 0.25)
    q03 = make_format(0, 3)
    assert (q03.min_value, q03.max_value, q03.epsilon) == (-1.0, 0.875, 0.125)
    assert make_format(0, 31).total_bits == 32
    assert str(q03) == "Q0.3" and q03.total_bits == 4


def test_format_rejections():
    with pytest.raises(ConfigurationError, match="fractional_bits"):
        make_format(1, 0)
    with pytest.raises(ConfigurationError):
        make_format(-1, 3)
    with pytest.raises(ConfigurationError):
        make_format(4, 30)
    with pytest.raises(ConfigurationError):
        make_format(0, 3, rounding="stochastic")


def test_parse_format():
    assert parse_format("Q0.3") == make_format(0, 3)
    assert parse_format(" Q1.6 ") == make_format(1, 6)
    assert parse_format("fp32") is None
    assert format_name(None) == "fp32" and format_name(make_format(0, 7)) == "Q0.7"
    with pytest.raises(ConfigurationError):
        parse_format("4bit")
    with pytest.raises(ConfigurationError):
        parse_format("Q1.0")


def test_bits_per_weight():
    assert bits_per_weight(None) == 32
    assert bits_per_weight(parse_format("Q0.7")) == 8


def test_quantize_examples():
    q12 = make_format(1, 2)
    assert quantize(0.0, q12).value == 0.0
    assert quantize(0.8125, q12).value == 0.75
    assert quantize(-0.3, q12).value == -0.5
    assert quantize(5.0, make_format(1, 4)).value == 1.9375
    assert quantize(-99.0, q12).value == -2.0


def test_quantize_rejects_non_finite():
    with pytest.raises(ValueError):
        quantize(float("nan"), make_format(0, 3))
    with pytest.raises(ValueError):
        quantize_array(np.array([0.1, np.inf]), make_format(0, 3))


def test_nearest_mode_differs_from_truncation():
    trunc = make_format(0, 3)
    near = make_format(0, 3, rounding="nearest")
    assert quantize(0.1875, trunc).value == 0.125
    assert quantize(0.1875, near).value == 0.25


@pytest.mark.parametrize("f", [3, 5, 7, 11])
def test_oracle_equivalence(f):
    fmt = make_format(0, f)
    rng = np.random.default_rng(f)
    x = np.concatenate([rng.uniform(-1.5, 1.5, 99_000), rng.uniform(-1e-3, 1e-3, 1_000)])
    expected = np.array([reference_quantize(float(v), 0, f) for v in x])
    assert np.array_equal(quantize_array(x, fmt), expected)
    scalar = np.array([quantize(float(v), fmt).value for v in x])
    assert np.array_equal(scalar, expected)


@given(finite, fmts)
def test_idempotent(x, fmt):
    q = quantize(x, fmt).value
    assert quantize(q, fmt).value == q


@given(finite, fmts)
def test_grid_membership(x, fmt):
    q = quantize(x, fmt)
    assert (q.value * fmt.scale).is_integer()
    assert fmt.min_value <= q.value <= fmt.max_value
    assert q.code == q.value * fmt.scale


@given(finite, finite, fmts)
def test_monotone(x, y, fmt):
    if x > y:
        x, y = y, x
    assert quantize(x, fmt).value <= quantize(y, fmt).value


@given(finite, fmts)
def test_error_bound_inside_range(x, fmt):
    if not fmt.min_value <= x <= fmt.max_value:
        return
    err = Fraction(x) - Fraction(quantize(x, fmt).value)
    assert 0 <= err < Fraction(1, fmt.scale)


@given(st.lists(finite, min_size=1, max_size=50), fmts)
def test_array_matches_scalar(xs, fmt):
    arr = quantize_array(np.array(xs), fmt)
    assert arr.tolist() == [quantize(x, fmt).value for x in xs]
    assert np.array_equal(quantize_codes(np.array(xs), fmt) / fmt.scale, arr)


def test_quantize_weights_matrix():
    rng = np.random.default_rng(0)
    fmt = make_format(0, 4)
    syn = SynapseMatrix(rng.random((20, 5)), np.arange(20.0), np.ones(5))
    out = quantize_weights(syn, fmt)
    grid = np.arange(16) / 16
    assert np.isin(out.weights, grid).all()
    assert np.array_equal(out.pre_traces, syn.pre_traces) and np.array_equal(out.post_traces, syn.post_traces)
    assert out.format == fmt
    assert np.array_equal(quantize_weights(out.weights, fmt), out.weights)
    assert not quantize_weights(np.zeros((3, 3)), fmt).any()
    assert quantize_weights(syn.weights, None) is not syn.weights
