import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergodic_inference.quantization import (
    CellId,
    alphabet_scheme,
    dyadic_scheme,
    parse_scheme,
    quantize,
    quantize_window,
)

D = dyadic_scheme()
finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)


def test_level_one_breakpoints():
    assert D.breakpoints(1).tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert D.n_cells(1) == 6


def test_level_one_refined_by_level_two():
    assert set(D.breakpoints(1)) <= set(D.breakpoints(2))
    assert D.breakpoints(2)[:3].tolist() == [-2.0, -1.75, -1.5]


@pytest.mark.parametrize("k", range(1, 9))
def test_interior_width_shrinks(k):
    assert np.diff(D.breakpoints(k)).max() == 2.0**-k
    assert D.breakpoints(k)[[0, -1]].tolist() == [-k, k]


@pytest.mark.parametrize(
    "x, index, bounds",
    [(0.3, 3, (0.0, 0.5)), (0.5, 3, (0.0, 0.5)), (7.0, 5, (1.0, math.inf)), (-1.0, 0, (-math.inf, -1.0))],
)
def test_quantize_level_one(x, index, bounds):
    cell = quantize(D, 1, x)
    assert cell == CellId(1, index)
    assert D.cell_bounds(1, cell.index) == bounds


def test_infinities_go_to_tails():
    assert quantize(D, 3, math.inf).index == D.n_cells(3) - 1
    assert quantize(D, 3, -math.inf).index == 0


def test_nan_rejected():
    with pytest.raises(ValueError):
        quantize(D, 1, math.nan)
    with pytest.raises(ValueError):
        quantize_window(D, 1, [0.1, math.nan])


def test_quantize_window():
    assert [c.index for c in quantize_window(D, 1, [0.3, 0.5, 7.0])] == [3, 3, 5]
    (cell,) = quantize_window(D, 2, [0.3])
    assert D.cell_bounds(2, cell.index) == (0.25, 0.5)
    with pytest.raises(ValueError):
        quantize_window(D, 1, [])


def test_level_must_be_positive():
    with pytest.raises(ValueError):
        quantize(D, 0, 0.1)


@given(finite, st.integers(1, 12))
def test_cell_contains_value(x, k):
    lo, hi = D.cell_bounds(k, quantize(D, k, x).index)
    assert lo < x <= hi


@given(finite, st.integers(1, 12))
def test_refinement(x, k):
    lo, hi = D.cell_bounds(k, quantize(D, k, x).index)
    lo2, hi2 = D.cell_bounds(k + 1, quantize(D, k + 1, x).index)
    assert lo <= lo2 and hi2 <= hi


@given(st.floats(-6, 6), st.floats(-6, 6), st.integers(1, 6))
def test_separation(x, y, k):
    x, y = min(x, y), max(x, y)
    if y - x > 2.0**-k and -k <= x and y <= k:
        assert quantize(D, k, x) != quantize(D, k, y)


@given(st.lists(finite, min_size=1, max_size=30), st.integers(1, 50))
def test_array_matches_breakpoint_search(xs, k):
    # bisect over the listed breakpoints is an independent route to the index
    k = min(k, 12)
    expected = np.searchsorted(D.breakpoints(k), xs, side="left")
    assert D.quantize_array(k, xs).tolist() == expected.tolist()


@pytest.mark.parametrize("k", [49, 50, 51, 64, 300])
@given(x=st.floats(-8, 8))
def test_high_levels_exact(k, x):
    # cell (lo, hi] checked in exact rationals, across the float/int switch
    i = quantize(D, k, x).index
    lo = Fraction(-k) + Fraction(i - 1, 2**k)
    hi = Fraction(-k) + Fraction(i, 2**k)
    if 0 < i < D.n_cells(k) - 1:
        assert lo < Fraction(x) <= hi
    elif i == 0:
        assert Fraction(x) <= -k
    else:
        assert Fraction(x) > k


def test_codes_follow_cells_at_high_level():
    xs = np.array([0.1, 0.1 + 2.0**-60, 0.1, -3.0, 1e9])
    codes = D.codes(70, xs)
    idx = D.quantize_array(70, xs)
    for i in range(xs.size):
        for j in range(xs.size):
            assert (codes[i] == codes[j]) == (idx[i] == idx[j])


def test_alphabet_identity():
    A = alphabet_scheme(3)
    for k in (1, 2, 17):
        assert [c.index for c in quantize_window(A, k, [0, 1, 2, 1])] == [0, 1, 2, 1]
    with pytest.raises(ValueError):
        quantize(A, 1, 3)
    with pytest.raises(ValueError):
        quantize(A, 1, 0.5)


def test_parse_scheme():
    assert parse_scheme("dyadic") == D
    assert parse_scheme("alphabet:4") == alphabet_scheme(4)
    assert str(parse_scheme("alphabet:4")) == "alphabet:4"
    for bad in ("alphabet:x", "haar", "alphabet:0"):
        with pytest.raises(ValueError):
            parse_scheme(bad)
