import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import bisection_orlicz
from uconvex.means import (
    EXP_MINUS_ONE,
    INF,
    as_exponent,
    l_mean,
    orlicz_mean,
    orlicz_norm,
    p_mean,
    parse_orlicz,
    power_function,
    tabulated_function,
)

nonneg = st.floats(0, 1e3, allow_nan=False)
expo = st.floats(1, 40)


def test_p_mean_examples():
    assert p_mean(INF, 3, 4) == 4
    assert p_mean(2, 2.5, 2.5) == 2.5
    assert math.isclose(p_mean(2, 3, 4), math.sqrt(12.5), rel_tol=1e-15)
    assert math.isclose(p_mean(2, 3, 4), 3.5355339, abs_tol=1e-7)


def test_exponent_parsing():
    assert as_exponent("inf") is INF and as_exponent(math.inf) is INF and as_exponent(INF) is INF
    assert as_exponent("2") == 2.0
    with pytest.raises(ValueError):
        as_exponent(0.5)
    with pytest.raises(ValueError):
        p_mean(0.9, 1, 2)


@given(nonneg, nonneg, expo, expo)
def test_p_mean_monotone_in_p(a, b, p, q):
    lo, hi = sorted((p, q))
    assert p_mean(lo, a, b) <= p_mean(hi, a, b) * (1 + 1e-12) + 1e-300
    assert p_mean(hi, a, b) <= p_mean(INF, a, b) * (1 + 1e-12)


@given(nonneg, nonneg, expo)
def test_p_mean_bounds_symmetry_homogeneity(a, b, p):
    m = p_mean(p, a, b)
    assert 0.5 * (a + b) * (1 - 1e-12) <= m <= max(a, b) * (1 + 1e-12)
    assert m == p_mean(p, b, a)
    assert math.isclose(p_mean(p, 3 * a, 3 * b), 3 * m, rel_tol=1e-12, abs_tol=1e-300)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_p_mean_large_p_close_to_max(a, b):
    assume(a != b)
    assert abs(p_mean(64, a, b) - max(a, b)) <= 0.02 * max(a, b)


def test_p_mean_vectorised():
    a = np.array([1.0, 2.0, 0.0])
    b = np.array([3.0, 2.0, 0.0])
    np.testing.assert_allclose(p_mean(2, a, b), [math.sqrt(5), 2.0, 0.0])


def test_l_mean_examples():
    assert math.isclose(l_mean(power_function(2), 3, 4), p_mean(2, 3, 4), rel_tol=1e-12)
    assert l_mean(EXP_MINUS_ONE, 1.3, 1.3) == 1.3
    assert math.isclose(l_mean(power_function(3), 1, 2), 4.5 ** (1 / 3), rel_tol=1e-12)
    assert math.isclose(l_mean(power_function(3), 1, 2), 1.650964, abs_tol=1e-6)
    # zero argument handled through L(0) := 0
    assert math.isclose(l_mean(power_function(2), 0, 2), math.sqrt(2), rel_tol=1e-12)


@given(nonneg, nonneg, st.floats(1, 8))
def test_l_mean_matches_power_mean(a, b, p):
    assert math.isclose(l_mean(power_function(p), a, b), p_mean(p, a, b), rel_tol=1e-9, abs_tol=1e-12)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(1, 6))
def test_orlicz_mean_against_bisection_oracle(a, b, p):
    assume(max(a, b) > 1e-6)
    L = power_function(p)
    t = orlicz_mean(L, a, b)
    assert math.isclose(t, p_mean(p, a, b), rel_tol=1e-9)
    assert math.isclose(t, bisection_orlicz(L, a, b), rel_tol=1e-9)
    assert abs(0.5 * L(a / t) + 0.5 * L(b / t) - 1.0) <= 1e-9


@given(st.floats(1e-3, 20), st.floats(1e-3, 20))
def test_orlicz_mean_exp_family(a, b):
    t = orlicz_mean(EXP_MINUS_ONE, a, b)
    assert math.isclose(t, bisection_orlicz(EXP_MINUS_ONE, a, b), rel_tol=1e-9)
    assert abs(0.5 * EXP_MINUS_ONE(a / t) + 0.5 * EXP_MINUS_ONE(b / t) - 1.0) <= 1e-9


def test_orlicz_mean_degenerate():
    assert orlicz_mean(EXP_MINUS_ONE, 0, 0) == 0.0
    assert math.isclose(orlicz_mean(EXP_MINUS_ONE, 2.0, 2.0), 2.0, rel_tol=1e-11)
    with pytest.raises(ValueError):
        orlicz_mean(EXP_MINUS_ONE, -1, 1)


def test_orlicz_norm_reduces_to_mean():
    L = power_function(3)
    assert math.isclose(orlicz_norm(L, [1.0, 2.0], [0.5, 0.5]), orlicz_mean(L, 1.0, 2.0), rel_tol=1e-12)
    assert math.isclose(orlicz_norm(L, [1.0, 2.0, 4.0], [0.2, 0.3, 0.5]), (0.2 + 0.3 * 8 + 0.5 * 64) ** (1 / 3), rel_tol=1e-10)


def test_orlicz_function_properties():
    for L in (power_function(1.0), power_function(2.5), EXP_MINUS_ONE):
        assert L.check() == []
        assert L(0.0) == 0.0 and math.isclose(L(1.0), 1.0, rel_tol=1e-15)
        for v in (0.1, 1.0, 7.0):
            assert math.isclose(L(L.inv(v)), v, rel_tol=1e-10)
    assert math.isclose(power_function(2).scaled(2.0)(4.0), 4.0)
    with pytest.raises(ValueError):
        power_function(0.5)


def test_tabulated_function():
    L = tabulated_function([0.5, 1.0, 2.0], [0.2, 1.0, 3.0])
    assert L(1.0) == 1.0 and L(0.25) == pytest.approx(0.1)
    assert math.isclose(L(L.inv(2.0)), 2.0, rel_tol=1e-10)
    with pytest.raises(ValueError):
        tabulated_function([0.5, 1.0, 2.0], [0.8, 1.0, 1.1])  # concave: fails the secant test


def test_parse_orlicz():
    assert parse_orlicz("pow:2").descriptor == "pow:2"
    assert parse_orlicz("exp-minus-one") is EXP_MINUS_ONE
    with pytest.raises(ValueError):
        parse_orlicz("log")
