import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_minimum, weiszfeld
from uconvex.barycenters import (
    barycenter_median,
    barycenter_orlicz,
    barycenter_p,
    circumcenter,
    fw_objective,
    jensen_contraction_check,
    support_collinear,
    variance,
    variance_growth_check,
)
from uconvex.means import power_function, parse_orlicz
from uconvex.spaces import Euclidean, EuclideanCone, LpSpace, ProductSpace
from uconvex.transport import DiscreteMeasure, wasserstein_inf, wasserstein_p

R1, R2 = Euclidean(1), Euclidean(2)
CONE = EuclideanCone(Euclidean(2))


def _measure(rng, s, k, radius=1.0):
    w = rng.random(k) + 0.1
    return DiscreteMeasure(s.sample(rng, k, radius=radius), w / w.sum())


def test_variance_examples():
    mu = DiscreteMeasure([[0.0], [2.0]])
    assert variance(R1, mu, [1.0], 2) == 1.0
    x, y = np.array([1.0, 2.0]), np.array([4.0, 6.0])
    assert variance(R2, DiscreteMeasure.dirac(x), y, 3) == pytest.approx(125.0)
    pts = DiscreteMeasure([[0.0], [1.0], [4.0]])
    assert variance(R1, pts, [1.0], 1) == pytest.approx((1 + 0 + 3) / 3)


def test_variance_equals_transport_to_dirac():
    rng = np.random.default_rng(1)
    mu = _measure(rng, CONE, 5)
    y = CONE.sample(rng, 1)[0]
    for p in (1, 2, 3):
        w = wasserstein_p(CONE, mu, DiscreteMeasure.dirac(y), p)[0]
        assert variance(CONE, mu, y, p) == pytest.approx(w**p, rel=1e-12)


def test_fw_objective_properties():
    rng = np.random.default_rng(2)
    mu = _measure(rng, R2, 4)
    w1, w2 = np.array([0.3, 0.1]), np.array([-1.0, 2.0])
    assert fw_objective(R2, mu, w1, w1, 2) == 0.0
    ys = rng.normal(size=(20, 2))
    shift = [fw_objective(R2, mu, y, w1, 2) - fw_objective(R2, mu, y, w2, 2) for y in ys]
    np.testing.assert_allclose(shift, shift[0], atol=1e-12)
    diff = [fw_objective(R2, mu, y, w1, 1.5) - variance(R2, mu, y, 1.5) for y in ys]
    np.testing.assert_allclose(diff, diff[0], atol=1e-12)


def test_fw_and_variance_share_grid_argmin():
    rng = np.random.default_rng(3)
    mu = _measure(rng, R2, 5)
    ref = np.array([5.0, -3.0])
    lo, hi = mu.points.min(0), mu.points.max(0)
    _, a = grid_minimum(lambda Y: np.array([variance(R2, mu, y, 2) for y in Y]), lo, hi, n=60)
    _, b = grid_minimum(lambda Y: np.array([fw_objective(R2, mu, y, ref, 2) for y in Y]), lo, hi, n=60)
    np.testing.assert_array_equal(a, b)


def test_mean_of_triangle():
    mu = DiscreteMeasure([[0, 0], [2, 0], [0, 2]])
    res = barycenter_p(R2, mu, 2)
    np.testing.assert_allclose(res.point, [2 / 3, 2 / 3], atol=1e-6)
    assert res.converged and res.label == "global minimum"
    assert res.value == pytest.approx(variance(R2, mu, res.point, 2), abs=1e-9)


def test_dirac_barycenters():
    x = np.array([0.4, -0.7])
    mu = DiscreteMeasure.dirac(x)
    for res in (barycenter_p(R2, mu, 3), barycenter_median(R2, mu), barycenter_orlicz(R2, mu, power_function(2)), circumcenter(R2, [x])):
        np.testing.assert_array_equal(res.point, x)
        assert res.value == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_weighted_mean(seed):
    rng = np.random.default_rng(seed)
    mu = _measure(rng, Euclidean(3), int(rng.integers(2, 7)))
    res = barycenter_p(Euclidean(3), mu, 2)
    np.testing.assert_allclose(res.point, mu.weights @ mu.points, atol=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("seed", range(3))
def test_grid_oracle(p, seed):
    rng = np.random.default_rng(10 + seed)
    mu = _measure(rng, R2, 4)
    res = barycenter_p(R2, mu, p)
    lo, hi = mu.points.min(0), mu.points.max(0)
    f = lambda Y: (mu.weights[None, :] * np.linalg.norm(Y[:, None, :] - mu.points[None], axis=2) ** p).sum(1)
    g, _ = grid_minimum(f, lo, hi, n=400)
    assert res.value <= g + 1e-12
    assert g - res.value <= 1e-3


def test_history_is_nonincreasing():
    rng = np.random.default_rng(4)
    for s in (R2, CONE):
        res = barycenter_p(s, _measure(rng, s, 6), 1.5)
        h = np.array(res.history)
        assert np.all(np.diff(h) <= 0)


@pytest.mark.parametrize("s", [R2, CONE], ids=str)
def test_restarts_agree(s):
    rng = np.random.default_rng(5)
    mu = _measure(rng, s, 5)
    res = barycenter_p(s, mu, 2.5, restarts=3, seed=9)
    assert res.details["restart_spread"] <= 1e-6
    single = barycenter_p(s, mu, 2.5)
    assert s.distance(res.point, single.point) <= 1e-6


def test_product_identity():
    s = ProductSpace([Euclidean(2), CONE], p=2.0)
    rng = np.random.default_rng(6)
    mu = _measure(rng, s, 5)
    joint = barycenter_p(s, mu, 2)
    for i, factor in enumerate(s.factors):
        part = barycenter_p(factor, mu.marginal(s, i), 2)
        assert factor.distance(s.component(joint.point, i), part.point) <= 1e-6


def test_median_on_line_is_not_unique():
    res = barycenter_median(R1, DiscreteMeasure([[0.0], [0.0], [1.0]]))
    assert res.point[0] == pytest.approx(0.0, abs=1e-9)
    assert res.unique is False


@pytest.mark.parametrize("seed", range(4))
def test_median_matches_weiszfeld(seed):
    rng = np.random.default_rng(20 + seed)
    mu = _measure(rng, R2, 3)
    res = barycenter_median(R2, mu)
    np.testing.assert_allclose(res.point, weiszfeld(mu.points, mu.weights), atol=1e-6)
    assert res.unique is True


def test_collinearity_detection():
    assert support_collinear(R2, [[0, 0], [1, 1], [3, 3]])
    assert not support_collinear(R2, [[0, 0], [1, 0], [0, 1]])
    a = CONE.point([2.0, 0.0], 1.0)
    b = CONE.point([-2.0, 0.0], 2.0)
    assert support_collinear(CONE, [a, b, CONE.origin()])


def test_orlicz_examples():
    res = barycenter_orlicz(R1, DiscreteMeasure([[0.0], [1.0]]), power_function(2))
    assert res.point[0] == pytest.approx(0.5, abs=1e-9)
    assert res.value == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_orlicz_power_matches_p_barycenter(p):
    rng = np.random.default_rng(30)
    mu = _measure(rng, R2, 5)
    a = barycenter_orlicz(R2, mu, power_function(p))
    b = barycenter_p(R2, mu, p)
    assert R2.distance(a.point, b.point) <= 1e-6
    assert a.value == pytest.approx(b.value ** (1 / p), abs=1e-9)


def test_orlicz_exponential_family_runs():
    rng = np.random.default_rng(31)
    mu = _measure(rng, CONE, 4)
    res = barycenter_orlicz(CONE, mu, parse_orlicz("exp-minus-one"))
    assert res.converged and res.value > 0


def test_circumcenter_examples():
    r = circumcenter(R1, [[-1.0], [1.0]])
    assert r.point[0] == pytest.approx(0.0, abs=1e-9) and r.value == pytest.approx(1.0)
    r = circumcenter(R2, [[0, 0], [2, 0]])
    np.testing.assert_allclose(r.point, [1, 0], atol=1e-9)
    assert r.value == pytest.approx(1.0, abs=1e-9)


def test_circumcenter_of_orthonormal_set():
    n = 8
    r = circumcenter(Euclidean(n), np.eye(n))
    np.testing.assert_allclose(r.point, np.full(n, 1 / n), atol=1e-7)
    assert r.value == pytest.approx(math.sqrt(1 - 1 / n), abs=1e-9)


@pytest.mark.parametrize("s", [R2, CONE, LpSpace(2, 3.0)], ids=str)
def test_circumradius_is_bottleneck_distance(s):
    rng = np.random.default_rng(40)
    pts = s.sample(rng, 6)
    r = circumcenter(s, pts)
    w = wasserstein_inf(s, DiscreteMeasure(pts), DiscreteMeasure.dirac(r.point))
    assert r.value == pytest.approx(w, abs=1e-12)


def test_jensen_examples():
    rng = np.random.default_rng(50)
    mu = _measure(rng, R2, 4)
    assert jensen_contraction_check(R2, mu, mu, p=1).passed
    nu = mu.translated([0.3, -0.4])
    rep = jensen_contraction_check(R2, mu, nu, p=2)
    assert rep.passed and rep.worst == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(ValueError):
        jensen_contraction_check(R2, mu, None)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_jensen_random_pairs(p):
    rep = jensen_contraction_check(R2, p=p, n_instances=30, seed=1)
    assert rep.passed and rep.samples == 30


def test_variance_growth_is_quadratic_in_euclidean_space():
    rng = np.random.default_rng(60)
    rep = variance_growth_check(R2, _measure(rng, R2, 5), p=2, n_samples=500)
    assert rep.passed
    assert rep.details["q"] == pytest.approx(2.0, abs=1e-6)
    assert rep.details["c"] == pytest.approx(2.0, rel=1e-6)


@settings(max_examples=25)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6))
def test_one_dimensional_mean(xs):
    mu = DiscreteMeasure(np.array(xs)[:, None])
    res = barycenter_p(R1, mu, 2)
    assert res.point[0] == pytest.approx(np.mean(xs), abs=1e-6)


def test_bad_exponent_rejected():
    with pytest.raises(ValueError):
        barycenter_p(R2, DiscreteMeasure([[0, 0], [1, 1]]), 1.0)
