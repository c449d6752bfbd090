import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from uconvex.sets import (
    build_hull,
    dist_to_set,
    hull_distance,
    project_to_segment,
    segment_projection,
)
from uconvex.spaces import Euclidean, EuclideanCone, GeodesicError

R2 = Euclidean(2)
TRI = [[0, 0], [1, 0], [0, 1]]
coord = st.floats(-3, 3, allow_nan=False)


def test_depth_zero_keeps_generators():
    h = build_hull(R2, TRI, 0)
    np.testing.assert_array_equal(h.points, np.array(TRI, dtype=float))
    assert h.levels == [3]


def test_single_generator_never_grows():
    h = build_hull(R2, [[0.5, 0.5]], 5)
    assert len(h) == 1
    assert h.levels == [1] * 6


def test_hull_rejects_bad_input():
    with pytest.raises(ValueError):
        build_hull(R2, TRI, -1)
    with pytest.raises(ValueError):
        build_hull(R2, np.empty((0, 2)), 1)


def test_hull_is_deterministic_and_nested():
    a = build_hull(R2, TRI, 3, seed=7)
    b = build_hull(R2, TRI, 3, seed=7)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.levels == sorted(a.levels)
    np.testing.assert_array_equal(a.stage(0), np.array(TRI, dtype=float))


def test_hull_points_stay_in_triangle():
    pts = build_hull(R2, TRI, 4, seed=1).points
    assert np.all(pts >= -1e-12)
    assert np.all(pts.sum(axis=1) <= 1 + 1e-12)


def test_centroid_distance_shrinks_with_depth():
    c = np.array([1 / 3, 1 / 3])
    h = build_hull(R2, TRI, 7, seed=0)
    dists = [dist_to_set(R2, c, h.stage(k))[0] for k in range(8)]
    assert all(d1 <= d0 for d0, d1 in zip(dists, dists[1:]))
    assert dists[-1] < 0.05
    assert dists[-1] < dists[0] / 5


def test_hull_distance_refines_to_interior():
    h = build_hull(R2, TRI, 2, seed=0)
    d, p = hull_distance(R2, [1 / 3, 1 / 3], h)
    assert d < 1e-6
    d, p = hull_distance(R2, [1.0, 1.0], h)
    assert d == pytest.approx(math.sqrt(2) / 2, abs=1e-8)
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-8)


def test_dist_to_member_is_zero():
    cloud = np.array(TRI, dtype=float)
    d, p = dist_to_set(R2, cloud[1], cloud)
    assert d == 0.0
    np.testing.assert_array_equal(p, cloud[1])


def test_dist_to_dense_segment():
    cloud = np.column_stack([np.linspace(0, 1, 1001), np.zeros(1001)])
    d, p = dist_to_set(R2, [2, 0], cloud)
    assert d == pytest.approx(1.0)
    np.testing.assert_allclose(p, [1, 0])


def test_dist_ties_go_to_lowest_index():
    cloud = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    d, p = dist_to_set(R2, [0, 0], cloud)
    assert d == 1.0
    np.testing.assert_array_equal(p, cloud[0])


def test_empty_cloud_rejected():
    with pytest.raises(ValueError):
        dist_to_set(R2, [0, 0], np.empty((0, 2)))


def test_cone_distance_to_apex_is_radius():
    s = EuclideanCone(Euclidean(3))
    q = s.point([1, 0, 0], 1.0)
    d, p = dist_to_set(s, q, s.origin()[None, :])
    assert d == pytest.approx(1.0)
    np.testing.assert_array_equal(p, s.origin())


def test_projection_examples():
    np.testing.assert_allclose(project_to_segment(R2, [0, 1], [-1, 0], [1, 0]), [0, 0], atol=1e-12)
    np.testing.assert_allclose(project_to_segment(R2, [0.25, 0], [-1, 0], [1, 0]), [0.25, 0], atol=1e-12)
    np.testing.assert_allclose(project_to_segment(R2, [5, 3], [-1, 0], [1, 0]), [1, 0], atol=1e-12)


def test_cone_projection_onto_ray():
    s = EuclideanCone(Euclidean(4))
    q = s.point([1, 0, 0, 0], 1.0)
    p = project_to_segment(s, q, s.origin(), s.point([0, 0, 0, 0], 2.0))
    np.testing.assert_allclose(p[:-1], 0.0)
    assert p[-1] == pytest.approx(math.cos(1.0), abs=1e-9)


def test_apex_segment_is_unsupported():
    s = EuclideanCone(Euclidean(1))
    a = s.point([2.0], 1.0)
    b = s.point([-2.0], 1.0)
    with pytest.raises(GeodesicError):
        segment_projection(s, s.origin(), a, b)


def _closed_form(q, a, b):
    ab = b - a
    den = ab @ ab
    t = 0.0 if den == 0 else min(max((q - a) @ ab / den, 0.0), 1.0)
    return a + t * ab


@given(st.lists(coord, min_size=6, max_size=6))
@example([0.0, -1.0, 0.0, 1e-08, 1.0, 0.0])
def test_projection_matches_closed_form(v):
    q, a, b = (np.array(v[i : i + 2]) for i in (0, 2, 4))
    got = project_to_segment(R2, q, a, b)
    np.testing.assert_allclose(got, _closed_form(q, a, b), atol=1e-9)


@given(st.lists(coord, min_size=6, max_size=6))
def test_projection_is_nearest_sampled_point(v):
    q, a, b = (np.array(v[i : i + 2]) for i in (0, 2, 4))
    proj = segment_projection(R2, q, a, b)
    t = np.linspace(0, 1, 101)[:, None]
    samples = a + t * (b - a)
    assert proj.distance <= R2.distances_to(q, samples).min() + 1e-12


@given(st.lists(coord, min_size=6, max_size=6), st.floats(1e-3, 1e-1))
def test_projection_is_stable_under_tolerance_changes(v, tol_scale):
    # Chebyshev behavior: the nearest point does not depend on search settings
    q, a, b = (np.array(v[i : i + 2]) for i in (0, 2, 4))
    p1 = project_to_segment(R2, q, a, b, tol=1e-10)
    p2 = project_to_segment(R2, q, a, b, tol=1e-10 * (1 + tol_scale))
    assert np.linalg.norm(p1 - p2) <= 1e-8 * (1 + np.linalg.norm(b - a))
