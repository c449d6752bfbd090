"""Convex hull approximations, distance to sets and projections onto geodesic segments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .reports import chunk_rng
from .spaces import GeodesicError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class HullApprox:
    """Finite point cloud standing in for the iterated hull ``G_depth`` of ``generators``.

    ``levels[k]`` is the number of cloud rows that belong to ``G_k``, so the
    cloud prefix ``points[:levels[k]]`` is the sampled stage ``k``.
    """

    generators: np.ndarray
    depth: int
    points: np.ndarray
    levels: list
    skipped: int = 0

    def __len__(self):
        return self.points.shape[0]

    def stage(self, k):
        return self.points[: self.levels[k]]

    def to_json(self, space):
        return [space.to_json(p) for p in self.points]


def build_hull(s, generators, depth, per_pair_samples=4, seed=0, pairs_per_level=256):
    """Sample the hull iteration ``G_0 = A``, ``G_k = union of geodesics between points of G_{k-1}``.

    Each level draws ``pairs_per_level`` random pairs of distinct cloud
    points and ``per_pair_samples`` geodesic points per pair: the midpoint
    and the rest at uniform ``t``.  Pairs whose geodesic is unsupported are
    skipped and counted.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    gens = s.validate_many(generators)
    if gens.shape[0] == 0:
        raise ValueError("need at least one generator")
    cloud = gens.copy()
    levels = [cloud.shape[0]]
    skipped = 0
    for level in range(1, depth + 1):
        n = cloud.shape[0]
        if n < 2:
            levels.append(n)
            continue
        rng = chunk_rng(seed, level)
        i = rng.integers(0, n, size=pairs_per_level)
        j = (i + rng.integers(1, n, size=pairs_per_level)) % n
        ok = s.geodesic_supported(cloud[i], cloud[j])
        skipped += int(np.count_nonzero(~ok))
        i, j = i[ok], j[ok]
        a = np.repeat(cloud[i], per_pair_samples, axis=0)
        b = np.repeat(cloud[j], per_pair_samples, axis=0)
        t = rng.random(a.shape[0])
        t[::per_pair_samples] = 0.5
        if a.shape[0]:
            cloud = np.vstack([cloud, s.batch_geodesic(np.ascontiguousarray(a), np.ascontiguousarray(b), t)])
        levels.append(cloud.shape[0])
    return HullApprox(generators=gens, depth=depth, points=cloud, levels=levels, skipped=skipped)


def _cloud_points(cloud):
    return cloud.points if isinstance(cloud, HullApprox) else np.asarray(cloud, dtype=float)


def dist_to_set(s, q, cloud):
    """``(min distance, argmin point)`` from ``q`` to a cloud; ties go to the lowest index."""
    pts = _cloud_points(cloud)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    d = s.distances_to(s.validate(q), pts)
    k = int(np.argmin(d))
    return float(d[k]), pts[k].copy()


@dataclass
class SegmentProjection:
    point: np.ndarray
    t: float
    distance: float
    fallback: bool


def _golden(f, lo, hi, tol, max_iter=200):
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _newton_polish(f, t, ft, steps=3, h=1e-4):
    """Newton steps on ``f^2`` with central differences.

    Value comparisons alone pin a smooth minimiser only to about
    ``sqrt(machine eps)``; the squared profile is exactly quadratic in flat
    spaces, so this recovers full precision there.
    """
    for _ in range(steps):
        # stencil centre, pushed inside [h, 1 - h] when t sits near an end
        c = min(max(t, h), 1.0 - h)
        g0 = ft * ft if c == t else f(c) ** 2
        gl, gh = f(c - h) ** 2, f(c + h) ** 2
        curv = (gh - 2.0 * g0 + gl) / (h * h)
        if not curv > 0:
            break
        slope = (gh - gl) / (2.0 * h)
        t_new = min(max(c - slope / curv, 0.0), 1.0)
        f_new = f(t_new)
        if f_new > ft + 1e-15 * (1.0 + ft):
            break
        if abs(t_new - t) < 1e-15:
            t, ft = t_new, f_new
            break
        t, ft = t_new, f_new
    return t, ft


def segment_projection(s, q, a, b, tol=1e-10):
    """Minimise ``t -> d(q, gamma(t))`` over the geodesic ``[a, b]``.

    Golden-section search is exact for profiles that are unimodal (true in
    every p-convex space).  The result is compared against a coarse scan;
    if the scan finds a lower value the profile is treated as multimodal and
    the answer comes from a fine grid plus local refinement
    (``fallback=True``).
    """
    q = s.validate(q)
    a = s.validate(a)
    b = s.validate(b)
    if not s.geodesic_supported(a[None, :], b[None, :])[0]:
        raise GeodesicError(f"{s}: segment through the apex is not supported")
    length = float(s.batch_distance(a[None, :], b[None, :])[0])

    def point(t):
        if t <= 0.0:
            return a
        if t >= 1.0:
            return b
        return s.batch_geodesic(a[None, :], b[None, :], t)[0]

    def f(t):
        return float(s.batch_distance(q[None, :], point(t)[None, :])[0])

    if length == 0.0:
        return SegmentProjection(a.copy(), 0.0, f(0.0), False)
    width = tol * (1.0 + length)
    t_star, f_star = _golden(f, 0.0, 1.0, width)
    for t_end in (0.0, 1.0):
        f_end = f(t_end)
        if f_end <= f_star:
            t_star, f_star = t_end, f_end

    t_star, f_star = _newton_polish(f, t_star, f_star)

    fallback = False
    grid = np.linspace(0.0, 1.0, 17)
    scan = s.distances_to(q, s.batch_geodesic(np.repeat(a[None, :], grid.size, 0), np.repeat(b[None, :], grid.size, 0), grid))
    if scan.min() < f_star - 1e-12 * (1.0 + f_star):
        fallback = True
        fine = np.linspace(0.0, 1.0, 1001)
        vals = np.array([f(t) for t in fine])
        k = int(np.argmin(vals))
        lo, hi = fine[max(k - 1, 0)], fine[min(k + 1, fine.size - 1)]
        t_star, f_star = _golden(f, lo, hi, width)
        if vals[k] < f_star:
            t_star, f_star = float(fine[k]), float(vals[k])
    return SegmentProjection(point(t_star).copy(), float(t_star), float(f_star), fallback)


def project_to_segment(s, q, a, b, tol=1e-10):
    """Nearest point to ``q`` on the geodesic segment ``[a, b]``."""
    return segment_projection(s, q, a, b, tol).point


def hull_distance(s, q, hull, max_rounds=200, tol=1e-12):
    """Distance from ``q`` to the convex hull of ``hull.generators``, refined beyond the cloud.

    Starting from the nearest cloud point, repeatedly projects ``q`` onto
    segments joining the current best point to each generator and keeps any
    improvement.  Every accepted point stays in the hull, so the result is an
    upper bound on the true distance that decreases monotonically.
    """
    q = s.validate(q)
    best_d, best = dist_to_set(s, q, hull)
    gens = hull.generators
    for _ in range(max_rounds):
        improved = False
        for g in gens:
            if not s.geodesic_supported(best[None, :], g[None, :])[0]:
                continue
            proj = segment_projection(s, q, best, g, tol=1e-12)
            if proj.distance < best_d - tol:
                best_d, best = proj.distance, proj.point
                improved = True
        if not improved:
            break
    return best_d, best
