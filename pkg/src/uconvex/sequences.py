"""Finite-window experiments on sequences: asymptotic centers, weak limits, Opial, limit sets.

Every ``limsup`` / ``liminf`` is replaced by a max / min over a tail window
``n >= tail_start``; the window is part of each report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barycenters import barycenter_p, circumcenter, variance
from .reports import CheckReport, chunk_rng, map_ordered
from .sets import build_hull, dist_to_set, hull_distance, segment_projection
from .spaces import Euclidean, EuclideanCone, cone_ray_projection
from .transport import DiscreteMeasure

GENERATORS = ("orthonormal", "cone-orthonormal", "explicit", "constant", "alternating", "geometric")


@dataclass
class SequenceSpec:
    """A finite sequence ``x_1, ..., x_length`` described by a generator.

    ``orthonormal`` (param ``dim``) gives ``e_n`` in ``R^dim``;
    ``cone-orthonormal`` gives ``(e_n, 1)`` in the cone over ``R^dim``;
    ``explicit`` takes ``points``; ``constant`` repeats ``point``;
    ``alternating`` is ``(-1)^n point``; ``geometric`` is
    ``limit + ratio^n * step``.
    """

    generator: str
    length: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown sequence generator {self.generator!r}")
        if self.generator == "explicit":
            self.length = len(self.params["points"])
        if self.length < 1:
            raise ValueError("sequence length must be >= 1")
        if self.generator in ("orthonormal", "cone-orthonormal") and self.length > int(self.params["dim"]):
            raise ValueError("an orthonormal sequence cannot be longer than the dimension")

    def default_space(self):
        g = self.generator
        if g == "orthonormal":
            return Euclidean(int(self.params["dim"]))
        if g == "cone-orthonormal":
            return EuclideanCone(Euclidean(int(self.params["dim"])))
        if g == "explicit":
            return Euclidean(len(self.params["points"][0]))
        key = "limit" if g == "geometric" else "point"
        return Euclidean(len(self.params[key]))

    def points(self, s=None):
        s = self.default_space() if s is None else s
        g, n = self.generator, self.length
        if g == "orthonormal":
            pts = np.eye(int(self.params["dim"]))[:n]
        elif g == "cone-orthonormal":
            dim = int(self.params["dim"])
            pts = np.column_stack([np.eye(dim)[:n], np.ones(n)])
        elif g == "explicit":
            pts = np.array([s.from_json(p) for p in self.params["points"]])
        elif g == "constant":
            pts = np.repeat(np.asarray(self.params["point"], dtype=float)[None, :], n, axis=0)
        elif g == "alternating":
            sign = np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)
            pts = sign[:, None] * np.asarray(self.params["point"], dtype=float)[None, :]
        else:
            limit = np.asarray(self.params["limit"], dtype=float)
            step = np.asarray(self.params.get("step", np.ones_like(limit)), dtype=float)
            ratio = float(self.params.get("ratio", 0.5))
            pts = limit[None, :] + (ratio ** np.arange(1, n + 1))[:, None] * step[None, :]
        return s.validate_many(pts)

    def to_dict(self):
        return {"generator": self.generator, "length": self.length, "params": self.params}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["generator"], int(obj.get("length", 0) or 0), dict(obj.get("params", {})))


def _tail(seq, s, tail_start):
    pts = seq.points(s)
    if tail_start is None:
        tail_start = 0
    if not 0 <= tail_start < pts.shape[0]:
        raise ValueError("tail_start must index into the sequence")
    return pts, int(tail_start)


@dataclass
class AsymCenterResult:
    center: np.ndarray
    omega: float
    tail_start: int
    converged: bool = True

    def to_dict(self, space=None):
        c = space.to_json(self.center) if space is not None else [float(v) for v in self.center]
        return {"center": c, "omega": self.omega, "tail_start": self.tail_start, "converged": self.converged}


def omega(s, x, pts):
    """Finite-tail ``omega(x, (x_n)) = max_n d(x, x_n)``."""
    return float(s.distances_to(s.validate(x), pts).max())


def asymptotic_center(s, seq, tail_start=0, tol=1e-12, start=None):
    """Minimiser of ``x -> max_{n >= tail_start} d(x, x_n)`` (minimax center of the tail)."""
    pts, k = _tail(seq, s, tail_start)
    res = circumcenter(s, pts[k:], tol=tol, start=start)
    return AsymCenterResult(res.point, omega(s, res.point, pts[k:]), k, res.converged)


def _subsequences(n_tail, k, seed):
    """``k`` random increasing index sets, each keeping half of ``range(n_tail)`` (at least one)."""
    keep = max(1, n_tail // 2)
    out = []
    for i in range(k):
        rng = chunk_rng(seed, 23, i)
        out.append(np.sort(rng.choice(n_tail, size=keep, replace=False)))
    return out


def weak_seq_limit_test(s, seq, candidate, probe_points, tol=1e-3, tail_start=None, k=16, seed=0):
    """Projection test for weak convergence ``x_n -> candidate``.

    For every probe ``y`` the nearest points ``P_[candidate, y] x_n`` over the
    tail must lie within ``tol`` of the candidate.  Asymptotic centers of
    ``k`` random tail subsequences are computed as well and reported (their
    distance to the candidate is a diagnostic: for short orthonormal
    sequences it is of order ``1/sqrt(length)``).
    """
    pts = seq.points(s)
    tail_start = pts.shape[0] // 2 if tail_start is None else int(tail_start)
    tail = pts[tail_start:]
    if tail.shape[0] == 0:
        raise ValueError("empty tail")
    c = s.validate(candidate)
    probes = [s.validate(y) for y in probe_points]
    if not probes:
        raise ValueError("need at least one probe point")
    per_probe = []
    violations = 0
    worst = -math.inf
    for y in probes:
        if s.distance(c, y) == 0.0:
            per_probe.append({"probe": s.to_json(y), "skipped": "probe equals candidate"})
            continue
        if not s.geodesic_supported(c[None, :], y[None, :])[0]:
            per_probe.append({"probe": s.to_json(y), "skipped": "segment not supported"})
            continue
        gaps = np.array([s.distance(segment_projection(s, x, c, y).point, c) for x in tail])
        violations += int(np.count_nonzero(gaps > tol))
        worst = max(worst, float(gaps.max()))
        per_probe.append({"probe": s.to_json(y), "max_gap": float(gaps.max()), "last_gap": float(gaps[-1])})
    subs = []
    for idx in _subsequences(tail.shape[0], k, seed):
        res = circumcenter(s, tail[idx])
        subs.append({"distance_to_candidate": s.distance(res.point, c), "omega": res.value})
    return CheckReport(
        property="weak-sequential-limit",
        samples=tail.shape[0] * len(probes),
        violations=violations,
        worst=worst,
        tolerance=tol,
        witness={"candidate": s.to_json(c)},
        details={"tail_start": tail_start, "probes": per_probe, "subsequence_centers": subs},
    )


def opial_check(s, seq, weak_limit, competitors, tail_start=0):
    """Opial property on a tail window: ``min_n d(x, x_n) < min_n d(y, x_n)`` for each competitor ``y != x``."""
    pts, k = _tail(seq, s, tail_start)
    tail = pts[k:]
    x = s.validate(weak_limit)
    base = float(s.distances_to(x, tail).min())
    margins = []
    for y in competitors:
        y = s.validate(y)
        if s.distance(x, y) == 0.0:
            margins.append({"competitor": s.to_json(y), "skipped": True})
            continue
        other = float(s.distances_to(y, tail).min())
        margins.append({"competitor": s.to_json(y), "liminf": other, "margin": other - base})
    vals = [m["margin"] for m in margins if "margin" in m]
    bad = [v for v in vals if not v > 0]
    return CheckReport(
        property="opial",
        samples=len(vals),
        violations=len(bad),
        worst=-min(vals) if vals else -math.inf,
        tolerance=0.0,
        witness={"weak_limit": s.to_json(x)},
        details={"tail_start": k, "liminf_at_limit": base, "margins": margins, "min_margin": min(vals) if vals else None},
    )


def ray_shadow(space, pts):
    """Row-wise :func:`cone_ray_projection`; rows whose base angle exceeds ``pi / 2`` are dropped."""
    dirs = pts[:, :-1]
    angle = space.base.distances_to(space.base.origin(), np.ascontiguousarray(dirs))
    keep = angle <= math.pi / 2
    out = np.zeros((int(keep.sum()), space.dim))
    out[:, -1] = pts[keep, -1] * np.cos(angle[keep])
    return out


def coconvex_limit_probe(s, seq, candidates, hull_depth=6, tol=1e-3, k=16, seed=0, tail_start=0, shadow=None,
                         threads=1, pairs_per_level=256):
    """Membership of candidates in the closed convex hulls of random tail subsequences.

    For each of ``k`` subsequences (half the tail, random increasing
    indices) the hull is sampled to ``hull_depth`` levels and the distance
    from every candidate is refined with :func:`~uconvex.sets.hull_distance`.
    When ``shadow`` is given (a map from hull points to the weak limits of
    their index-shifted copies, e.g. :func:`ray_shadow` on a cone) a
    candidate is judged by its distance to the shadow of the hull instead;
    the direct distances are reported either way (refined against hull
    segments when they decide membership, nearest cloud point otherwise).
    """
    pts, k0 = _tail(seq, s, tail_start)
    tail = pts[k0:]
    cands = [s.validate(c) for c in candidates]
    subsets = _subsequences(tail.shape[0], k, seed)

    def probe(i):
        hull = build_hull(s, tail[subsets[i]], hull_depth, seed=int(seed) * 1000 + i, pairs_per_level=pairs_per_level)
        if shadow is None:
            return [hull_distance(s, c, hull)[0] for c in cands], None
        # diagnostic only: nearest cloud point, without segment refinement
        direct = [dist_to_set(s, c, hull)[0] for c in cands]
        image = shadow(s, hull.points)
        return direct, [dist_to_set(s, c, image)[0] for c in cands]

    rows = map_ordered(probe, range(len(subsets)), threads)
    direct = np.array([r[0] for r in rows])
    judged = direct if shadow is None else np.array([r[1] for r in rows])
    supported = [bool(np.all(judged[:, j] <= tol)) for j in range(len(cands))]
    per_cand = [
        {
            "candidate": s.to_json(c),
            "supported": supported[j],
            "max_distance": float(judged[:, j].max()),
            "max_direct_distance": float(direct[:, j].max()),
        }
        for j, c in enumerate(cands)
    ]
    return CheckReport(
        property="coconvex-limit",
        samples=len(subsets) * len(cands),
        violations=int(np.count_nonzero(judged > tol)),
        worst=float(judged.max()),
        tolerance=tol,
        details={
            "hull_depth": hull_depth,
            "subsequences": len(subsets),
            "kept_per_subsequence": int(len(subsets[0])),
            "judged_by": "direct" if shadow is None else "shadow",
            "direct_refined": shadow is None,
            "candidates": per_cand,
            "supported": supported,
        },
    )


def cone_counterexample_demo(N=8, hull_depth=6, seed=0, threads=1):
    """Two distinct limit-set points of ``(e_n, 1)`` in the cone over ``R^N``.

    Returns ``(report, csv_rows)``.  CSV rows are ``(n, m, projection_radius)``:
    for ``n == m`` the ray projection of ``(e_n, 1)``, for ``n < m`` that of the
    midpoint of ``(e_n, 1)`` and ``(e_m, 1)``.
    """
    N = int(N)
    if N < 4:
        raise ValueError("the demo needs N >= 4")
    C = EuclideanCone(Euclidean(N))
    seq = SequenceSpec("cone-orthonormal", N, {"dim": N})
    pts = seq.points(C)
    rows = []
    proj_first = []
    for n in range(N):
        for m in range(n, N):
            q = pts[n] if n == m else C.midpoint(pts[n], pts[m])
            r = cone_ray_projection(C, q).radius
            rows.append((n + 1, m + 1, r))
            if n == m:
                proj_first.append(r)
    mid = C.midpoint(pts[0], pts[1])
    cos1 = math.cos(1.0)
    cossq = math.cos(math.sqrt(2.0) / 2.0) ** 2
    c1 = C.point(np.zeros(N), cos1)
    c2 = C.point(np.zeros(N), cossq)
    probe = coconvex_limit_probe(C, seq, [c1, c2], hull_depth=hull_depth, tol=1e-3, seed=seed, shadow=ray_shadow,
                                 threads=threads)
    probes = [C.point(np.zeros(N), 0.0), C.point(np.zeros(N), 2.0), pts[0]]
    weak1 = weak_seq_limit_test(C, seq, c1, probes, tol=1e-9, tail_start=1, k=4, seed=seed)
    weak2 = weak_seq_limit_test(C, seq, c2, probes, tol=1e-9, tail_start=1, k=4, seed=seed)
    report = {
        "N": N,
        "hull_depth": hull_depth,
        "cos1": cos1,
        "cossq": cossq,
        "margin": cossq - cos1,
        "inequality_holds": cos1 < cossq,
        "ray_projection_radii": proj_first,
        "midpoint": C.to_json(mid),
        "midpoint_radius": float(mid[-1]),
        "midpoint_projection_radius": cone_ray_projection(C, mid).radius,
        "supported": probe.details["supported"],
        "coconvex_probe": probe.to_dict(),
        "weak_limit": {"cos1": weak1.passed, "cossq": weak2.passed},
        "weak_limit_unique": bool(weak1.passed and not weak2.passed),
        "weak_limit_reports": [weak1.to_dict(), weak2.to_dict()],
    }
    return report, rows


def banach_saks_experiment(s, seq, p=2.0, prefix_lengths=(4, 16, 64), reference=None, tol=1e-9):
    """Distances ``d(b_p(mu_N), reference)`` for uniform measures on the first ``N`` points."""
    p = float(p)
    if not p > 1.0:
        raise ValueError("the Banach-Saks experiment needs p > 1")
    pts = seq.points(s)
    if reference is None:
        reference = asymptotic_center(s, seq).center
    ref = s.validate(reference)
    rows = []
    for N in prefix_lengths:
        N = int(N)
        if not 1 <= N <= pts.shape[0]:
            raise ValueError(f"prefix length {N} outside 1..{pts.shape[0]}")
        res = barycenter_p(s, DiscreteMeasure(pts[:N]), p)
        rows.append({"N": N, "distance": s.distance(res.point, ref), "converged": res.converged,
                     "barycenter": s.to_json(res.point)})
    dist = [r["distance"] for r in rows]
    ups = [b - a for a, b in zip(dist, dist[1:])]
    bad = [u for u in ups if u > tol]
    return CheckReport(
        property="banach-saks",
        p=p,
        samples=len(rows),
        violations=len(bad),
        worst=max(ups, default=-math.inf),
        tolerance=tol,
        witness={"reference": s.to_json(ref)},
        details={"rows": rows, "all_converged": all(r["converged"] for r in rows)},
    )


def dyadic_merge_probe(s, seq, p=2.0, levels=3, tol=1e-9):
    """Level-wise ``V_N = min_k V(mu_{I_k^N})`` over consecutive dyadic blocks of size ``2^N``."""
    pts = seq.points(s)
    levels = int(levels)
    if pts.shape[0] < 2**levels:
        raise ValueError("sequence shorter than 2^levels")
    table = []
    for N in range(1, levels + 1):
        size = 2**N
        blocks = []
        for start in range(0, pts.shape[0] - size + 1, size):
            mu = DiscreteMeasure(pts[start : start + size])
            b = barycenter_p(s, mu, p)
            blocks.append(variance(s, mu, b.point, p))
        table.append({"level": N, "block_size": size, "V": float(min(blocks)), "blocks": blocks})
    V = [row["V"] for row in table]
    drops = [a - b for a, b in zip(V, V[1:])]
    bad = [d for d in drops if d > tol]
    return CheckReport(
        property="dyadic-merge",
        p=float(p),
        samples=len(V),
        violations=len(bad),
        worst=max(drops, default=-math.inf),
        tolerance=tol,
        details={"V": V, "levels": table},
    )


__all__ = [
    "AsymCenterResult",
    "SequenceSpec",
    "asymptotic_center",
    "banach_saks_experiment",
    "coconvex_limit_probe",
    "cone_counterexample_demo",
    "dyadic_merge_probe",
    "omega",
    "opial_check",
    "ray_shadow",
    "weak_seq_limit_test",
]
