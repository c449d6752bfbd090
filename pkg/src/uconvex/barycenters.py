"""p-barycenters, medians, circumcenters and Orlicz barycenters of discrete measures.

The solvers use only the metric, geodesics and a chart gradient.  Each run
starts at the support point with the smallest objective, alternates
geodesic sweeps (a line search along the segment towards the most promising
support point) with a quasi-Newton polish in chart coordinates, and keeps a
step only when it lowers the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .means import OrliczFunction
from .reports import CheckReport, chunk_rng, map_ordered
from .sets import _golden, segment_projection
from .transport import DiscreteMeasure, wasserstein_p

_SLOPE_STEP = 1e-7


@dataclass
class BarycenterResult:
    """Minimiser returned by the descent solvers.

    ``certified`` is true when the objective is known to be geodesically
    convex on the space, in which case the point is a global minimiser;
    otherwise ``label`` reads ``"local minimum"``.  ``history`` holds the
    objective after every accepted step and is nonincreasing.
    """

    point: np.ndarray
    value: float
    iterations: int
    converged: bool
    oracle_gap: float | None = None
    p: float | None = None
    certified: bool = False
    unique: bool | None = None
    history: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def label(self):
        return "global minimum" if self.certified else "local minimum"

    def to_dict(self, space=None):
        point = space.to_json(self.point) if space is not None else [float(v) for v in self.point]
        return {
            "point": point,
            "value": float(self.value),
            "iters": int(self.iterations),
            "converged": bool(self.converged),
            "oracle_gap": self.oracle_gap,
            "p": self.p,
            "label": self.label,
            "unique": self.unique,
            "details": self.details,
        }


# -- objectives -------------------------------------------------------------------


def _support(s, mu):
    return s.validate_many(mu.points), np.asarray(mu.weights, dtype=float)


def variance(s, mu, y, p):
    """``Var_{mu,p}(y) = sum_i w_i d(x_i, y)^p``."""
    p = float(p)
    if not 1.0 <= p < math.inf:
        raise ValueError("variance needs 1 <= p < inf")
    X, w = _support(s, mu)
    d = s.distances_to(s.validate(y), X)
    return float(np.dot(w, d**p))


def fw_objective(s, mu, y, w_ref, p):
    """``F_w(y) = sum_i w_i (d(x_i, y)^p - d(x_i, w_ref)^p)``; same minimisers as the variance."""
    X, w = _support(s, mu)
    dy = s.distances_to(s.validate(y), X)
    dw = s.distances_to(s.validate(w_ref), X)
    return float(np.dot(w, dy**p - dw**p))


def _variance_fg(s, X, w, p):
    def f(y):
        return float(np.dot(w, s.distances_to(y, X) ** p))

    def fg(y):
        d = s.distances_to(y, X)
        g = s.distance_grad(y, X)
        coef = w * p * d ** (p - 1.0) if p != 1.0 else w * (d > 0)
        return float(np.dot(w, d**p)), coef @ g

    return f, fg


def _orlicz_value(L, d, w):
    """``w_L(mu, delta_y)`` from the distance vector: bisection bracket then Newton polish."""
    hi = float(d.max()) if d.size else 0.0
    if hi == 0.0:
        return 0.0
    # bisection (monotone, safe) for a bracket ...
    lo_t, hi_t = 1e-300, 2.0 * hi
    while float(np.dot(w, L(d / hi_t))) > 1.0:
        hi_t *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo_t + hi_t)
        if float(np.dot(w, L(d / mid))) <= 1.0:
            hi_t = mid
        else:
            lo_t = mid
        if hi_t - lo_t < 1e-9 * hi:
            break
    # ... then Newton on phi(t) = sum w L(d/t) - 1, which is decreasing and convex in t
    t = hi_t
    for _ in range(6):
        r = d / t
        phi = float(np.dot(w, L(r))) - 1.0
        dphi = -float(np.dot(w, L.deriv(r) * r)) / t
        if dphi == 0.0:
            break
        step = phi / dphi
        t_new = t - step
        if not lo_t <= t_new <= hi_t * (1 + 1e-12):
            break
        t = t_new
        if abs(step) <= 1e-16 * t:
            break
    return t


def _orlicz_fg(s, X, w, L):
    def f(y):
        return _orlicz_value(L, s.distances_to(y, X), w)

    def fg(y):
        d = s.distances_to(y, X)
        t = _orlicz_value(L, d, w)
        if t == 0.0:
            return 0.0, np.zeros(s.dim)
        r = d / t
        lp = w * L.deriv(r)
        denom = float(np.dot(lp, r))
        g = s.distance_grad(y, X)
        return t, (lp @ g) / denom if denom > 0 else np.zeros(s.dim)

    return f, fg


# -- descent engine ---------------------------------------------------------------


def _geodesic_sweep(s, f, y, fy, X):
    """One line search along ``[y, x_i]`` for the support point with the steepest initial decrease."""
    d = s.distances_to(y, X)
    Y = np.repeat(y[None, :], X.shape[0], axis=0)
    ok = (d > 1e-14) & s.geodesic_supported(Y, X)
    if not np.any(ok):
        return y, fy, False
    idx = np.flatnonzero(ok)
    probes = s.batch_geodesic(np.ascontiguousarray(Y[idx]), np.ascontiguousarray(X[idx]), _SLOPE_STEP)
    slopes = np.array([(f(q) - fy) / (_SLOPE_STEP * d[i]) for q, i in zip(probes, idx)])
    k = int(np.argmin(slopes))
    if slopes[k] >= 0:
        return y, fy, False
    target = X[idx[k]]

    def along(t):
        return f(s.batch_geodesic(y[None, :], target[None, :], t)[0])

    t, ft = _golden(along, 0.0, 1.0, 1e-12)
    if ft < fy:
        return s.batch_geodesic(y[None, :], target[None, :], t)[0], ft, True
    return y, fy, False


def _quasi_newton(s, fg, y, max_iter):
    bounds = s.chart_bounds()
    use_bounds = any(b != (None, None) for b in bounds)

    def obj(z):
        return fg(s.retract(z))

    res = minimize(
        obj,
        y,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds if use_bounds else None,
        options={"maxiter": max_iter, "ftol": 0.0, "gtol": 1e-14, "maxcor": 30},
    )
    return s.retract(res.x), int(res.nit)


def _ties(a, b):
    return abs(a - b) <= 8.0 * np.spacing(max(abs(a), abs(b)))


def _gradient_polish(s, fg, y, fy, steps=10):
    """Steepest-descent steps whose line search only looks at the sign of the slope.

    Once objective values tie to rounding, value-based searches cannot move
    further; the directional derivative still can.  A step is kept when the
    value ties or drops and the gradient shrinks.
    """
    _, g = fg(y)
    for _ in range(steps):
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        u = -g / gn

        def slope(t):
            return float(fg(s.retract(y + t * u))[1] @ u)

        lo, s_lo = 0.0, -gn
        hi = 1e-8 * (1.0 + float(np.linalg.norm(y)))
        s_hi = slope(hi)
        for _ in range(60):
            if s_hi >= 0.0:
                break
            lo, s_lo, hi = hi, s_hi, 2.0 * hi
            s_hi = slope(hi)
        if s_hi < 0.0:
            break
        # Illinois variant of regula falsi on the slope
        side = 0
        for _ in range(40):
            t = hi - s_hi * (hi - lo) / (s_hi - s_lo) if s_hi != s_lo else 0.5 * (lo + hi)
            st = slope(t)
            if st == 0.0 or hi - lo <= 1e-15 * (1.0 + hi):
                break
            if st < 0.0:
                lo, s_lo = t, st
                if side == -1:
                    s_hi *= 0.5
                side = -1
            else:
                hi, s_hi = t, st
                if side == 1:
                    s_lo *= 0.5
                side = 1
        z = s.retract(y + t * u)
        fz, gz = fg(z)
        if not (fz < fy or _ties(fz, fy)) or np.linalg.norm(gz) >= gn:
            break
        y, fy, g = z, min(fz, fy), gz
    return y, fy


def _descend(s, f, fg, X, w, start, tol, max_iter, rounds=4, sweeps=25):
    y = s.validate(start)
    fy = f(y)
    history = [fy]
    iters = 0
    converged = False
    for _ in range(rounds):
        before = fy
        for _ in range(sweeps):
            y_new, f_new, moved = _geodesic_sweep(s, f, y, fy, X)
            iters += 1
            if not moved or fy - f_new <= tol * (1.0 + abs(fy)):
                if moved:
                    y, fy = y_new, f_new
                    history.append(fy)
                break
            y, fy = y_new, f_new
            history.append(fy)
        z, nit = _quasi_newton(s, fg, y, max_iter)
        iters += nit
        fz = f(z)
        # near the optimum values stop resolving position: values equal up to a few ulps
        # count as ties, and ties go to the smaller gradient
        if fz < fy or (_ties(fz, fy) and np.linalg.norm(fg(z)[1]) < np.linalg.norm(fg(y)[1])):
            y, fy = z, min(fz, fy)
            history.append(fy)
        if before - fy <= tol * (1.0 + abs(before)):
            converged = True
            break
    y, f_pol = _gradient_polish(s, fg, y, fy)
    if f_pol != fy:
        fy = f_pol
        history.append(fy)
    return y, fy, iters, converged, history


def _starts(s, X, f, restarts, seed):
    vals = np.array([f(x) for x in X])
    first = X[int(np.argmin(vals))]
    if restarts <= 0:
        return [first]
    spread = float(s.distances_to(first, X).max()) or 1.0
    rng = chunk_rng(seed, 41)
    return [first] + list(s.sample(rng, restarts, center=first, radius=spread))


def _run(s, X, w, f, fg, tol, max_iter, restarts, seed, threads):
    starts = _starts(s, X, f, restarts, seed)
    runs = map_ordered(lambda y0: _descend(s, f, fg, X, w, y0, tol, max_iter), starts, threads)
    best = min(range(len(runs)), key=lambda k: (runs[k][1], k))
    y, fy, iters, converged, history = runs[best]
    spread = max(float(s.distance(y, r[0])) for r in runs) if len(runs) > 1 else 0.0
    return y, fy, iters, converged, history, spread


def barycenter_p(s, mu, p=2.0, tol=1e-12, max_iter=2000, seed=0, restarts=0, threads=1):
    """Minimiser of ``y -> w_p(mu, delta_y)``, i.e. of ``Var_{mu,p}``, for ``p > 1``."""
    p = float(p)
    if not 1.0 < p < math.inf:
        raise ValueError("barycenter_p needs 1 < p < inf; use barycenter_median for p = 1")
    X, w = _support(s, mu)
    if X.shape[0] == 1:
        return BarycenterResult(X[0].copy(), 0.0, 0, True, p=p, certified=s.certified, unique=s.certified or None)
    f, fg = _variance_fg(s, X, w, p)
    y, _, iters, converged, history, spread = _run(s, X, w, f, fg, tol, max_iter, restarts, seed, threads)
    value = variance(s, mu, y, p)
    return BarycenterResult(
        point=y,
        value=value,
        iterations=iters,
        converged=converged,
        p=p,
        certified=s.certified,
        unique=True if s.certified else None,
        history=history,
        details={"restarts": restarts, "restart_spread": spread},
    )


def _on_segment(s, x, a, b, tol):
    return segment_projection(s, x, a, b).distance <= tol


def support_collinear(s, X, tol=1e-9):
    """Whether every row of ``X`` lies within ``tol`` of the geodesic through the two farthest points.

    In a cone the two farthest points may be joined only through the apex;
    the broken geodesic ``[a, apex] + [apex, b]`` is used then.
    """
    X = s.validate_many(X)
    if X.shape[0] <= 2:
        return True
    n = X.shape[0]
    D = np.array([s.distances_to(x, X) for x in X])
    i, j = divmod(int(np.argmax(D)), n)
    a, b = X[i], X[j]
    if D[i, j] == 0.0:
        return True
    if s.geodesic_supported(a[None, :], b[None, :])[0]:
        return all(_on_segment(s, x, a, b, tol) for x in X)
    apex = s.origin()
    return all(_on_segment(s, x, a, apex, tol) or _on_segment(s, x, apex, b, tol) for x in X)


def barycenter_median(s, mu, tol=1e-12, max_iter=2000, seed=0, restarts=0, threads=1, collinear_tol=1e-9):
    """1-barycenter (geometric median).  ``unique`` is false when the support lies on one geodesic."""
    X, w = _support(s, mu)
    collinear = support_collinear(s, X, collinear_tol)
    if X.shape[0] == 1:
        return BarycenterResult(X[0].copy(), 0.0, 0, True, p=1.0, certified=s.certified, unique=True)
    f, fg = _variance_fg(s, X, w, 1.0)
    y, _, iters, converged, history, spread = _run(s, X, w, f, fg, tol, max_iter, restarts, seed, threads)
    value = variance(s, mu, y, 1.0)
    return BarycenterResult(
        point=y,
        value=value,
        iterations=iters,
        converged=converged,
        p=1.0,
        certified=s.certified,
        unique=(not collinear) if s.certified else None,
        history=history,
        details={"collinear": collinear, "restart_spread": spread},
    )


def barycenter_orlicz(s, mu, L: OrliczFunction, tol=1e-12, max_iter=2000, seed=0, restarts=0, threads=1):
    """Minimiser of ``y -> w_L(mu, delta_y) = inf{t > 0 : sum_i w_i L(d(x_i, y) / t) <= 1}``."""
    X, w = _support(s, mu)
    if X.shape[0] == 1:
        return BarycenterResult(X[0].copy(), 0.0, 0, True, certified=s.certified, unique=True)
    f, fg = _orlicz_fg(s, X, w, L)
    y, fy, iters, converged, history, spread = _run(s, X, w, f, fg, tol, max_iter, restarts, seed, threads)
    return BarycenterResult(
        point=y,
        value=float(fy),
        iterations=iters,
        converged=converged,
        certified=s.certified,
        unique=True if s.certified else None,
        history=history,
        details={"orlicz": L.descriptor, "restart_spread": spread},
    )


# -- circumcenter -----------------------------------------------------------------


def _max_dist(s, y, X):
    return float(s.distances_to(y, X).max())


def circumcenter(s, points, tol=1e-12, max_iter=500, bc_steps=400, start=None):
    """Minimax center ``argmin_y max_i d(x_i, y)``; ``value`` is the radius.

    Badoiu-Clarkson steps (move a fraction ``1/(k+1)`` towards the current
    farthest point) give a robust start; the epigraph problem
    ``min r  s.t.  d(x_i, y) <= r`` is then polished with SLSQP.  ``start``
    overrides the initial point (the first input point by default).
    """
    X = s.validate_many(points)
    if X.shape[0] == 1 or np.all(s.distances_to(X[0], X) == 0.0):
        return BarycenterResult(X[0].copy(), 0.0, 0, True, p=math.inf, certified=s.certified, unique=True)
    y = X[0].copy() if start is None else s.validate(start)
    best, best_r = y, _max_dist(s, y, X)
    history = [best_r]
    for k in range(1, bc_steps + 1):
        far = X[int(np.argmax(s.distances_to(y, X)))]
        if not s.geodesic_supported(y[None, :], far[None, :])[0]:
            break
        y = s.batch_geodesic(y[None, :], far[None, :], 1.0 / (k + 1))[0]
        r = _max_dist(s, y, X)
        if r < best_r:
            best, best_r = y, r
            history.append(r)

    z0 = np.append(best, best_r)
    bounds = s.chart_bounds() + [(0.0, None)]

    def cons(z):
        return z[-1] - s.distances_to(s.retract(z[:-1]), X)

    def cons_jac(z):
        g = s.distance_grad(s.retract(z[:-1]), X)
        return np.hstack([-g, np.ones((X.shape[0], 1))])

    res = minimize(
        lambda z: z[-1],
        z0,
        jac=lambda z: np.eye(1, z.size, z.size - 1)[0],
        method="SLSQP",
        bounds=bounds,
        constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
        options={"maxiter": max_iter, "ftol": 1e-16},
    )
    cand = s.retract(res.x[:-1])
    r = _max_dist(s, cand, X)
    if r < best_r:
        best, best_r = cand, r
        history.append(r)
    return BarycenterResult(
        point=best,
        value=best_r,
        iterations=bc_steps + int(res.nit),
        converged=bool(res.success) or best_r - float(res.x[-1]) <= max(tol, 1e-9) * (1 + best_r),
        p=math.inf,
        certified=s.certified,
        unique=True if s.certified else None,
        history=history,
    )


# -- checks -----------------------------------------------------------------------


def _random_measure(s, rng, size, radius=1.0):
    pts = s.sample(rng, size, radius=radius)
    w = rng.random(size) + 0.1
    return DiscreteMeasure(pts, w / w.sum())


def jensen_contraction_check(s, mu=None, nu=None, p=1.0, n_instances=100, seed=0, support=4, tol=1e-7, threads=1):
    """Sampled check of ``d(b_2(mu), b_2(nu)) <= w_p(mu, nu)`` (given pair or random pairs)."""
    if (mu is None) != (nu is None):
        raise ValueError("give both measures or neither")

    def one(k):
        if mu is not None:
            m, n = mu, nu
        else:
            rng = chunk_rng(seed, 7, k)
            m = _random_measure(s, rng, int(rng.integers(1, support + 1)))
            n = _random_measure(s, rng, int(rng.integers(1, support + 1)))
        lhs = s.distance(barycenter_p(s, m, 2.0).point, barycenter_p(s, n, 2.0).point)
        rhs = wasserstein_p(s, m, n, p)[0]
        return lhs - rhs

    count = 1 if mu is not None else n_instances
    gaps = np.array(map_ordered(one, range(count), threads))
    bad = gaps > tol
    k = int(np.argmax(gaps))
    return CheckReport(
        property="jensen-contraction",
        p=float(p),
        samples=count,
        violations=int(bad.sum()),
        worst=float(gaps[k]),
        witness={"instance": k},
        tolerance=tol,
    )


def variance_growth_check(s, mu, p=2.0, n_samples=2000, seed=0, radius=1.0, tol=1e-9):
    """Quadratic-growth law ``Var(x) >= Var(b) + omega(d(x, b)) / 2`` with a fitted ``omega(r) = c r^q``.

    The exponent ``q`` comes from a log-log least-squares fit and ``c`` is
    the smallest admissible constant on a first batch; a second, fresh batch
    is then tested against the fitted law.
    """
    b = barycenter_p(s, mu, p)
    rng_fit, rng_test = chunk_rng(seed, 91, 0), chunk_rng(seed, 91, 1)

    def excess(rng):
        pts = s.sample(rng, n_samples, center=b.point, radius=radius)
        r = s.distances_to(b.point, pts)
        gain = np.array([variance(s, mu, x, p) for x in pts]) - b.value
        keep = r > 1e-6
        return r[keep], gain[keep]

    r, gain = excess(rng_fit)
    pos = gain > 0
    q, _ = np.polyfit(np.log(r[pos]), np.log(2.0 * gain[pos]), 1)
    c = float(np.min(2.0 * gain / r**q))
    r2, gain2 = excess(rng_test)
    slack = 0.5 * c * r2**q - gain2
    bad = slack > tol * (1.0 + b.value)
    k = int(np.argmax(slack))
    return CheckReport(
        property="variance-growth",
        p=float(p),
        samples=int(r2.size),
        violations=int(bad.sum()),
        worst=float(slack[k]),
        tolerance=tol,
        details={"c": c, "q": float(q), "barycenter_value": b.value},
    )
