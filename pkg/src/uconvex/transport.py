"""Exact optimal transport between finitely supported measures on any space."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .reports import CheckReport

MAX_SUPPORT = 64
MAX_DENOMINATOR = 10**6


class DiscreteMeasure:
    """Finitely supported probability measure ``sum_i w_i delta_{x_i}``.

    Zero weights are dropped on construction; weights must be nonnegative
    and sum to one within ``1e-12``.
    """

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("support must be a nonempty (k, dim) array")
        if weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(weights, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise ValueError("support and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        keep = w > 0
        self.points = np.ascontiguousarray(pts[keep])
        self.weights = w[keep]

    @classmethod
    def dirac(cls, x):
        return cls(np.asarray(x, dtype=float)[None, :], [1.0])

    @classmethod
    def uniform(cls, points):
        return cls(points)

    def __len__(self):
        return self.weights.shape[0]

    def validate(self, s):
        self.points = s.validate_many(self.points)
        return self

    def marginal(self, s, i):
        """Pushforward onto factor ``i`` of a :class:`~uconvex.spaces.ProductSpace`."""
        return DiscreteMeasure(s.component(self.points, i), self.weights)

    def translated(self, v):
        return DiscreteMeasure(self.points + np.asarray(v, dtype=float), self.weights)

    def to_json(self, s):
        return {"points": [s.to_json(x) for x in self.points], "weights": [float(w) for w in self.weights]}

    @classmethod
    def from_json(cls, obj, s):
        pts = np.array([s.from_json(x) for x in obj["points"]])
        return cls(pts, obj.get("weights"))

    def __repr__(self):
        return f"DiscreteMeasure(n={len(self)}, dim={self.points.shape[1]})"


@dataclass
class CouplingPlan:
    """Transport plan: ``matrix[i, j]`` is the mass moved from ``mu_i`` to ``nu_j``."""

    matrix: np.ndarray
    cost: float
    scale: int | None = None
    rounding_residual: float = 0.0

    def marginals(self):
        return self.matrix.sum(axis=1), self.matrix.sum(axis=0)

    def support(self):
        return np.argwhere(self.matrix > 0)

    def to_json(self):
        return {
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "cost": float(self.cost),
            "scale": self.scale,
            "rounding_residual": self.rounding_residual,
        }


def integer_masses(a, b, max_den=MAX_DENOMINATOR):
    """Common-denominator integer masses for two weight vectors, or ``None``.

    Succeeds when every weight is (to float precision) a fraction whose
    denominators share a least common multiple ``D <= max_den``.
    """
    fracs = [Fraction(float(w)).limit_denominator(max_den) for w in list(a) + list(b)]
    for f, w in zip(fracs, list(a) + list(b)):
        if abs(float(f) - float(w)) > 4e-16 * max(1.0, float(w)):
            return None
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
        if den > max_den:
            return None
    ints = [int(f * den) for f in fracs]
    ia, ib = ints[: len(a)], ints[len(a) :]
    if sum(ia) != den or sum(ib) != den:
        return None
    return np.array(ia, dtype=np.int64), np.array(ib, dtype=np.int64), den


def _northwest(a, b):
    m, n = len(a), len(b)
    flow = np.zeros((m, n), dtype=a.dtype)
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        f = min(ra[i], rb[j])
        flow[i, j] = f
        basis.append((i, j))
        ra[i] -= f
        rb[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if (ra[i] <= 0 and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(cost, basis, m, n):
    rows = [[] for _ in range(m)]
    cols = [[] for _ in range(n)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    queue.append(("r", i))
    return u, v, rows, cols


def _cycle(basis_rows, basis_cols, i0, j0):
    """Alternating path in the basis tree from column ``j0`` to row ``i0``."""
    # BFS over the bipartite basis tree starting at row i0
    parent = {("r", i0): None}
    queue = deque([("r", i0)])
    target = ("c", j0)
    while queue:
        node = queue.popleft()
        if node == target:
            break
        kind, k = node
        nbrs = [("c", j) for j in basis_rows[k]] if kind == "r" else [("r", i) for i in basis_cols[k]]
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        if node[0] == "c":
            path.append((prev[1], node[1]))
        else:
            path.append((node[1], prev[1]))
        node = prev
    # path runs from the entering column back to row i0; cells alternate -, +, -, ...
    return path


def _exact_potentials(cost_q, rows, cols, m, n):
    u = [None] * m
    v = [None] * n
    u[0] = Fraction(0)
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in rows[k]:
                if v[j] is None:
                    v[j] = cost_q[k][j] - u[k]
                    queue.append(("c", j))
        else:
            for i in cols[k]:
                if u[i] is None:
                    u[i] = cost_q[i][k] - v[k]
                    queue.append(("r", i))
    return u, v


def transport_simplex(cost, a, b, max_iter=100_000):
    """Transportation simplex (MODI pricing) for ``min <cost, P>`` with marginals ``a``, ``b``.

    ``a`` and ``b`` may be integer arrays (exact flows) or floats.  Entering
    cells are proposed from float potentials, but every pivot and the final
    optimality test are decided on exact rational potentials, so costs
    spanning many orders of magnitude (``d^p`` for large ``p``) are handled
    exactly.  After a run of degenerate pivots the entering rule switches to
    Bland's, which rules out cycling.
    """
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    cost_q = [[Fraction(float(c)) for c in row] for row in cost]
    flow, basis = _northwest(a, b)
    in_basis = np.zeros((m, n), dtype=bool)
    for c in basis:
        in_basis[c] = True
    degenerate_run = 0
    for _ in range(max_iter):
        u, v, rows, cols = _potentials(cost, basis, m, n)
        uq, vq = _exact_potentials(cost_q, rows, cols, m, n)
        bland = degenerate_run > 2 * (m + n)
        entering = None
        if not bland:
            reduced = cost - u[:, None] - v[None, :]
            reduced[in_basis] = 0.0
            k = int(np.argmin(reduced))
            i0, j0 = divmod(k, n)
            if reduced[i0, j0] < 0 and cost_q[i0][j0] - uq[i0] - vq[j0] < 0:
                entering = (i0, j0)
        if entering is None:
            best = None
            for i in range(m):
                for j in range(n):
                    if in_basis[i, j]:
                        continue
                    r = cost_q[i][j] - uq[i] - vq[j]
                    if r < 0 and (best is None or (not bland and r < best[0])):
                        best = (r, (i, j))
                        if bland:
                            break
                if bland and best is not None:
                    break
            if best is None:
                break
            entering = best[1]
        i0, j0 = entering
        path = _cycle(rows, cols, i0, j0)
        minus = path[0::2]
        plus = path[1::2]
        theta_cell = min(minus, key=lambda c: (flow[c], c))
        theta = flow[theta_cell]
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[i0, j0] += theta
        basis.remove(theta_cell)
        in_basis[theta_cell] = False
        basis.append((i0, j0))
        in_basis[i0, j0] = True
        degenerate_run = degenerate_run + 1 if theta == 0 else 0
    else:  # pragma: no cover
        raise RuntimeError("transport simplex did not converge")
    if flow.dtype.kind == "f":
        flow = np.maximum(flow, 0.0)
    return flow


def _check_sizes(mu, nu):
    if len(mu) > MAX_SUPPORT or len(nu) > MAX_SUPPORT:
        raise ValueError(f"exact solver handles supports of at most {MAX_SUPPORT} points")


def cost_matrix(s, mu, nu, p=1.0):
    X = s.validate_many(mu.points)
    Y = s.validate_many(nu.points)
    m, n = X.shape[0], Y.shape[0]
    d = s.batch_distance(np.repeat(X, n, axis=0), np.tile(Y, (m, 1))).reshape(m, n)
    return d if p == 1.0 else d**p


def optimal_plan(cost, mu_w, nu_w):
    """Optimal plan for a cost matrix; masses are made integral when the weights allow it."""
    ints = integer_masses(mu_w, nu_w)
    if ints is not None:
        ia, ib, den = ints
        flow = transport_simplex(cost, ia, ib)
        plan = flow.astype(float) / den
        return CouplingPlan(plan, float(np.sum(plan * cost)), scale=den, rounding_residual=0.0)
    flow = transport_simplex(cost, np.asarray(mu_w, dtype=float), np.asarray(nu_w, dtype=float))
    return CouplingPlan(flow, float(np.sum(flow * cost)), scale=None, rounding_residual=0.0)


def wasserstein_p(s, mu, nu, p):
    """``w_p(mu, nu)`` for ``1 <= p < inf`` and an optimal coupling (whose ``cost`` is ``w_p^p``)."""
    p = float(p)
    if not 1.0 <= p < math.inf:
        raise ValueError("w_p needs 1 <= p < inf; use wasserstein_inf for the bottleneck distance")
    _check_sizes(mu, nu)
    d = cost_matrix(s, mu, nu, 1.0)
    # normalise by the largest distance so d^p neither overflows nor flushes the optimum to zero
    top = float(d.max())
    if top == 0.0:
        plan = optimal_plan(d, mu.weights, nu.weights)
        return 0.0, plan
    plan = optimal_plan((d / top) ** p, mu.weights, nu.weights)
    value = top * max(plan.cost, 0.0) ** (1.0 / p)
    plan.cost = top**p * plan.cost
    return value, plan


def _max_flow_feasible(allowed, a, b):
    """Whether marginals ``a``/``b`` admit a plan supported on ``allowed`` (augmenting paths)."""
    m, n = allowed.shape
    exact = a.dtype.kind == "i"
    zero = 0 if exact else 0.0
    tol = 0 if exact else 1e-12
    flow = np.zeros((m, n), dtype=a.dtype)
    out_a = a.copy()
    in_b = b.copy()
    total = zero
    need = a.sum()
    while True:
        # BFS in the residual graph: source -> rows -> cols -> sink
        prev = {}
        queue = deque()
        for i in range(m):
            if out_a[i] > tol:
                prev[("r", i)] = None
                queue.append(("r", i))
        end = None
        while queue and end is None:
            kind, k = queue.popleft()
            if kind == "r":
                for j in np.flatnonzero(allowed[k]):
                    node = ("c", int(j))
                    if node not in prev:
                        prev[node] = (kind, k)
                        if in_b[j] > tol:
                            end = node
                            break
                        queue.append(node)
            else:
                for i in np.flatnonzero(flow[:, k] > tol):
                    node = ("r", int(i))
                    if node not in prev:
                        prev[node] = (kind, k)
                        queue.append(node)
        if end is None:
            break
        path = []
        node = end
        while prev[node] is not None:
            path.append((prev[node], node))
            node = prev[node]
        start = node[1]
        delta = min(out_a[start], in_b[end[1]])
        for (u_, w_) in path:
            if u_[0] == "c":  # backward edge col -> row cancels flow (row, col)
                delta = min(delta, flow[w_[1], u_[1]])
        for (u_, w_) in path:
            if u_[0] == "r":
                flow[u_[1], w_[1]] += delta
            else:
                flow[w_[1], u_[1]] -= delta
        out_a[start] -= delta
        in_b[end[1]] -= delta
        total += delta
    return (total == need) if exact else (abs(total - need) <= 1e-9)


def wasserstein_inf(s, mu, nu):
    """Bottleneck distance: smallest threshold whose admissible cells carry a coupling.

    Binary search over the sorted distinct pairwise distances with a
    max-flow feasibility test.
    """
    _check_sizes(mu, nu)
    d = cost_matrix(s, mu, nu, 1.0)
    ints = integer_masses(mu.weights, nu.weights)
    if ints is not None:
        a, b, _ = ints
    else:
        a, b = mu.weights.astype(float), nu.weights.astype(float)
    levels = np.unique(d)
    lo, hi = 0, levels.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _max_flow_feasible(d <= levels[mid], a, b):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


def wasserstein_monotone_check(s, mu, nu, p_list, limit_rtol=0.02, tol=1e-9):
    """``w_p`` must be nondecreasing in ``p``; the largest ``p >= 64`` in the list must be within
    ``limit_rtol`` of ``w_inf``."""
    p_list = [float(p) for p in p_list]
    if any(b <= a for a, b in zip(p_list, p_list[1:])):
        raise ValueError("p_list must be strictly increasing")
    values = [wasserstein_p(s, mu, nu, p)[0] for p in p_list]
    w_inf = wasserstein_inf(s, mu, nu)
    drops = [values[k] - values[k + 1] for k in range(len(values) - 1)]
    violations = sum(1 for g in drops if g > tol * max(1.0, values[0]))
    worst = max(drops, default=-math.inf)
    limit_gap = None
    if p_list[-1] >= 64:
        limit_gap = abs(values[-1] - w_inf) / w_inf if w_inf > 0 else abs(values[-1])
        if limit_gap > limit_rtol:
            violations += 1
    return CheckReport(
        property="wasserstein-monotone",
        p=p_list,
        samples=len(p_list),
        violations=violations,
        worst=worst,
        tolerance=tol,
        details={"values": values, "w_inf": w_inf, "limit_relative_gap": limit_gap, "limit_rtol": limit_rtol},
    )
