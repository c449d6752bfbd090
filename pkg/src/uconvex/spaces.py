"""Concrete geodesic metric spaces with midpoints.

Points are flat float arrays.  For the Euclidean cone the array is the
packed pair ``[direction..., radius]``; :class:`ConePoint` is the structured
view of the same data.  All spaces expose scalar operations (``distance``,
``midpoint``, ``geodesic_point``) and row-wise batched variants used by the
samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class DimensionError(ValueError):
    pass


class GeodesicError(ValueError):
    """Raised when a geodesic is not supported (cone pairs through the apex)."""


class MetricSpace:
    kind = "abstract"
    #: convexity of ``y -> sum w_i d(x_i, y)^p`` along geodesics is guaranteed
    certified = False

    def __init__(self, dim):
        if dim < 1:
            raise DimensionError("dimension must be >= 1")
        self.dim = int(dim)

    # -- points -------------------------------------------------------------
    def validate(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.shape[0] != self.dim:
            raise DimensionError(f"{self}: expected a point of length {self.dim}, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{self}: non-finite coordinates")
        return self.canonical(a)

    def validate_many(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionError(f"{self}: expected points of length {self.dim}, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"{self}: non-finite coordinates")
        return np.ascontiguousarray(self.canonical_many(pts))

    def canonical(self, a):
        return a

    def canonical_many(self, pts):
        return pts

    def origin(self):
        return np.zeros(self.dim)

    # -- batched primitives -------------------------------------------------
    def batch_distance(self, a, b):
        raise NotImplementedError

    def batch_geodesic(self, a, b, t):
        raise NotImplementedError

    def geodesic_supported(self, a, b):
        return np.ones(a.shape[0], dtype=bool)

    def distances_to(self, y, pts):
        """Distances from the single point ``y`` to every row of ``pts``."""
        pts = np.ascontiguousarray(pts, dtype=float)
        ys = np.broadcast_to(np.asarray(y, dtype=float), pts.shape)
        return self.batch_distance(np.ascontiguousarray(ys), pts)

    # -- scalar API ---------------------------------------------------------
    def distance(self, a, b):
        a = self.validate(a)
        b = self.validate(b)
        return float(self.batch_distance(a[None, :], b[None, :])[0])

    def geodesic_point(self, a, b, t):
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        a = self.validate(a)
        b = self.validate(b)
        if not self.geodesic_supported(a[None, :], b[None, :])[0]:
            raise GeodesicError(f"{self}: geodesic through the apex is not supported")
        if t == 0.0:
            return a.copy()
        if t == 1.0:
            return b.copy()
        return self.batch_geodesic(a[None, :], b[None, :], t)[0]

    def midpoint(self, a, b):
        return self.geodesic_point(a, b, 0.5)

    # -- chart helpers used by the descent solvers ---------------------------
    def retract(self, y):
        """Map an arbitrary chart vector back to a valid point."""
        return self.canonical(np.asarray(y, dtype=float))

    def chart_bounds(self):
        """Box constraints on chart coordinates (``None`` = unbounded), for bounded optimisers."""
        return [(None, None)] * self.dim

    def distance_grad(self, y, pts):
        """Chart gradient of ``y -> d(y, x_i)`` for each row ``x_i`` (central differences)."""
        y = np.asarray(y, dtype=float)
        pts = np.ascontiguousarray(pts, dtype=float)
        grad = np.zeros((pts.shape[0], self.dim))
        for k in range(self.dim):
            h = 1e-6 * max(1.0, abs(y[k]))
            yp = y.copy()
            ym = y.copy()
            yp[k] += h
            ym[k] -= h
            grad[:, k] = (self.distances_to(self.retract(yp), pts) - self.distances_to(self.retract(ym), pts)) / (2 * h)
        return grad

    # -- sampling ---------------------------------------------------------------
    def sample(self, rng, n, center=None, radius=1.0):
        raise NotImplementedError

    # -- serialisation ------------------------------------------------------
    def to_json(self, a):
        return [float(v) for v in np.asarray(a, dtype=float)]

    def from_json(self, obj):
        return self.validate(np.asarray(obj, dtype=float))

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"

    def __eq__(self, other):
        return type(self) is type(other) and str(self) == str(other)

    def __hash__(self):
        return hash(str(self))


def _ball_directions(rng, n, d):
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None]


def _uniform_euclidean_ball(rng, n, d, radius):
    u = rng.random(n) ** (1.0 / d)
    return _ball_directions(rng, n, d) * (radius * u)[:, None]


class Euclidean(MetricSpace):
    kind = "euclidean"
    certified = True

    def batch_distance(self, a, b):
        return kernels.euclid_dist(a, b)

    def batch_geodesic(self, a, b, t):
        return kernels.linear_geodesic(a, b, t)

    def distance_grad(self, y, pts):
        diff = np.asarray(y, dtype=float)[None, :] - pts
        d = np.linalg.norm(diff, axis=1)
        safe = np.where(d > 0, d, 1.0)
        return np.where(d[:, None] > 0, diff / safe[:, None], 0.0)

    def sample(self, rng, n, center=None, radius=1.0):
        center = self.origin() if center is None else self.validate(center)
        return center + _uniform_euclidean_ball(rng, n, self.dim, radius)

    def __str__(self):
        return f"euclidean:{self.dim}"


class LpSpace(MetricSpace):
    """``R^n`` with the ``l_p`` norm, ``p`` in ``[1, inf]``; geodesics are straight segments."""

    kind = "lp"

    def __init__(self, dim, p):
        super().__init__(dim)
        p = float(p)
        if not p >= 1.0:
            raise ValueError("l_p spaces need p >= 1")
        self.p = p
        self.certified = 1.0 < p < math.inf

    def batch_distance(self, a, b):
        return kernels.lp_dist(a, b, self.p)

    def batch_geodesic(self, a, b, t):
        return kernels.linear_geodesic(a, b, t)

    def distance_grad(self, y, pts):
        diff = np.asarray(y, dtype=float)[None, :] - pts
        d = self.distances_to(y, pts)
        safe = np.where(d > 0, d, 1.0)[:, None]
        if math.isinf(self.p):
            grad = np.zeros_like(diff)
            idx = np.argmax(np.abs(diff), axis=1)
            rows = np.arange(diff.shape[0])
            grad[rows, idx] = np.sign(diff[rows, idx])
            return grad
        if self.p == 1.0:
            return np.sign(diff)
        return np.sign(diff) * (np.abs(diff) / safe) ** (self.p - 1.0)

    def sample(self, rng, n, center=None, radius=1.0):
        # uniform in the l_p ball via generalised Gaussians
        center = self.origin() if center is None else self.validate(center)
        d = self.dim
        if math.isinf(self.p):
            return center + radius * rng.uniform(-1.0, 1.0, size=(n, d))
        p = self.p
        g = rng.gamma(1.0 / p, 1.0, size=(n, d)) ** (1.0 / p)
        g *= rng.choice([-1.0, 1.0], size=(n, d))
        z = rng.exponential(1.0, size=n)
        norm = (np.sum(np.abs(g) ** p, axis=1) + z) ** (1.0 / p)
        return center + radius * g / norm[:, None]

    def __str__(self):
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        return f"lp:{self.dim}:{p}"


@dataclass(frozen=True)
class ConePoint:
    """Element ``(direction, radius)`` of a Euclidean cone; all radius-0 points are the apex."""

    direction: np.ndarray = field(compare=False)
    radius: float

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float)
        radius = float(self.radius)
        if radius < 0 or not math.isfinite(radius):
            raise ValueError("cone radius must be a finite nonnegative number")
        if radius == 0.0:
            direction = np.zeros_like(direction)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "radius", radius)

    def to_array(self):
        return np.append(self.direction, self.radius)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[:-1].copy(), float(a[-1]))

    def __eq__(self, other):
        if not isinstance(other, ConePoint):
            return NotImplemented
        return self.radius == other.radius and np.array_equal(self.direction, other.direction)

    def __hash__(self):
        return hash((self.radius, self.direction.tobytes()))


class EuclideanCone(MetricSpace):
    """Euclidean cone ``C(B) = B x [0, inf)`` over a base space ``B``.

    The metric is ``d^2 = t^2 + t'^2 - 2 t t' cos(min(pi, d_B(x, x')))``.
    Geodesics are obtained by unfolding the triangle ``(t, t', angle)`` into
    the plane; pairs whose base angle reaches ``pi`` would pass through the
    apex and are rejected.
    """

    kind = "cone"

    def __init__(self, base):
        if isinstance(base, EuclideanCone):
            raise ValueError("iterated cones are not supported")
        super().__init__(base.dim + 1)
        self.base = base
        self._fast = isinstance(base, Euclidean)
        self.certified = self._fast

    def point(self, direction, radius):
        return self.validate(np.append(np.asarray(direction, dtype=float), float(radius)))

    def unpack(self, a):
        return ConePoint.from_array(self.validate(a))

    def validate(self, a):
        if isinstance(a, ConePoint):
            a = a.to_array()
        return super().validate(a)

    def validate_many(self, pts):
        if isinstance(pts, (list, tuple)) and pts and isinstance(pts[0], ConePoint):
            pts = np.array([q.to_array() for q in pts])
        return super().validate_many(pts)

    def canonical(self, a):
        if a[-1] < 0:
            raise ValueError("cone radius must be nonnegative")
        if a[-1] == 0.0 and np.any(a[:-1] != 0.0):
            a = a.copy()
            a[:-1] = 0.0
        return a

    def canonical_many(self, pts):
        if np.any(pts[:, -1] < 0):
            raise ValueError("cone radius must be nonnegative")
        apex = pts[:, -1] == 0.0
        if np.any(apex):
            pts = pts.copy()
            pts[apex, :-1] = 0.0
        return pts

    def retract(self, y):
        y = np.array(y, dtype=float)
        y[-1] = max(y[-1], 0.0)
        return self.canonical(y)

    def chart_bounds(self):
        return [(None, None)] * self.base.dim + [(0.0, None)]

    def base_angle(self, a, b):
        return np.minimum(np.pi, self.base.batch_distance(np.ascontiguousarray(a[:, :-1]), np.ascontiguousarray(b[:, :-1])))

    def batch_distance(self, a, b):
        if self._fast:
            return kernels.cone_dist(a, b)
        alpha = self.base_angle(a, b)
        ta, tb = a[:, -1], b[:, -1]
        s = np.sin(0.5 * alpha)
        return np.sqrt(np.maximum((ta - tb) ** 2 + 4.0 * ta * tb * s * s, 0.0))

    def geodesic_supported(self, a, b):
        alpha = self.base_angle(a, b)
        return (alpha < np.pi) | (a[:, -1] == 0.0) | (b[:, -1] == 0.0)

    def batch_geodesic(self, a, b, t):
        if self._fast:
            return kernels.cone_geodesic(a, b, t)
        t = np.broadcast_to(np.asarray(t, dtype=float), (a.shape[0],))
        alpha = self.base_angle(a, b)
        ta, tb = a[:, -1], b[:, -1]
        px = (1.0 - t) * ta + t * tb * np.cos(alpha)
        py = t * tb * np.sin(alpha)
        r = np.hypot(px, py)
        frac = np.where(alpha > 0, np.arctan2(py, px) / np.where(alpha > 0, alpha, 1.0), 0.0)
        out = np.empty_like(a)
        out[:, :-1] = self.base.batch_geodesic(
            np.ascontiguousarray(a[:, :-1]), np.ascontiguousarray(b[:, :-1]), np.clip(frac, 0.0, 1.0)
        )
        out[:, -1] = r
        out[r == 0.0, :-1] = 0.0
        return out

    def distance_grad(self, y, pts):
        if not self._fast:
            return super().distance_grad(y, pts)
        y = np.asarray(y, dtype=float)
        u, s = y[:-1], y[-1]
        x, t = pts[:, :-1], pts[:, -1]
        diff = u[None, :] - x
        raw = np.linalg.norm(diff, axis=1)
        alpha = np.minimum(np.pi, raw)
        d = self.distances_to(y, pts)
        safe = np.where(d > 0, d, 1.0)
        grad = np.zeros_like(pts)
        grad[:, -1] = np.where(d > 0, (s - t * np.cos(alpha)) / safe, 0.0)
        sinc = np.where(raw > 0, np.sin(alpha) / np.where(raw > 0, raw, 1.0), 1.0)
        inside = (raw < np.pi) & (d > 0)
        grad[:, :-1] = np.where(inside[:, None], (s * t * sinc / safe)[:, None] * diff, 0.0)
        return grad

    def sample(self, rng, n, center=None, radius=1.0):
        # rejection sampling in chart coordinates, restricted to the metric ball
        if center is None:
            center = self.point(self.base.origin(), 1.0)
        center = self.validate(center)
        x0, t0 = center[:-1], center[-1]
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            m = max(2 * (n - out.shape[0]), 64)
            dirs = self.base.sample(rng, m, center=x0, radius=math.pi / 2)
            rad = rng.uniform(max(0.0, t0 - radius), t0 + radius, size=m)
            cand = self.canonical_many(np.column_stack([dirs, rad]))
            keep = self.distances_to(center, cand) <= radius
            out = np.vstack([out, cand[keep]])
        return np.ascontiguousarray(out[:n])

    def to_json(self, a):
        a = np.asarray(a, dtype=float)
        return {"dir": [float(v) for v in a[:-1]], "r": float(a[-1])}

    def from_json(self, obj):
        if isinstance(obj, dict):
            return self.point(obj["dir"], obj["r"])
        return self.validate(np.asarray(obj, dtype=float))

    def __str__(self):
        if self._fast:
            return f"cone:{self.base.dim}"
        return f"cone[{self.base}]"


class ProductSpace(MetricSpace):
    """``p``-product of finitely many spaces; geodesics move every factor at the same speed."""

    kind = "product"

    def __init__(self, factors, p=2.0):
        factors = list(factors)
        if not factors:
            raise ValueError("product needs at least one factor")
        p = float(p)
        if not p >= 1.0:
            raise ValueError("product exponent must be >= 1")
        super().__init__(sum(f.dim for f in factors))
        self.factors = factors
        self.p = p
        self.offsets = np.cumsum([0] + [f.dim for f in factors])
        self.certified = all(f.certified for f in factors) and 1.0 < p < math.inf

    def _blocks(self, a):
        return [np.ascontiguousarray(a[:, lo:hi]) for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]

    def component(self, a, i):
        a = np.asarray(a, dtype=float)
        return a[..., self.offsets[i] : self.offsets[i + 1]]

    def canonical(self, a):
        return np.concatenate([f.canonical(a[lo:hi]) for f, lo, hi in zip(self.factors, self.offsets[:-1], self.offsets[1:])])

    def canonical_many(self, pts):
        return np.hstack([f.canonical_many(b) for f, b in zip(self.factors, self._blocks(pts))])

    def retract(self, y):
        y = np.asarray(y, dtype=float)
        return np.concatenate([f.retract(y[lo:hi]) for f, lo, hi in zip(self.factors, self.offsets[:-1], self.offsets[1:])])

    def chart_bounds(self):
        return [b for f in self.factors for b in f.chart_bounds()]

    def distance_grad(self, y, pts):
        y = np.asarray(y, dtype=float)
        pts = np.ascontiguousarray(pts, dtype=float)
        parts = []
        grads = []
        for i, f in enumerate(self.factors):
            block = np.ascontiguousarray(self.component(pts, i))
            parts.append(f.distances_to(self.component(y, i), block))
            grads.append(f.distance_grad(self.component(y, i), block))
        parts = np.column_stack(parts)
        if math.isinf(self.p):
            # subgradient through the largest factor
            k = np.argmax(parts, axis=1)
            return np.hstack([np.where((k == i)[:, None], g, 0.0) for i, g in enumerate(grads)])
        d = np.sum(parts**self.p, axis=1) ** (1.0 / self.p)
        safe = np.where(d > 0, d, 1.0)
        scale = [np.where(d > 0, (parts[:, i] / safe) ** (self.p - 1.0), 0.0) for i in range(len(self.factors))]
        return np.hstack([g * c[:, None] for g, c in zip(grads, scale)])

    def batch_distance(self, a, b):
        parts = np.column_stack([f.batch_distance(x, y) for f, x, y in zip(self.factors, self._blocks(a), self._blocks(b))])
        if math.isinf(self.p):
            return parts.max(axis=1)
        return np.sum(parts**self.p, axis=1) ** (1.0 / self.p)

    def geodesic_supported(self, a, b):
        ok = np.ones(a.shape[0], dtype=bool)
        for f, x, y in zip(self.factors, self._blocks(a), self._blocks(b)):
            ok &= f.geodesic_supported(x, y)
        return ok

    def batch_geodesic(self, a, b, t):
        return np.hstack([f.batch_geodesic(x, y, t) for f, x, y in zip(self.factors, self._blocks(a), self._blocks(b))])

    def sample(self, rng, n, center=None, radius=1.0):
        blocks = []
        for i, f in enumerate(self.factors):
            c = None if center is None else self.component(center, i)
            blocks.append(f.sample(rng, n, center=c, radius=radius))
        return np.hstack(blocks)

    def to_json(self, a):
        a = np.asarray(a, dtype=float)
        return [f.to_json(self.component(a, i)) for i, f in enumerate(self.factors)]

    def from_json(self, obj):
        return self.validate(np.concatenate([f.from_json(o) for f, o in zip(self.factors, obj)]))

    def __str__(self):
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        return f"product:{p}[" + ",".join(str(f) for f in self.factors) + "]"


def cone_ray_projection(space, q):
    """Nearest point of ``q`` on the central ray ``{(0, r)}`` of a cone.

    Uses ``(0, r cos(d_B(x, 0)))``, valid while the base distance is at
    most ``pi / 2``.
    """
    if not isinstance(space, EuclideanCone):
        raise TypeError("ray projection is defined on cones only")
    q = space.unpack(q)
    if q.radius == 0.0:
        return ConePoint(space.base.origin(), 0.0)
    angle = space.base.distance(q.direction, space.base.origin())
    if angle > math.pi / 2:
        raise ValueError(f"base angle {angle:.6g} exceeds pi/2; projection formula does not apply")
    return ConePoint(space.base.origin(), q.radius * math.cos(angle))


def _split_top(s):
    parts, depth, cur = [], 0, ""
    for ch in s:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def parse_space(spec):
    """Build a space from a string such as ``euclidean:3``, ``lp:2:inf``,
    ``cone:4``, ``cone[lp:3:2]`` or ``product:2[euclidean:1,euclidean:1]``."""
    spec = spec.strip()
    try:
        if spec.startswith("cone[") and spec.endswith("]"):
            return EuclideanCone(parse_space(spec[5:-1]))
        if spec.startswith("product:"):
            head, _, rest = spec[len("product:") :].partition("[")
            if not rest.endswith("]"):
                raise ValueError
            return ProductSpace([parse_space(s) for s in _split_top(rest[:-1])], p=float(head))
        fields = spec.split(":")
        kind = fields[0]
        if kind == "euclidean" and len(fields) == 2:
            return Euclidean(int(fields[1]))
        if kind == "lp" and len(fields) == 3:
            return LpSpace(int(fields[1]), float(fields[2]))
        if kind == "cone" and len(fields) == 2:
            return EuclideanCone(Euclidean(int(fields[1])))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"cannot parse space spec {spec!r}") from exc
    raise ValueError(f"cannot parse space spec {spec!r}")
