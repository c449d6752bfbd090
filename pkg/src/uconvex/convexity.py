"""Randomized checkers and empirical moduli for the convexity notions of a geodesic space.

Every sampler draws its configurations in fixed-size chunks, each from its
own seeded stream (see :func:`uconvex.reports.chunk_rng`), and merges chunk
results in index order.  Output therefore depends on ``(seed, n_samples)``
only, never on ``threads``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .means import INF, as_exponent, p_mean
from .reports import CHUNK, CheckReport, chunk_rng, map_ordered
from .sets import build_hull, hull_distance

TOL = 1e-9

# stream ids, so different checks never share random numbers
_S_CONVEX, _S_MODULUS, _S_BUSEMANN, _S_CLARKSON, _S_PPRIME = 1, 2, 3, 4, 5


def _sample_triple(s, rng, n, radius):
    x = s.sample(rng, n, radius=radius)
    y = s.sample(rng, n, radius=radius)
    z = s.sample(rng, n, radius=radius)
    return x, y, z


def _triple_geometry(s, x, y, z):
    """Distances for the triple test; rows with unsupported midpoints are dropped."""
    ok = s.geodesic_supported(x, y)
    x, y, z = x[ok], y[ok], z[ok]
    m = s.batch_geodesic(x, y, 0.5)
    return {
        "x": x,
        "y": y,
        "z": z,
        "dxz": s.batch_distance(x, z),
        "dyz": s.batch_distance(y, z),
        "dxy": s.batch_distance(x, y),
        "dmz": s.batch_distance(m, z),
        "skipped": int(np.count_nonzero(~ok)),
    }


def _witness(s, **pts):
    return {k: s.to_json(v) for k, v in pts.items()}


def _chunks(n_samples):
    full, rest = divmod(int(n_samples), CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def check_p_convexity(s, p, n_samples=10_000, seed=0, radius=1.0, tol=TOL, threads=1):
    """Largest observed ``d(m(x,y), z) - M^p(d(x,z), d(y,z))`` over random triples."""
    p = as_exponent(p)
    sizes = _chunks(n_samples)

    def run(k):
        rng = chunk_rng(seed, _S_CONVEX, k)
        g = _triple_geometry(s, *_sample_triple(s, rng, sizes[k], radius))
        gap = g["dmz"] - p_mean(p, g["dxz"], g["dyz"])
        i = int(np.argmax(gap)) if gap.size else -1
        return gap.size, int(np.count_nonzero(gap > tol)), g["skipped"], (gap[i] if i >= 0 else -math.inf), (
            _witness(s, x=g["x"][i], y=g["y"][i], z=g["z"][i]) if i >= 0 else None
        )

    parts = map_ordered(run, range(len(sizes)), threads)
    worst_k = max(range(len(parts)), key=lambda k: parts[k][3]) if parts else None
    return CheckReport(
        property="p-convexity",
        p=p,
        samples=sum(r[0] for r in parts),
        violations=sum(r[1] for r in parts),
        worst=float(parts[worst_k][3]) if parts else -math.inf,
        witness=parts[worst_k][4] if parts else None,
        tolerance=tol,
        details={"space": str(s), "skipped": sum(r[2] for r in parts)},
    )


def _trigger(p, eps, dxy, dxz, dyz):
    if p == 1.0:
        return dxy > np.abs(dxz - dyz) + eps * p_mean(1.0, dxz, dyz)
    return dxy > eps * p_mean(p, dxz, dyz)


@dataclass
class ModulusTable:
    """Empirical modulus ``eps -> rho_hat(eps)``.

    ``rho_raw`` holds the plain empirical infima; ``rho_hat`` is the
    nondecreasing envelope (running minimum from the right), which keeps each
    entry an upper bound for the true modulus.  ``None`` marks a grid point
    without qualifying triples.
    """

    p: object
    epsilons: list
    rho_raw: list
    rho_hat: list
    samples: list
    attempts: list
    witnesses: list = field(default_factory=list)

    @property
    def rho_tilde(self):
        """Power form ``1 - (1 - rho)^p`` of the modulus (``None`` for ``p = inf``)."""
        if self.p is INF:
            return [None] * len(self.rho_hat)
        return [None if r is None else 1.0 - (1.0 - r) ** self.p for r in self.rho_hat]

    def lookup(self, eps):
        """Envelope value at ``eps`` (must be a grid point)."""
        for e, r in zip(self.epsilons, self.rho_hat):
            if math.isclose(e, eps, rel_tol=1e-12, abs_tol=0.0):
                return r
        raise KeyError(eps)

    def to_dict(self):
        return {
            "p": self.p,
            "epsilons": self.epsilons,
            "rho_hat": self.rho_hat,
            "rho_raw": self.rho_raw,
            "rho_tilde": self.rho_tilde,
            "samples": self.samples,
            "attempts": self.attempts,
            "witnesses": self.witnesses,
        }


def _envelope(raw):
    out = list(raw)
    best = None
    for k in range(len(out) - 1, -1, -1):
        if out[k] is None:
            continue
        if best is not None and out[k] > best:
            out[k] = best
        best = out[k]
    return out


def _qualifying_deficits(s, p, eps, n_samples, seed, stream, radius, max_attempts, threads):
    """Deficits ``1 - d(m,z)/M^p`` of the first ``n_samples`` qualifying triples.

    Chunks are consumed in index order until enough triples qualify or
    ``max_attempts`` triples have been drawn.
    """
    deficits, triples = [], []
    have = attempts = 0
    k = 0
    wave = max(1, threads) * 2

    def run(idx):
        rng = chunk_rng(seed, stream, idx)
        size = min(CHUNK, max_attempts - idx * CHUNK)
        g = _triple_geometry(s, *_sample_triple(s, rng, size, radius))
        mean = p_mean(p, g["dxz"], g["dyz"])
        keep = _trigger(p, eps, g["dxy"], g["dxz"], g["dyz"]) & (g["dxy"] > 0) & (mean > 0)
        rho = 1.0 - g["dmz"][keep] / mean[keep]
        return size, rho, (g["x"][keep], g["y"][keep], g["z"][keep])

    while have < n_samples and attempts < max_attempts:
        idxs = [i for i in range(k, k + wave) if i * CHUNK < max_attempts]
        if not idxs:
            break
        for size, rho, trip in map_ordered(run, idxs, threads):
            if have >= n_samples:
                break
            take = min(rho.size, n_samples - have)
            deficits.append(rho[:take])
            triples.append(tuple(t[:take] for t in trip))
            have += take
            attempts += size
        k += wave
    if not deficits:
        return np.empty(0), None, attempts
    rho = np.concatenate(deficits)
    xs = tuple(np.concatenate([t[j] for t in triples]) for j in range(3))
    return rho, xs, attempts


def estimate_modulus(s, p, epsilon_grid, n_samples=100_000, seed=0, radius=1.0, max_attempts=10**6, threads=1):
    """Empirical uniform-convexity modulus on a grid of ``eps`` values.

    For each ``eps`` the estimate is the infimum of ``1 - d(m,z)/M^p`` over
    sampled triples meeting the ``eps``-spread condition (for ``p = 1`` the
    condition also subtracts ``|d(x,z) - d(y,z)|``).
    """
    p = as_exponent(p)
    grid = [float(e) for e in epsilon_grid]
    if any(e <= 0 for e in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("epsilon grid must be positive and strictly increasing")
    raw, counts, tries, wits = [], [], [], []
    for j, eps in enumerate(grid):
        rho, xs, attempts = _qualifying_deficits(s, p, eps, n_samples, seed, (_S_MODULUS * 1000 + j), radius, max_attempts, threads)
        tries.append(attempts)
        counts.append(int(rho.size))
        if rho.size == 0:
            raw.append(None)
            wits.append(None)
            continue
        i = int(np.argmin(rho))
        raw.append(max(float(rho[i]), 0.0))
        wits.append(_witness(s, x=xs[0][i], y=xs[1][i], z=xs[2][i]))
    return ModulusTable(p=p, epsilons=grid, rho_raw=raw, rho_hat=_envelope(raw), samples=counts, attempts=tries, witnesses=wits)


def check_busemann(s, p, n_samples=10_000, seed=0, radius=1.0, tol=TOL, threads=1):
    """Quadruple form ``d(m(x0,x1), m(y0,y1)) <= M^p(d(x0,y0), d(x1,y1))`` and,
    for finite ``p``, the triple form ``d(m(x,z), m(y,z))^p <= d(x,y)^p / 2``."""
    p = as_exponent(p)
    sizes = _chunks(n_samples)

    def run(k):
        rng = chunk_rng(seed, _S_BUSEMANN, k)
        n = sizes[k]
        x0, x1, y0, y1 = (s.sample(rng, n, radius=radius) for _ in range(4))
        ok = s.geodesic_supported(x0, x1) & s.geodesic_supported(y0, y1) & s.geodesic_supported(x0, y1) & s.geodesic_supported(x1, y1)
        x0, x1, y0, y1 = x0[ok], x1[ok], y0[ok], y1[ok]
        mx = s.batch_geodesic(x0, x1, 0.5)
        my = s.batch_geodesic(y0, y1, 0.5)
        gap_quad = s.batch_distance(mx, my) - p_mean(p, s.batch_distance(x0, y0), s.batch_distance(x1, y1))
        if p is INF:
            gap_tri = np.full_like(gap_quad, -math.inf)
        else:
            # x = x0, y = x1, z = y1
            m1 = s.batch_geodesic(x0, y1, 0.5)
            m2 = s.batch_geodesic(x1, y1, 0.5)
            gap_tri = s.batch_distance(m1, m2) - 0.5 ** (1.0 / p) * s.batch_distance(x0, x1)
        gap = np.maximum(gap_quad, gap_tri)
        i = int(np.argmax(gap)) if gap.size else -1
        wit = None
        if i >= 0:
            wit = _witness(s, x0=x0[i], x1=x1[i], y0=y0[i], y1=y1[i])
            wit["form"] = "quadruple" if gap_quad[i] >= gap_tri[i] else "triple"
        return (
            gap.size,
            int(np.count_nonzero(gap_quad > tol)),
            int(np.count_nonzero(gap_tri > tol)),
            float(gap[i]) if i >= 0 else -math.inf,
            wit,
            int(np.count_nonzero(~ok)),
        )

    parts = map_ordered(run, range(len(sizes)), threads)
    worst_k = max(range(len(parts)), key=lambda k: parts[k][3])
    quad = sum(r[1] for r in parts)
    tri = sum(r[2] for r in parts)
    return CheckReport(
        property="busemann",
        p=p,
        samples=sum(r[0] for r in parts),
        violations=quad + tri,
        worst=parts[worst_k][3],
        witness=parts[worst_k][4],
        tolerance=tol,
        details={"space": str(s), "quadruple_violations": quad, "triple_violations": tri, "skipped": sum(r[5] for r in parts)},
    )


@functools.lru_cache(maxsize=None)
def clarkson_constant(p):
    """Constant for the scalar Clarkson inequality used at exponent ``p > 1``.

    ``2^-p`` for ``p >= 2``.  For ``1 < p < 2`` it is the minimum over
    ``a + b = 1`` of ``(M^p(a,b)^q - ((a+b)/2)^q) / |a-b|^q`` with ``q`` the
    conjugate exponent, found by a grid scan plus bounded refinement and
    shrunk by ``1e-10`` relative to absorb rounding.
    """
    p = float(p)
    if not p > 1.0 or math.isinf(p):
        raise ValueError("Clarkson constants need 1 < p < inf")
    if p >= 2.0:
        return 2.0**-p
    q = p / (p - 1.0)

    def ratio(a):
        b = 1.0 - a
        return (p_mean(p, a, b) ** q - 0.5**q) / abs(a - b) ** q

    grid = np.linspace(0.0, 0.5, 2001)[:-1]
    vals = np.array([ratio(a) for a in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(ratio, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    best = min(float(vals[k]), float(res.fun))
    return best * (1.0 - 1e-10)


def clarkson_gap(p, a, b, c=None):
    """``lhs - rhs`` of the scalar Clarkson inequality (nonpositive when it holds)."""
    p = float(p)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = clarkson_constant(p) if c is None else c
    if p >= 2.0:
        return (0.5 * a + 0.5 * b) ** p + c * np.abs(a - b) ** p - (0.5 * a**p + 0.5 * b**p)
    q = p / (p - 1.0)
    return (0.5 * a + 0.5 * b) ** q + c * np.abs(a - b) ** q - p_mean(p, a, b) ** q


def check_clarkson(p, n_samples=100_000, seed=0, c=None, tol=1e-12):
    """Scalar Clarkson inequality on random pairs plus the corner cases ``b = 0`` and ``a = b``."""
    p = float(p)
    if not p > 1.0:
        raise ValueError("Clarkson checks need p > 1")
    c = clarkson_constant(p) if c is None else float(c)
    rng = chunk_rng(seed, _S_CLARKSON)
    scale = rng.exponential(1.0, size=n_samples)
    a = rng.random(n_samples) * scale
    b = rng.random(n_samples) * scale
    a = np.concatenate([a, [1.0, 0.0, 1.0, 2.5]])
    b = np.concatenate([b, [0.0, 1.0, 1.0, 2.5]])
    gap = clarkson_gap(p, a, b, c)
    rel = gap / np.maximum(1.0, np.maximum(a, b) ** max(p, p / (p - 1.0)))
    i = int(np.argmax(rel))
    return CheckReport(
        property="clarkson",
        p=p,
        samples=int(a.size),
        violations=int(np.count_nonzero(rel > tol)),
        worst=float(rel[i]),
        witness={"a": float(a[i]), "b": float(b[i])},
        tolerance=tol,
        details={"constant": c, "form": "power" if p >= 2 else "conjugate"},
    )


def transferred_modulus(p, p_prime, eps, rho_p, rho_1_half=None):
    """Modulus at ``p'`` obtained from the modulus at ``p`` (``p' >= p``).

    ``p > 1``: unchanged.  ``p = 1``: minimum of ``rho_1(eps/2)`` and the
    Clarkson term built from ``c_{p'}``.
    """
    p = as_exponent(p)
    p_prime = as_exponent(p_prime)
    if p is not INF and p_prime is not INF and p_prime < p:
        raise ValueError("need p' >= p")
    if p is INF or p > 1.0 or p_prime == p:
        return rho_p
    if p_prime is INF:
        raise ValueError("the transfer from p = 1 to p' = inf is not covered by the Clarkson recipe")
    if rho_1_half is None:
        return None
    c = clarkson_constant(p_prime)
    half = eps / 2.0
    if p_prime >= 2.0:
        term = 1.0 - (1.0 - c * half**p_prime) ** (1.0 / p_prime)
    else:
        q = p_prime / (p_prime - 1.0)
        term = 1.0 - (1.0 - c * half ** (q / p_prime)) ** (1.0 / q)
    return min(rho_1_half, term)


def check_p_implies_pprime(s, p, p_prime, epsilon_grid, n_samples=20_000, seed=0, radius=1.0, tol=TOL, threads=1):
    """Empirical version of "uniformly p-convex implies uniformly p'-convex".

    For each ``eps`` the modulus at ``p`` (and at ``eps/2`` for ``p = 1``) is
    estimated from a pooled sample: an independent stream plus the ``p'``
    triples themselves.  The derived ``p'`` modulus is then tested on every
    ``p'``-qualifying triple.  ``passed`` additionally requires all derived
    moduli to be positive; a vanishing modulus means the premise (uniform
    convexity at ``p``) failed, which is reported with its witness.
    """
    p = as_exponent(p)
    p_prime = as_exponent(p_prime)
    grid = [float(e) for e in epsilon_grid]
    sizes = _chunks(n_samples)

    def draw(stream):
        geos = [_triple_geometry(s, *_sample_triple(s, chunk_rng(seed, stream, k), sizes[k], radius)) for k in range(len(sizes))]
        return {key: (np.concatenate([g[key] for g in geos]) if key != "skipped" else sum(g[key] for g in geos)) for key in geos[0]}

    base = draw(_S_PPRIME * 1000)
    test = draw(_S_PPRIME * 1000 + 1)
    pooled = {k: np.concatenate([base[k], test[k]]) for k in ("x", "y", "z", "dxz", "dyz", "dxy", "dmz")}

    def modulus(level_p, eps):
        mean = p_mean(level_p, pooled["dxz"], pooled["dyz"])
        keep = _trigger(level_p, eps, pooled["dxy"], pooled["dxz"], pooled["dyz"]) & (mean > 0)
        if not np.any(keep):
            return None, None
        rho = 1.0 - pooled["dmz"][keep] / mean[keep]
        i = int(np.argmin(rho))
        idx = np.flatnonzero(keep)[i]
        r = max(float(rho[i]), 0.0)
        return (0.0 if r < 1e-12 else r), _witness(s, x=pooled["x"][idx], y=pooled["y"][idx], z=pooled["z"][idx])

    rows, violations, worst, witness, samples = [], 0, -math.inf, None, 0
    uniform = True
    for eps in grid:
        rho_p, wit_p = modulus(p, eps)
        rho_half, wit_half = (modulus(1.0, eps / 2.0) if p == 1.0 and p_prime != p else (None, None))
        rho_pp = transferred_modulus(p, p_prime, eps, rho_p, rho_half)
        mean = p_mean(p_prime, test["dxz"], test["dyz"])
        keep = _trigger(p_prime, eps, test["dxy"], test["dxz"], test["dyz"]) & (mean > 0)
        samples += int(np.count_nonzero(keep))
        row = {"eps": eps, "rho_p": rho_p, "rho_p_prime": rho_pp, "qualifying": int(np.count_nonzero(keep))}
        if rho_pp is None or rho_pp <= 0.0:
            uniform = False
            row["premise_witness"] = wit_half if p == 1.0 and p_prime != p else wit_p
        if rho_pp is not None and np.any(keep):
            gap = test["dmz"][keep] - (1.0 - rho_pp) * mean[keep]
            violations += int(np.count_nonzero(gap > tol))
            i = int(np.argmax(gap))
            if gap[i] > worst:
                idx = np.flatnonzero(keep)[i]
                worst = float(gap[i])
                witness = _witness(s, x=test["x"][idx], y=test["y"][idx], z=test["z"][idx])
        rows.append(row)
    return CheckReport(
        property="p-implies-p-prime",
        p={"p": p, "p_prime": p_prime},
        samples=samples,
        violations=violations,
        worst=worst,
        witness=witness,
        tolerance=tol,
        details={"space": str(s), "uniform": uniform, "table": rows},
        passed=violations == 0 and uniform,
    )


def check_nearly_uniform(s, family, center, epsilon, hull_depth, seed=0, per_pair_samples=4, pairs_per_level=256):
    """Hull of an ``eps``-separated family must reach strictly inside the ball ``B_r(center)``.

    ``r`` is the smallest radius around ``center`` containing the family.
    Reports ``rho = 1 - dist(center, hull)/r``; passes iff ``rho > 0``.
    """
    pts = s.validate_many(family)
    if pts.shape[0] < 2:
        raise ValueError("a separated family needs at least two points")
    center = s.validate(center)
    n = pts.shape[0]
    for i in range(n):
        d = s.distances_to(pts[i], pts[i + 1 :])
        if d.size and d.min() < epsilon:
            j = i + 1 + int(np.argmin(d))
            raise ValueError(
                f"family is not {epsilon}-separated: points {i} and {j} are {d.min():.6g} apart"
            )
    r = float(s.distances_to(center, pts).max())
    if r == 0.0:
        raise ValueError("family collapses onto the center")
    hull = build_hull(s, pts, hull_depth, per_pair_samples=per_pair_samples, seed=seed, pairs_per_level=pairs_per_level)
    dist, nearest = hull_distance(s, center, hull)
    rho = 1.0 - dist / r
    return CheckReport(
        property="nearly-uniform-convexity",
        samples=len(hull),
        violations=0 if rho > 0 else 1,
        worst=-rho,
        witness={"nearest": s.to_json(nearest)},
        details={"rho": rho, "radius": r, "distance": dist, "epsilon": epsilon, "hull_depth": hull_depth},
    )
