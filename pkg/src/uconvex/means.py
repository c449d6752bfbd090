"""Two-point means: power means, L-means and Orlicz means."""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class _Inf(enum.Enum):
    INF = "inf"

    def __float__(self):
        return math.inf

    def __repr__(self):
        return "INF"


#: exponent marker for the max-mean; ``p_mean(INF, a, b) == max(a, b)`` exactly
INF = _Inf.INF

_MAX_ITER = 200
_WIDTH = 1e-12


def as_exponent(p):
    """Normalise an exponent: ``INF``, ``"inf"`` and ``math.inf`` all map to ``INF``."""
    if p is INF:
        return INF
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        p = float(p)
    p = float(p)
    if math.isinf(p) and p > 0:
        return INF
    if not p >= 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    return p


def p_mean(p, a, b):
    """``(a^p/2 + b^p/2)^(1/p)``, or ``max(a, b)`` for ``p = INF``.  Works on arrays."""
    p = as_exponent(p)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("means are defined for nonnegative arguments")
    if p is INF:
        out = np.maximum(a, b)
    else:
        hi = np.maximum(a, b)
        safe = np.where(hi > 0, hi, 1.0)
        out = hi * (0.5 * (a / safe) ** p + 0.5 * (b / safe) ** p) ** (1.0 / p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OrliczFunction:
    """Strictly increasing convex ``L`` on ``(0, inf)`` with ``L(1) = 1`` and ``L(0+) = 0``.

    ``inverse`` and ``derivative`` are optional closed forms; bisection and
    central differences are used otherwise.
    """

    func: Callable[[np.ndarray], np.ndarray]
    descriptor: str
    inverse: Optional[Callable[[float], float]] = None
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r > 0, self.func(np.maximum(r, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def scaled(self, lam):
        """``L_lambda(r) = L(r / lambda)``."""
        if lam <= 0:
            raise ValueError("lambda must be positive")
        return lambda r: self(np.asarray(r, dtype=float) / lam)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        if self.derivative is not None:
            return self.derivative(r)
        h = 1e-6 * np.maximum(1.0, r)
        return (self(r + h) - self(np.maximum(r - h, 0.0))) / (r + h - np.maximum(r - h, 0.0))

    def inv(self, v):
        """``L^{-1}(v)`` for ``v >= 0``."""
        if v <= 0:
            return 0.0
        if self.inverse is not None:
            return float(self.inverse(v))
        hi = 1.0
        while self(hi) < v:
            hi *= 2.0
        lo = 0.0
        for _ in range(_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if self(mid) < v:
                lo = mid
            else:
                hi = mid
            if hi - lo < _WIDTH * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    def check(self, grid=None):
        """Sampled test of the defining properties; returns a list of failure messages."""
        grid = np.linspace(1e-3, 8.0, 400) if grid is None else np.asarray(grid, dtype=float)
        vals = self(grid)
        problems = []
        if abs(self(1.0) - 1.0) > 1e-12:
            problems.append("L(1) != 1")
        if np.any(np.diff(vals) <= 0):
            problems.append("not strictly increasing")
        mid = self(0.5 * (grid[:-1] + grid[1:]))
        if np.any(mid > 0.5 * (vals[:-1] + vals[1:]) + 1e-12 * np.abs(vals[1:])):
            problems.append("secant test for convexity failed")
        if self(1e-9) > 1e-6:
            problems.append("L(r) does not vanish as r -> 0")
        return problems


def power_function(p):
    """``L(r) = r^p``."""
    p = float(p)
    if not p >= 1.0 or math.isinf(p):
        raise ValueError("power family needs finite p >= 1")
    return OrliczFunction(
        func=lambda r: r**p,
        descriptor=f"pow:{p:g}",
        inverse=lambda v: v ** (1.0 / p),
        derivative=lambda r: p * np.asarray(r, dtype=float) ** (p - 1.0),
    )


_E1 = math.e - 1.0

EXP_MINUS_ONE = OrliczFunction(
    func=lambda r: np.expm1(r) / _E1,
    descriptor="exp-minus-one",
    inverse=lambda v: math.log1p(v * _E1),
    derivative=lambda r: np.exp(r) / _E1,
)


def tabulated_function(r_values, l_values, descriptor="table"):
    """Piecewise-linear ``L`` through ``(0, 0)`` and the given knots."""
    r = np.concatenate([[0.0], np.asarray(r_values, dtype=float)])
    v = np.concatenate([[0.0], np.asarray(l_values, dtype=float)])
    if np.any(np.diff(r) <= 0):
        raise ValueError("table abscissae must be strictly increasing and positive")
    slope = (v[-1] - v[-2]) / (r[-1] - r[-2])

    def func(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= r[-1], np.interp(x, r, v), v[-1] + slope * (x - r[-1]))

    out = OrliczFunction(func=func, descriptor=descriptor)
    problems = out.check(np.linspace(r[1] * 0.5, r[-1] * 1.5, 200))
    if problems:
        raise ValueError("invalid Orlicz table: " + "; ".join(problems))
    return out


def parse_orlicz(spec):
    """CLI names: ``pow:<p>`` or ``exp-minus-one``."""
    spec = spec.strip()
    if spec == "exp-minus-one":
        return EXP_MINUS_ONE
    if spec.startswith("pow:"):
        return power_function(float(spec[4:]))
    raise ValueError(f"unknown Orlicz function {spec!r}")


def l_mean(L, a, b):
    """``L^{-1}(L(a)/2 + L(b)/2)`` with ``L(0) := 0``."""
    a = float(a)
    b = float(b)
    if a < 0 or b < 0:
        raise ValueError("means are defined for nonnegative arguments")
    if a == b:
        return a
    return L.inv(0.5 * L(a) + 0.5 * L(b))


def orlicz_mean(L, a, b):
    """``inf{t > 0 : L(a/t)/2 + L(b/t)/2 <= 1}`` by monotone bisection in ``t``."""
    a = float(a)
    b = float(b)
    if a < 0 or b < 0:
        raise ValueError("means are defined for nonnegative arguments")
    hi = max(a, b)
    if hi == 0.0:
        return 0.0
    return _bisect_scale(lambda t: 0.5 * L(a / t) + 0.5 * L(b / t), hi)


def _bisect_scale(phi, hi_ref):
    """Smallest ``t`` with ``phi(t) <= 1`` for ``phi`` nonincreasing in ``t``.

    Bracket ``[eps * hi_ref, 2 * hi_ref]``; ``phi(2 hi_ref) <= L(1/2) < 1``
    because every argument is at most ``1/2`` there.
    """
    lo = sys.float_info.epsilon * hi_ref
    hi = 2.0 * hi_ref
    while phi(hi) > 1.0:  # only for non-standard L
        hi *= 2.0
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo < _WIDTH * hi_ref:
            break
    return hi


def orlicz_norm(L, values, weights):
    """``inf{t > 0 : sum_i w_i L(v_i / t) <= 1}``; the two-point Orlicz mean is the case ``w = (1/2, 1/2)``."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    hi = float(values.max()) if values.size else 0.0
    if hi == 0.0:
        return 0.0
    return _bisect_scale(lambda t: float(np.dot(weights, L(values / t))), hi)
