"""Batched distance and geodesic kernels.

Every kernel works row-wise on two ``(n, d)`` float arrays.  Cone points use
the packed layout ``[direction..., radius]``.

Two implementations are kept side by side: plain loops compiled with
``numba.njit`` and vectorised numpy.  The numba path is used when numba
imports and ``UCONVEX_NO_NUMBA`` is unset (or ``0``); otherwise the numpy
path is bound.  Both are importable explicitly through :func:`get_backend`.
"""

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAS_NUMBA = False

_DISABLED = os.environ.get("UCONVEX_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy path


def _np_euclid_dist(a, b):
    diff = a - b
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _np_lp_dist(a, b, p):
    diff = np.abs(a - b)
    if math.isinf(p):
        return diff.max(axis=1)
    scale = diff.max(axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sum((diff / safe[:, None]) ** p, axis=1) ** (1.0 / p)


def _np_cone_dist(a, b):
    ta = a[:, -1]
    tb = b[:, -1]
    alpha = np.minimum(np.pi, _np_euclid_dist(a[:, :-1], b[:, :-1]))
    s = np.sin(0.5 * alpha)
    d2 = (ta - tb) ** 2 + 4.0 * ta * tb * s * s
    return np.sqrt(np.maximum(d2, 0.0))


def _np_cone_geodesic(a, b, t):
    xa = a[:, :-1]
    xb = b[:, :-1]
    ta = a[:, -1]
    tb = b[:, -1]
    alpha = np.minimum(np.pi, _np_euclid_dist(xa, xb))
    px = (1.0 - t) * ta + t * tb * np.cos(alpha)
    py = t * tb * np.sin(alpha)
    r = np.hypot(px, py)
    phi = np.arctan2(py, px)
    frac = np.where(alpha > 0, phi / np.where(alpha > 0, alpha, 1.0), 0.0)
    out = np.empty_like(a)
    out[:, :-1] = xa + frac[:, None] * (xb - xa)
    out[:, -1] = r
    out[r == 0.0, :-1] = 0.0
    return out


def _np_linear_geodesic(a, b, t):
    return a + t[:, None] * (b - a)


# ---------------------------------------------------------------------------
# numba path


def _nb_euclid_dist(a, b):
    n, d = a.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(d):
            diff = a[i, k] - b[i, k]
            acc += diff * diff
        out[i] = math.sqrt(acc)
    return out


def _nb_lp_dist(a, b, p):
    n, d = a.shape
    out = np.empty(n)
    for i in range(n):
        scale = 0.0
        for k in range(d):
            v = abs(a[i, k] - b[i, k])
            if v > scale:
                scale = v
        if math.isinf(p) or scale == 0.0:
            out[i] = scale
            continue
        acc = 0.0
        for k in range(d):
            acc += (abs(a[i, k] - b[i, k]) / scale) ** p
        out[i] = scale * acc ** (1.0 / p)
    return out


def _nb_cone_dist(a, b):
    n, d = a.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(d - 1):
            diff = a[i, k] - b[i, k]
            acc += diff * diff
        alpha = min(math.pi, math.sqrt(acc))
        ta = a[i, d - 1]
        tb = b[i, d - 1]
        s = math.sin(0.5 * alpha)
        d2 = (ta - tb) * (ta - tb) + 4.0 * ta * tb * s * s
        out[i] = math.sqrt(d2) if d2 > 0.0 else 0.0
    return out


def _nb_cone_geodesic(a, b, t):
    n, d = a.shape
    out = np.empty_like(a)
    for i in range(n):
        acc = 0.0
        for k in range(d - 1):
            diff = a[i, k] - b[i, k]
            acc += diff * diff
        alpha = min(math.pi, math.sqrt(acc))
        ta = a[i, d - 1]
        tb = b[i, d - 1]
        s = t[i]
        px = (1.0 - s) * ta + s * tb * math.cos(alpha)
        py = s * tb * math.sin(alpha)
        r = math.hypot(px, py)
        frac = math.atan2(py, px) / alpha if alpha > 0.0 else 0.0
        if r == 0.0:
            for k in range(d - 1):
                out[i, k] = 0.0
        else:
            for k in range(d - 1):
                out[i, k] = a[i, k] + frac * (b[i, k] - a[i, k])
        out[i, d - 1] = r
    return out


def _nb_linear_geodesic(a, b, t):
    n, d = a.shape
    out = np.empty_like(a)
    for i in range(n):
        s = t[i]
        for k in range(d):
            out[i, k] = a[i, k] + s * (b[i, k] - a[i, k])
    return out


_NAMES = ("euclid_dist", "lp_dist", "cone_dist", "cone_geodesic", "linear_geodesic")

numpy_backend = SimpleNamespace(
    name="numpy", **{name: globals()["_np_" + name] for name in _NAMES}
)

if HAS_NUMBA:
    _jit = numba.njit(cache=True, nogil=True, fastmath=False)
    numba_backend = SimpleNamespace(
        name="numba", **{name: _jit(globals()["_nb_" + name]) for name in _NAMES}
    )
else:  # pragma: no cover
    numba_backend = None


def get_backend(name=None):
    """Return the kernel namespace ``name`` (``"numba"``/``"numpy"``) or the active one."""
    if name is None:
        return active
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        if numba_backend is None:
            raise RuntimeError("numba is not installed")
        return numba_backend
    raise ValueError(f"unknown kernel backend {name!r}")


active = numba_backend if (HAS_NUMBA and not _DISABLED) else numpy_backend
BACKEND = active.name


def _as_t(t, n):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return np.full(n, float(t))
    return np.ascontiguousarray(t)


def euclid_dist(a, b):
    return active.euclid_dist(a, b)


def lp_dist(a, b, p):
    return active.lp_dist(a, b, float(p))


def cone_dist(a, b):
    return active.cone_dist(a, b)


def cone_geodesic(a, b, t):
    return active.cone_geodesic(a, b, _as_t(t, a.shape[0]))


def linear_geodesic(a, b, t):
    return active.linear_geodesic(a, b, _as_t(t, a.shape[0]))
