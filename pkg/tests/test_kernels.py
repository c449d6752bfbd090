import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uconvex import kernels

numba_backend = pytest.importorskip("numba") and kernels.get_backend("numba")
numpy_backend = kernels.get_backend("numpy")


def _pair(seed, n, d, cone=False):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, d))
    b = rng.normal(size=(n, d))
    if cone:
        a[:, -1] = np.abs(a[:, -1])
        b[:, -1] = np.abs(b[:, -1])
        a[: n // 4, -1] = 0.0  # apex rows
    return a, b, rng.random(n)


@given(st.integers(0, 2**32 - 1), st.integers(1, 50), st.integers(2, 7))
def test_backends_agree_on_distances(seed, n, d):
    a, b, _ = _pair(seed, n, d)
    for name in ("euclid_dist", "cone_dist"):
        np.testing.assert_allclose(getattr(numba_backend, name)(a, b), getattr(numpy_backend, name)(a, b), rtol=1e-12, atol=1e-14)
    for p in (1.0, 1.5, 3.0, np.inf):
        np.testing.assert_allclose(numba_backend.lp_dist(a, b, p), numpy_backend.lp_dist(a, b, p), rtol=1e-12, atol=1e-14)


@given(st.integers(0, 2**32 - 1), st.integers(1, 50), st.integers(2, 7))
def test_backends_agree_on_geodesics(seed, n, d):
    a, b, t = _pair(seed, n, d, cone=True)
    np.testing.assert_allclose(numba_backend.linear_geodesic(a, b, t), numpy_backend.linear_geodesic(a, b, t), atol=1e-13)
    np.testing.assert_allclose(numba_backend.cone_geodesic(a, b, t), numpy_backend.cone_geodesic(a, b, t), atol=1e-12)


def test_scalar_t_is_broadcast():
    a, b, _ = _pair(0, 5, 3)
    out = kernels.linear_geodesic(a, b, 0.25)
    np.testing.assert_allclose(out, a + 0.25 * (b - a))


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_flag_selects_numpy_fallback():
    env = dict(os.environ, UCONVEX_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from uconvex import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"
