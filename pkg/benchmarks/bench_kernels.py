"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--rows 200000] [--dim 8] [--repeat 5]

Each kernel is timed on identical inputs for both backends (numba after a
warm-up call, so compilation is excluded) and the outputs are compared.
"""

import argparse
import time

import numpy as np

from uconvex import kernels


def _inputs(rng, rows, dim):
    a = rng.normal(size=(rows, dim))
    b = rng.normal(size=(rows, dim))
    # cone points: small base angles, positive radii in the last column
    ca = np.column_stack([0.3 * rng.normal(size=(rows, dim - 1)), rng.uniform(0.5, 1.5, rows)])
    cb = np.column_stack([0.3 * rng.normal(size=(rows, dim - 1)), rng.uniform(0.5, 1.5, rows)])
    t = rng.random(rows)
    return {
        "euclid_dist": (a, b),
        "lp_dist": (a, b, 3.0),
        "cone_dist": (ca, cb),
        "cone_geodesic": (ca, cb, t),
        "linear_geodesic": (a, b, t),
    }


def _best_time(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    inputs = _inputs(rng, args.rows, args.dim)
    np_be = kernels.get_backend("numpy")
    try:
        nb_be = kernels.get_backend("numba")
    except RuntimeError:
        nb_be = None

    print(f"rows={args.rows} dim={args.dim} repeat={args.repeat} active={kernels.BACKEND}")
    print(f"{'kernel':<16} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max |diff|':>11}")
    for name, call_args in inputs.items():
        t_np, out_np = _best_time(getattr(np_be, name), call_args, args.repeat)
        if nb_be is None:
            print(f"{name:<16} {t_np * 1e3:11.2f} {'n/a':>11}")
            continue
        fn = getattr(nb_be, name)
        fn(*(x[:2] if isinstance(x, np.ndarray) else x for x in call_args))  # compile / load cache
        t_nb, out_nb = _best_time(fn, call_args, args.repeat)
        diff = float(np.max(np.abs(out_np - out_nb)))
        print(f"{name:<16} {t_np * 1e3:11.2f} {t_nb * 1e3:11.2f} {t_np / t_nb:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
