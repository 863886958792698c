"""Time the numba and numpy versions of each hot kernel on representative sizes.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20] [--scale 1.0]

Sizes follow the largest public attribute benchmark (312 attributes, 200
classes, batch 128). The first numba call is excluded as compilation.
"""

import argparse
import time

import numpy as np

from galzsl import _kernels as K


def _cases(scale, rng):
    D = max(4, int(312 * scale))
    C = max(4, int(200 * scale))
    n = max(8, int(128 * scale))
    bits = (rng.random((C, D)) < 0.3).astype(np.float64)
    weights = rng.random(C) + 0.1
    rho_s = np.corrcoef(rng.standard_normal((D, 50)))
    rho_u = np.corrcoef(rng.standard_normal((D, 50)))
    delta = np.abs(rho_s - rho_u)
    assignment = rng.integers(0, 10, D).astype(np.int64)
    scores = rng.standard_normal((n, C))
    y = rng.integers(0, C, n).astype(np.int64)
    points = rng.standard_normal((D, 4))
    centers = rng.standard_normal((10, 4))
    return {
        "weighted_phi": (bits, weights),
        "delta_corr_matrix": (rho_s, rho_u),
        "group_max": (delta, assignment, 10),
        "rank_hinge[sje]": (scores, y, 1.0, 1),
        "rank_hinge[ale]": (scores, y, 1.0, 2),
        "nearest_center": (points, centers),
    }


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"numba available: {K.HAVE_NUMBA}; active backend: {K.backend()}")
    print(f"{'kernel':<20} {'numpy (ms)':>11} {'numba (ms)':>11} {'speedup':>8}")
    for name, case in _cases(args.scale, rng).items():
        base = name.split("[")[0]
        f_np = getattr(K, base + "_np")
        t_np = _time(f_np, case, args.repeat)
        if K.HAVE_NUMBA:
            f_nb = getattr(K, base + "_nb")
            f_nb(*case)  # compile
            t_nb = _time(f_nb, case, args.repeat)
            print(f"{name:<20} {t_np * 1e3:11.3f} {t_nb * 1e3:11.3f} {t_np / t_nb:8.2f}")
        else:
            print(f"{name:<20} {t_np * 1e3:11.3f} {'n/a':>11} {'':>8}")


if __name__ == "__main__":
    main()
