#!/usr/bin/env python3
"""Timing comparison of the compiled and numpy kernel backends.

Runs each coordinatewise kernel on a few sizes and reports the median
per-call time for both implementations plus the speedup. Also verifies on
every size that the two backends agree bitwise, which is the property the
solvers rely on (trajectories must not depend on the backend).

Usage: python benchmarks/bench_kernels.py [--sizes 1000,100000] [--repeat 200]
"""

import argparse
import sys
import time

import numpy as np

from sesopt._kernels import py_backend

try:
    from sesopt._kernels import _fast
except ImportError:
    _fast = None


def _median_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _check_equal(name, a, b):
    if isinstance(a, tuple):
        ok = all(np.array_equal(x, y) for x, y in zip(a, b))
    else:
        ok = np.array_equal(a, b)
    if not ok:
        print(f"BACKEND MISMATCH in {name}", file=sys.stderr)
        sys.exit(1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000",
                    help="comma-separated vector lengths")
    ap.add_argument("--repeat", type=int, default=200,
                    help="calls per timing sample")
    args = ap.parse_args()

    if _fast is None:
        print("compiled backend not built (pip install rebuilds it); "
              "nothing to compare")
        return 0

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(7)
    mu, eps, c = 1e-3, 1e-8, 2.5

    rows = []
    for n in sizes:
        x = rng.standard_normal(n)
        atr = rng.standard_normal(n)
        cn = np.abs(rng.standard_normal(n)) + 0.1
        cn[:: max(n // 50, 1)] = 0.0  # exercise the skipped-coordinate branch
        cases = [
            ("soft_threshold_vec", (x, mu)),
            ("ssf_direction", (x, atr, c, mu)),
            ("pcd_direction", (x, atr, cn, mu)),
            ("smooth_abs", (x, eps)),
            ("smooth_abs_grad", (x, eps)),
            ("smooth_abs_hess", (x, eps)),
        ]
        for name, a in cases:
            f_py = getattr(py_backend, name)
            f_c = getattr(_fast, name)
            _check_equal(name, f_py(*a), f_c(*a))
            t_py = _median_time(f_py, a, args.repeat)
            t_c = _median_time(f_c, a, args.repeat)
            rows.append((name, n, t_py * 1e6, t_c * 1e6, t_py / t_c))

    print(f"{'kernel':<20} {'n':>8} {'python (us)':>12} "
          f"{'compiled (us)':>14} {'speedup':>8}")
    for name, n, t_py, t_c, sp in rows:
        print(f"{name:<20} {n:>8} {t_py:>12.2f} {t_c:>14.2f} {sp:>7.2f}x")
    print("\nall outputs bitwise identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
