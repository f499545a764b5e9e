"""Compare the compiled and numpy Sinkhorn reductions.

Usage::

    python benchmarks/bench_kernels.py [--sizes 100,300,1000] [--repeat 5]

Prints one line per (kernel, size) with the best wall time of each backend,
the speedup and the max abs difference between the two results. A final
section times a full HK solve with either backend.
"""

import argparse
import timeit

import numpy as np

from tangentot import _kernels
from tangentot.manifold import Euclidean
from tangentot.measure import DiscreteMeasure
from tangentot.solver import SolverConfig, build_cost_hk, sinkhorn_hk


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    X, Y = rng.random((n, 2)), rng.random((n, 2))
    C = ((X[:, None] - Y[None]) ** 2).sum(-1)
    C[rng.random((n, n)) < 0.05] = np.inf
    return C, rng.standard_normal(n) * 0.1, rng.standard_normal(n) * 0.1


def bench_kernels(sizes, repeat):
    py, cy = _kernels.python_backend, _kernels.compiled_backend
    print(f"{'kernel':<14}{'n':>6}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'max diff':>12}")
    for n in sizes:
        C, f, g = _inputs(n)
        eps = 1e-2
        calls = {
            "softmin_rows": lambda b: b.softmin_rows(C, g, eps),
            "softmin_cols": lambda b: b.softmin_cols(C, f, eps),
            "log_plan": lambda b: b.log_plan(C, f, g, eps),
        }
        for name, fn in calls.items():
            tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat)) * 1e3
            if cy is None:
                print(f"{name:<14}{n:>6}{tp:>14.3f}{'n/a':>14}{'':>10}{'':>12}")
                continue
            tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat)) * 1e3
            a, b = fn(py), fn(cy)
            fin = np.isfinite(a)
            diff = float(np.max(np.abs(a[fin] - b[fin]))) if fin.any() else 0.0
            print(f"{name:<14}{n:>6}{tp:>14.3f}{tc:>14.3f}{tp / tc:>10.2f}{diff:>12.2e}")


def bench_solve(n, repeat):
    rng = np.random.default_rng(1)
    E = Euclidean(2)
    mu0 = DiscreteMeasure(E, rng.random((n, 2)), np.full(n, 1.0 / n))
    mu1 = DiscreteMeasure(E, rng.random((n, 2)) + 0.1, np.full(n, 1.0 / n))
    C = build_cost_hk(None, mu0, mu1, 1.0)
    cfg = SolverConfig(epsilon_target=1e-3, kappa=1.0)
    saved = _kernels._impl
    for label, impl in (("python", _kernels.python_backend), ("cython", _kernels.compiled_backend)):
        if impl is None:
            continue
        _kernels._impl = impl
        try:
            t = min(timeit.repeat(lambda: sinkhorn_hk(C, mu0, mu1, cfg), number=1, repeat=repeat))
            plan, _ = sinkhorn_hk(C, mu0, mu1, cfg)
        finally:
            _kernels._impl = saved
        print(f"solve_hk n={n:<5} {label:<7} {t * 1e3:10.1f} ms  iterations={plan.iterations}"
              f"  value={plan.value:.12g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,300,1000")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve-size", type=int, default=300)
    args = ap.parse_args()
    print(f"active backend: {_kernels.BACKEND}")
    bench_kernels([int(s) for s in args.sizes.split(",")], args.repeat)
    bench_solve(args.solve_size, max(1, args.repeat // 2))


if __name__ == "__main__":
    main()
