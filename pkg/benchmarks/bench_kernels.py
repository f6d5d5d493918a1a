"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage:  python3 benchmarks/bench_kernels.py [--quick]

Covers the three hot paths: nearest-center search (dominates encoding and
K-means), VLAD residual accumulation, and the SVM coordinate-descent epoch.
"""

import argparse
import time

import numpy as np

from gridvlad import _kernels_py

try:
    from gridvlad import _kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(name, make_args, runner, repeats):
    args = make_args()
    t_py = timeit(lambda: runner(_kernels_py, *args), repeats)
    row = f"{name:<42s} python {t_py * 1e3:9.2f} ms"
    if compiled is not None:
        args = make_args()
        t_cy = timeit(lambda: runner(compiled, *args), repeats)
        row += f"   cython {t_cy * 1e3:9.2f} ms   speedup {t_py / t_cy:6.2f}x"
    print(row)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    opts = parser.parse_args()
    scale = 0.25 if opts.quick else 1.0
    repeats = 3

    if compiled is None:
        print("compiled extension not available; timing the fallback only\n")

    rng = np.random.default_rng(0)

    def nearest_args(n, d, k):
        def make():
            x = np.ascontiguousarray(rng.normal(size=(n, d)))
            c = np.ascontiguousarray(rng.normal(size=(k, d)))
            return (x, c)
        return make

    def run_nearest(mod, x, c):
        mod.nearest_centers(x, c)

    # Sized after a real fold: tens of videos of T*a^2 descriptors.
    for (n, d, k) in [(20_000, 64, 128), (50_000, 64, 64), (20_000, 128, 256)]:
        n = int(n * scale)
        bench_case(
            f"nearest_centers n={n} D={d} K={k}", nearest_args(n, d, k),
            run_nearest, repeats,
        )

    def residual_args(n, d, k):
        def make():
            x = np.ascontiguousarray(rng.normal(size=(n, d)))
            c = np.ascontiguousarray(rng.normal(size=(k, d)))
            idx = rng.integers(0, k, size=n).astype(np.int64)
            return (x, c, idx)
        return make

    def run_residual(mod, x, c, idx):
        mod.residual_sums(x, c, idx)

    for (n, d, k) in [(200_000, 64, 128), (200_000, 128, 64)]:
        n = int(n * scale)
        bench_case(
            f"residual_sums   n={n} D={d} K={k}", residual_args(n, d, k),
            run_residual, repeats,
        )

    def dcd_args(n, d):
        def make():
            x = np.ascontiguousarray(rng.normal(size=(n, d)))
            y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
            qdiag = np.einsum("nd,nd->n", x, x)
            perm = rng.permutation(n).astype(np.int64)
            return (x, y, qdiag, perm)
        return make

    def run_dcd(mod, x, y, qdiag, perm):
        alpha = np.zeros(x.shape[0])
        w = np.zeros(x.shape[1])
        for _ in range(10):
            mod.dcd_epoch(x, y, alpha, w, 100.0, qdiag, perm)

    for (n, d) in [(500, 4096), (2000, 1024)]:
        n = int(n * scale)
        bench_case(
            f"dcd_epoch x10   n={n} dim={d}", dcd_args(n, d), run_dcd, repeats,
        )


if __name__ == "__main__":
    main()
