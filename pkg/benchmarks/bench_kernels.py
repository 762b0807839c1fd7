#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Times the four hot kernels (Lloyd iterations, CART split scan, KNN voting,
KDE grid) on pipeline-representative sizes and prints the speedup.

    python benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crimepred.kernels import _pykernels

try:
    from crimepred.kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(rng):
    blobs = np.concatenate(
        [c + 0.05 * rng.standard_normal((200, 2)) for c in ((0, 0), (2, 0), (1, 2), (3, 2), (0, 3), (2, 4), (4, 1))]
    )
    init = blobs[rng.choice(len(blobs), 7, replace=False)].copy()

    x_split = rng.standard_normal((4000, 8))
    y_split = rng.integers(0, 33, 4000).astype(np.int64)

    train_x = rng.standard_normal((2000, 10))
    train_y = rng.integers(0, 33, 2000).astype(np.int64)
    queries = rng.standard_normal((500, 10))

    kde_pts = rng.random((1000, 2))
    xs = np.linspace(-0.5, 1.5, 128)
    ys = np.linspace(-0.5, 1.5, 128)

    return {
        "lloyd (N=1400, k=7)": lambda impl: impl.lloyd(blobs, init, 300, 1e-6),
        "best_split (n=4000, m=8, C=33)": lambda impl: impl.best_split(x_split, y_split, 33, 1),
        "knn_votes (N=2000, M=500, k=5)": lambda impl: impl.knn_votes(train_x, train_y, queries, 5, 33),
        "kde_grid (N=1000, 128x128)": lambda impl: impl.kde_grid(kde_pts, xs, ys, 0.05),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    width = max(len(name) for name in cases)
    header = f"{'kernel':<{width}}  {'python':>10}  {'cython':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_py = best_of(lambda: call(_pykernels), args.repeats)
        if _ckernels is None:
            print(f"{name:<{width}}  {t_py * 1e3:>8.2f}ms  {'n/a':>10}  {'n/a':>8}")
            continue
        t_cy = best_of(lambda: call(_ckernels), args.repeats)
        print(f"{name:<{width}}  {t_py * 1e3:>8.2f}ms  {t_cy * 1e3:>8.2f}ms  {t_py / t_cy:>7.1f}x")
    if _ckernels is None:
        print("\ncompiled extension not available; showing fallback timings only")


if __name__ == "__main__":
    main()
