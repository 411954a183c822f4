#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs each kernel on production-scale shapes (1600-element array, a few thousand
imaging points) with both backends and prints a timing table plus the
worst relative deviation between them.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from emkirch.kernels import get_backend


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--elements", type=int, default=1600)
    parser.add_argument("--points", type=int, default=2048)
    args = parser.parse_args()

    try:
        compiled = get_backend("compiled")
    except ImportError:
        print("compiled backend not built; nothing to compare")
        return
    python = get_backend("python")

    rng = np.random.default_rng(0)
    lam = 0.125
    k = 2 * np.pi / lam
    a, L = 20 * lam, 100 * lam
    n = int(np.sqrt(args.elements))
    coords = (np.arange(n) + 0.5) * a / n - a / 2
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    el = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(n * n)])
    w = np.full(el.shape[0], (a / n) ** 2)
    pts = np.column_stack(
        [
            rng.uniform(-8 * lam, 8 * lam, (args.points, 2)),
            rng.uniform(L - lam, L + lam, args.points),
        ]
    )
    amp = rng.standard_normal((el.shape[0], 3)) + 1j * rng.standard_normal(
        (el.shape[0], 3)
    )
    y2 = np.array([0.0, 0.0, L])

    cases = {
        "green_field": lambda b: b.green_field(el, amp, pts, k, 1e-12),
        "green_stack": lambda b: b.green_stack(pts[:256], el, k, 1e-12, True, w),
        "psf_moments": lambda b: b.psf_moments(el, w, pts, 0.0),
        "psf_diag": lambda b: b.psf_diag(el, w, pts, k, 0.0),
        "psf_pair": lambda b: b.psf_pair(el, w, pts, y2, k, 0.0),
    }

    print(f"{el.shape[0]} elements, {args.points} points, best of {args.repeat}")
    print(f"{'kernel':<14}{'python':>10}{'compiled':>10}{'speedup':>9}{'max rel dev':>13}")
    for name, call in cases.items():
        t_py, out_py = timeit(lambda: call(python), args.repeat)
        t_cy, out_cy = timeit(lambda: call(compiled), args.repeat)
        scale = np.abs(out_py).max()
        dev = np.abs(np.asarray(out_py) - np.asarray(out_cy)).max() / scale
        print(f"{name:<14}{t_py:>9.3f}s{t_cy:>9.3f}s{t_py / t_cy:>8.1f}x{dev:>13.2e}")


if __name__ == "__main__":
    main()
