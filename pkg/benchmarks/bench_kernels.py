"""Timing comparison of the compiled and pure NumPy kernel backends.

Runs the two hot kernels on identical inputs, checks the outputs agree
bitwise, and reports per-backend throughput in branch-steps per second.

Usage: python3 benchmarks/bench_kernels.py [--m 2048] [--nb 512] [--loops 5]
"""
import argparse
import time

import numpy as np

from driftmv import backend


def bench(fn, args, loops):
    best = float("inf")
    for _ in range(loops):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=2048)
    ap.add_argument("--nb", type=int, default=512)
    ap.add_argument("--loops", type=int, default=5)
    args = ap.parse_args()

    names = backend.available_backends()
    print(f"available backends: {', '.join(names)}")
    rng = np.random.default_rng(7)
    delta = 1.0 / args.nb
    dnu = rng.standard_normal((args.m, args.nb)) * np.sqrt(delta)
    steps = args.m * args.nb

    results = {}
    for name in names:
        mod = backend.load_backend(name)
        t_b = bench(mod.branch_stats, (0.5, dnu, delta, 0.15, 0.6, 0.05),
                    args.loops)
        t_e = bench(mod.example_branch_stats, (0.1, dnu, delta), args.loops)
        results[name] = (mod.branch_stats(0.5, dnu, delta, 0.15, 0.6, 0.05),
                         mod.example_branch_stats(0.1, dnu, delta))
        print(f"{name:>3}: branch_stats  {t_b * 1e3:8.2f} ms "
              f"({steps / t_b / 1e6:8.1f} Msteps/s)")
        print(f"{name:>3}: example_stats {t_e * 1e3:8.2f} ms "
              f"({steps / t_e / 1e6:8.1f} Msteps/s)")

    if len(names) == 2:
        a, b = (results[n] for n in names)
        same = all(
            np.array_equal(x, y)
            for x, y in list(zip(a[0], b[0])) + list(zip(a[1], b[1]))
        )
        print(f"bitwise agreement: {'yes' if same else 'NO'}")
        if not same:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
