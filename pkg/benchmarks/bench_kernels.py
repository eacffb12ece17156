"""Benchmark the compiled accumulation kernel against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--samples N] [--buckets B] [--reps R]
"""
from __future__ import annotations

import argparse
import importlib
import time

import numpy as np

from frameport._kernels import BACKEND, conj_superop_sums
from frameport._kernels import _fallback
from frameport.groups import sample_su2, su2_matrix


def _run(fn, mats, buckets, n_buckets, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        sums, counts = fn(mats, buckets, n_buckets)
        best = min(best, time.perf_counter() - t0)
    return best, sums, counts


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=2 * 10 ** 6)
    parser.add_argument("--buckets", type=int, default=64)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    mats = su2_matrix(sample_su2(rng, args.samples))
    buckets = rng.integers(0, args.buckets, size=args.samples)

    print(f"active backend: {BACKEND}")
    print(f"samples {args.samples}, buckets {args.buckets}, "
          f"best of {args.reps} runs\n")

    t_py, s_py, c_py = _run(_fallback.conj_superop_sums, mats, buckets,
                            args.buckets, args.reps)
    rate = args.samples / t_py / 1e6
    print(f"python fallback : {t_py * 1e3:8.1f} ms   {rate:6.1f} M samples/s")

    if BACKEND == "compiled":
        core = importlib.import_module("frameport._kernels._mc_core")
        t_c, s_c, c_c = _run(core.conj_superop_sums, mats, buckets,
                             args.buckets, args.reps)
        rate = args.samples / t_c / 1e6
        print(f"compiled kernel : {t_c * 1e3:8.1f} ms   "
              f"{rate:6.1f} M samples/s")
        print(f"speedup         : {t_py / t_c:8.2f}x")
        dev = max(np.max(np.abs(s_c - s_py)), np.max(np.abs(c_c - c_py)))
        print(f"max deviation   : {dev:.3e}")
        assert dev < 1e-9, "backends disagree"
    else:
        print("compiled kernel unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
