"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats 30]

Times the hot kernels (Gaussian KDE, quantiles, bin counts, gap scans) plus
one end-to-end scoring workload (the 24-spec tension battery on a generated
puzzle) under each backend.
"""

from __future__ import annotations

import argparse
import importlib
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_kernels(impl, repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(0)
    values = np.sort(rng.normal(50, 12, 2000))
    grid = np.linspace(values[0] - 10, values[-1] + 10, 512)
    out = {
        "gaussian_kde(2000x512)": _time(lambda: impl.gaussian_kde(values, 3.0, grid),
                                        repeats),
        "quantile_sorted(x200)": _time(
            lambda: [impl.quantile_sorted(values, q)
                     for q in np.linspace(0, 1, 200)], repeats),
        "bin_counts(2000x64)": _time(
            lambda: impl.bin_counts(values, float(values[0]), 1.5, 64), repeats),
        "gap_scan(2000)": _time(lambda: impl.gap_scan(values, 0.5), repeats),
    }
    return out


def bench_battery(repeats: int) -> float:
    from showhide.puzzle_gen import default_params, gen_dataset, verify_puzzle
    from showhide.signal_rubric import RubricParams

    ds, puzzle = gen_dataset(default_params("peaks_gaps", seed=7))
    params = RubricParams()
    return _time(lambda: verify_puzzle(ds, puzzle, params), max(3, repeats // 10))


def run_backend(backend: str, repeats: int) -> None:
    from showhide import kernels

    if kernels.BACKEND != backend:
        print(f"  ({backend} backend unavailable in this process)")
        return
    impl = importlib.import_module(
        f"showhide.kernels._{'native' if backend == 'native' else 'fallback'}")
    for name, secs in bench_kernels(impl, repeats).items():
        print(f"  {name:<26} {secs * 1e3:9.3f} ms")
    print(f"  {'tension battery (24 specs)':<26} {bench_battery(repeats) * 1e3:9.3f} ms")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--backend", choices=["native", "fallback"], default=None,
                        help=argparse.SUPPRESS)  # internal: single-backend child run
    args = parser.parse_args()

    if args.backend:
        print(f"{args.backend}:")
        run_backend(args.backend, args.repeats)
        return

    env = dict(os.environ)
    env.pop("SHOWHIDE_PURE_PYTHON", None)
    subprocess.run([sys.executable, __file__, "--backend", "native",
                    "--repeats", str(args.repeats)], env=env, check=True)
    env["SHOWHIDE_PURE_PYTHON"] = "1"
    subprocess.run([sys.executable, __file__, "--backend", "fallback",
                    "--repeats", str(args.repeats)], env=env, check=True)


if __name__ == "__main__":
    main()
