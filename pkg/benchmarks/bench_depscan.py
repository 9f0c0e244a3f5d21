#!/usr/bin/env python3
"""Compare the compiled and pure-Python dependency-scan kernels.

Times both the raw scan (interned arrays already built) and end-to-end
build_dag (interning, scan, edge materialization). Run from the repo root:

    python benchmarks/bench_depscan.py --sizes 100000 200000 --trials 10
"""

import argparse
import statistics
import time

from s4oc import _depscan_py
from s4oc.trace import _depscan, _intern, active_kernel, build_dag
from s4oc.workloads import random_instructions


def median_time(fn, trials):
    samples = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[100_000, 200_000, 400_000])
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--registers", type=int, default=512)
    args = parser.parse_args()

    if not _depscan.COMPILED:
        print("note: compiled kernel unavailable; comparing the fallback against itself")

    print(f"active kernel: {active_kernel()}")
    header = f"{'N':>9}  {'scan C (ms)':>12}  {'scan py (ms)':>13}  {'speedup':>8}  {'build_dag (ms)':>15}"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        instrs = random_instructions(n, n_registers=args.registers, seed=n, dstless_fraction=0.05)
        interned = _intern(instrs)
        t_c = median_time(lambda: _depscan.scan_last_writers(*interned), args.trials)
        t_py = median_time(lambda: _depscan_py.scan_last_writers(*interned), args.trials)
        t_full = median_time(lambda: build_dag(instrs), args.trials)
        print(
            f"{n:>9}  {t_c * 1e3:>12.2f}  {t_py * 1e3:>13.2f}  "
            f"{t_py / t_c:>7.1f}x  {t_full * 1e3:>15.2f}"
        )


if __name__ == "__main__":
    main()
