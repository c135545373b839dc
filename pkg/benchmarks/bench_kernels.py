"""Time the compiled and pure-Python kernels on the two experiment workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports the best wall time per backend and the speed-up, and checks that
both backends produce the same relative efficiency.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from calweight._core import available_backends
from calweight.data import surrogate_blocks
from calweight.experiment import MonteCarloConfig, exact_enumeration_re, monte_carlo_re


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--enum-n", type=int, default=7, help="sample size for enumeration (N=20)")
    ap.add_argument("--replicates", type=int, default=15000)
    args = ap.parse_args(argv)

    backends = available_backends()
    pop = surrogate_blocks()
    cfg = MonteCarloConfig(rho=0.5, n=50, replicates=args.replicates)
    workloads = {
        f"enumerate N=20 n={args.enum_n}": lambda k: exact_enumeration_re(pop, args.enum_n,
                                                                          kernels=k),
        f"simulate n=50 R={args.replicates}": lambda k: monte_carlo_re(cfg, kernels=k),
    }
    print(f"backends: {', '.join(sorted(backends))}")
    for name, work in workloads.items():
        row = {}
        for label, mod in sorted(backends.items()):
            row[label] = best_of(lambda: work(mod), args.repeat)
        line = "  ".join(f"{label}={t * 1e3:9.2f} ms" for label, (t, _) in row.items())
        if len(row) == 2:
            speedup = row["python"][0] / row["compiled"][0]
            re_c, re_p = row["compiled"][1].re_percent, row["python"][1].re_percent
            agree = np.isclose(re_c, re_p, rtol=1e-10)
            line += f"  speed-up={speedup:6.1f}x  RE agree={agree}"
        print(f"{name:28s} {line}")


if __name__ == "__main__":
    main()
