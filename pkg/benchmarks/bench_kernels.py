"""Compare the compiled and pure-Python Jacobi eigensolver kernels.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 6,12,24,48,96] [--repeat 7] [--seed 0]

Prints CSV: n, backend, median_s, speedup_vs_python, max_eig_diff, sweeps, seed, build_id.
Timings vary between machines; the matrices and eigenvalue differences are seeded.
"""
from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from swarm_cert import linalg
from swarm_cert.bench import build_id


def random_symmetric(n, rng):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="6,12,24,48,96")
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    kernels = linalg.kernels()
    if "cython" not in kernels:
        print("# compiled kernel not built; only the Python fallback is timed", file=sys.stderr)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "backend", "median_s", "speedup_vs_python", "max_eig_diff", "sweeps", "seed", "build_id"])
    for n in sizes:
        a = random_symmetric(n, np.random.default_rng([args.seed, n]))
        ref = linalg.sym_eig(a, kernel=kernels["python"])
        times = {}
        for name, k in kernels.items():
            number = max(1, int(2000 / n**2))
            runs = timeit.repeat(lambda: linalg.sym_eig(a, kernel=k), number=number, repeat=args.repeat)
            times[name] = float(np.median(runs)) / number
        for name, k in kernels.items():
            e = linalg.sym_eig(a, kernel=k)
            w.writerow([n, name, f"{times[name]:.6g}", f"{times['python'] / times[name]:.3g}",
                        f"{np.max(np.abs(e.values - ref.values)):.3g}", e.sweeps, args.seed, build_id()])
    return 0


if __name__ == "__main__":
    sys.exit(main())
