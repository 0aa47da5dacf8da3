"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R]

Prints one row per kernel with the best-of-R wall time for each backend and
the speed-up of the compiled one.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from mrkit.kernels import available_backends


def workloads(size: int, rng: np.random.Generator):
    a = np.sort(rng.uniform(0, 100, size=(size, 2)), axis=1)
    b = np.sort(rng.uniform(0, 100, size=(size, 2)), axis=1)
    cost = rng.uniform(0, 1, size=(size // 4, size // 4))
    ranked = rng.uniform(0, 1, size=(size, max(size // 20, 1)))
    return {
        "iou_matrix": lambda k: k.iou_matrix(a[:, 0], a[:, 1], b[:, 0], b[:, 1]),
        "giou_matrix": lambda k: k.giou_matrix(a[:, 0], a[:, 1], b[:, 0], b[:, 1]),
        "linear_sum_assignment": lambda k: k.linear_sum_assignment(cost),
        "greedy_hits": lambda k: k.greedy_hits(ranked, 0.5),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=400, help="number of spans per side (default 400)")
    ap.add_argument("--repeat", type=int, default=3, help="timing repetitions, best is kept (default 3)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = available_backends()
    names = sorted(backends)
    jobs = workloads(args.size, np.random.default_rng(args.seed))
    header = f"{'kernel':<24}" + "".join(f"{n + ' (s)':>14}" for n in names)
    if "cython" in backends:
        header += f"{'speed-up':>12}"
    print(f"size={args.size} repeat={args.repeat}")
    print(header)
    for kernel, job in jobs.items():
        times = {n: min(timeit.repeat(lambda: job(backends[n]), number=1, repeat=args.repeat)) for n in names}
        row = f"{kernel:<24}" + "".join(f"{times[n]:>14.5f}" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
