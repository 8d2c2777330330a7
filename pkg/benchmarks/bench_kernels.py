#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the full loss+gradient pipeline (forward, backward, occupation)
and Viterbi decoding on random lattices of a few sizes, and reports the
per-call wall time of each backend plus the speedup. Both backends are
imported directly, so the LATTICELOSS_KERNELS environment variable does
not matter here.

Usage:
    python benchmarks/bench_kernels.py [--sizes 50x20,200x50,500x100]
                                       [--repeats 20] [--seed 0]
"""

import argparse
import time

import numpy as np

from latticeloss import _kernels_py

try:
    from latticeloss import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def parse_sizes(text):
    sizes = []
    for part in text.split(","):
        T, U = (int(p) for p in part.lower().split("x"))
        if T < 1 or U < 0:
            raise argparse.ArgumentTypeError(f"bad size {part!r}")
        sizes.append((T, U))
    return sizes


def make_grids(rng, T, U):
    y = rng.uniform(-5.0, 0.0, size=(T, U))
    blank = rng.uniform(-5.0, 0.0, size=(T, U + 1))
    return y, blank


def time_loss_and_grad(mod, y, blank, repeats):
    T, U1 = blank.shape
    alpha = np.empty((T, U1))
    beta = np.empty((T, U1))
    occ_y = np.empty_like(y)
    occ_blank = np.empty_like(blank)
    best = np.inf
    total = 0.0
    for _ in range(repeats):
        start = time.perf_counter()
        total = mod.forward_fill(y, blank, alpha)
        mod.backward_fill(y, blank, beta)
        mod.occupation_fill(y, blank, alpha, beta, total, occ_y, occ_blank)
        best = min(best, time.perf_counter() - start)
    return best, total


def time_viterbi(mod, y, blank, repeats):
    pi = np.empty(y.shape[1], dtype=np.int64)
    best = np.inf
    score = 0.0
    for _ in range(repeats):
        start = time.perf_counter()
        score = mod.viterbi_fill(y, blank, pi)
        best = min(best, time.perf_counter() - start)
    return best, score


def fmt(seconds):
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    return f"{seconds * 1e3:8.2f} ms"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=parse_sizes,
                        default=parse_sizes("50x20,200x50,500x100"))
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _kernels_c is None:
        print("compiled extension not available; timing the pure-Python "
              "kernels only")

    rng = np.random.default_rng(args.seed)
    header = f"{'size':>10}  {'op':<10}  {'python':>11}  {'compiled':>11}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for T, U in args.sizes:
        y, blank = make_grids(rng, T, U)
        rows = []
        py_t, py_total = time_loss_and_grad(_kernels_py, y, blank, args.repeats)
        rows.append(("loss+grad", py_t, py_total))
        py_v, py_score = time_viterbi(_kernels_py, y, blank, args.repeats)
        rows.append(("viterbi", py_v, py_score))
        for name, py_time, py_value in rows:
            if _kernels_c is None:
                print(f"{T:>6}x{U:<3}  {name:<10}  {fmt(py_time)}  "
                      f"{'-':>11}  {'-':>8}")
                continue
            timer = time_loss_and_grad if name == "loss+grad" else time_viterbi
            c_time, c_value = timer(_kernels_c, y, blank, args.repeats)
            if c_value != py_value:
                raise SystemExit(
                    f"backend mismatch on {T}x{U} {name}: "
                    f"{c_value!r} != {py_value!r}"
                )
            print(f"{T:>6}x{U:<3}  {name:<10}  {fmt(py_time)}  "
                  f"{fmt(c_time)}  {py_time / c_time:7.1f}x")
    if _kernels_c is not None:
        print("\nvalues agreed bit-for-bit between backends on every size")


if __name__ == "__main__":
    main()
