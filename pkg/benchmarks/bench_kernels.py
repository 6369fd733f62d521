"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--rows N] [--repeat R]

Each kernel runs on the same w1a-like sparse data under every available
backend; the table reports the best-of-R wall time and the speedup.
"""
import argparse
import timeit

import numpy as np

from sfwzoo.datasets import w1a_like
from sfwzoo.kernels import available_backends


def cases(ds, rng):
    x = rng.standard_normal(ds.dim)
    rows = np.sort(rng.choice(ds.n_samples, 64, replace=False)).astype(np.int64)
    w = rng.standard_normal(rows.size)
    wt = rng.standard_normal(ds.n_samples)
    cp, ci, cd = ds.csc
    args = (ds.indptr, ds.indices, ds.data)
    out = np.zeros(ds.dim)
    dense = np.empty((rows.size, ds.dim))
    margins = ds.matrix @ x
    return {
        "all_margins": lambda k: k.all_margins(*args, x),
        "row_margins(64)": lambda k: k.row_margins(*args, x, rows),
        "add_weighted_rows(64)": lambda k: k.add_weighted_rows(*args, rows, w, out),
        "rows_to_dense(64)": lambda k: k.rows_to_dense(*args, rows, w, dense),
        "weighted_column": lambda k: k.weighted_column(cp, ci, cd, 7, wt),
        "logistic_loss_sum": lambda k: k.logistic_loss_sum(margins),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2477)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    ds = w1a_like(n_rows=args.rows)
    backends = available_backends()
    table = cases(ds, np.random.default_rng(0))
    names = sorted(backends)
    print(f"data: {ds.n_samples} x {ds.dim}, nnz={ds.nnz}; backends: {', '.join(names)}")
    print(f"{'kernel':<24}" + "".join(f"{n + ' (us)':>16}" for n in names) + f"{'speedup':>10}")
    for label, fn in table.items():
        times = {}
        for name in names:
            k = backends[name]
            number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(k), number=1), 1e-7)))
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            times[name] = best * 1e6
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<24}" + "".join(f"{times[n]:>16.1f}" for n in names) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
