"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two counting kernels directly at cohort-like sizes, then an
end-to-end tree build, using both backend implementations in one
process. Run:

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lungsurv import kernels
from lungsurv.tree import TreeParams, build_tree


class _Synthetic:
    def __init__(self, features, survived):
        self.features = features
        self.survived = survived


def _timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_counting(n, n_values, repeats):
    rng = np.random.default_rng(7)
    column = rng.integers(0, n_values, n).astype(np.int32)
    classes = rng.integers(0, 2, n).astype(np.int32)
    rows = np.arange(n, dtype=np.int64)

    if kernels._numba_value_class_counts is not None:
        # warm the JIT before timing
        kernels._numba_value_class_counts(column, classes, rows, n_values, 2)
        kernels._numba_sort_by_value(column, rows, n_values)

    results = {}
    results["value_class_counts/numpy"] = _timeit(
        lambda: kernels._np_value_class_counts(column, classes, rows, n_values, 2),
        repeats,
    )
    results["sort_by_value/numpy"] = _timeit(
        lambda: kernels._np_sort_by_value(column, rows, n_values), repeats
    )
    if kernels._numba_value_class_counts is not None:
        results["value_class_counts/numba"] = _timeit(
            lambda: kernels._numba_value_class_counts(column, classes, rows, n_values, 2),
            repeats,
        )
        results["sort_by_value/numba"] = _timeit(
            lambda: kernels._numba_sort_by_value(column, rows, n_values), repeats
        )

    check_np = kernels._np_value_class_counts(column, classes, rows, n_values, 2)
    if kernels._numba_value_class_counts is not None:
        check_nb = kernels._numba_value_class_counts(column, classes, rows, n_values, 2)
        assert np.array_equal(check_np, check_nb), "backends disagree"
    return results


def bench_tree(n, repeats):
    rng = np.random.default_rng(11)
    values = [f"v{i}" for i in range(6)]
    instances = []
    signal = rng.integers(0, 6, n)
    survived = (signal < 2) ^ (rng.random(n) < 0.1)
    for i in range(n):
        feats = {f"f{j}": values[rng.integers(0, 6)] for j in range(8)}
        feats["f0"] = values[signal[i]]
        instances.append(_Synthetic(feats, bool(survived[i])))

    def run():
        build_tree(instances, TreeParams())

    return _timeit(run, repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200_000)
    parser.add_argument("--n-values", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--tree-n", type=int, default=30_000)
    args = parser.parse_args()

    print(f"active backend: {kernels.backend_name()}")
    print(f"counting kernels at n={args.n:,}, {args.n_values} values:")
    for name, seconds in bench_counting(args.n, args.n_values, args.repeats).items():
        print(f"  {name:<28} {seconds * 1e3:8.3f} ms")
    seconds = bench_tree(args.tree_n, max(1, args.repeats // 2))
    print(
        f"tree build (n={args.tree_n:,}, 8 features, backend={kernels.backend_name()}): "
        f"{seconds:.3f} s"
    )


if __name__ == "__main__":
    main()
