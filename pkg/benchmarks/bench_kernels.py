"""Compiled vs numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from iotvote import _kernels
from iotvote.classifiers.forest import ForestParams, forest_fit
from iotvote.datamodel import LabelSet


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def _split_case(rng):
    vals = rng.normal(size=(8, 20000))
    labs = rng.integers(0, 2, vals.shape)
    order = np.argsort(vals, axis=1, kind="stable")
    return (np.ascontiguousarray(np.take_along_axis(vals, order, axis=1)),
            np.ascontiguousarray(np.take_along_axis(labs, order, axis=1), dtype=np.intp))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    vals, labs = _split_case(rng)
    train, queries = rng.normal(size=(20000, 6)), rng.normal(size=(500, 6))
    X = rng.normal(size=(5000, 6))
    y = (X[:, 0] + 0.5 * rng.normal(size=5000) > 0).astype(np.intp)
    labels = LabelSet((0, 1))

    cases = {
        "best_split 8x20000": lambda: _kernels.best_split(vals, labs, 2, 2),
        "knn 500 queries / 20000 rows, k=5": lambda: _kernels.knn_neighbors(train, queries, 5),
        "forest 20 trees on 5000x6": lambda: forest_fit(X, y, labels, ForestParams(n_trees=20, seed=1)),
    }
    results = {}
    for backend, impl in sorted(_kernels.BACKENDS.items()):
        _kernels.best_split, _kernels.knn_neighbors = impl.best_split, impl.knn_neighbors
        results[backend] = {name: _best(fn, args.repeat) for name, fn in cases.items()}

    width = max(map(len, cases))
    print(f"{'case':<{width}}  " + "  ".join(f"{b:>10}" for b in results) + ("   speedup" if len(results) > 1 else ""))
    for name in cases:
        row = "  ".join(f"{results[b][name]:>9.4f}s" for b in results)
        if "cython" in results:
            row += f"  {results['python'][name] / results['cython'][name]:>7.1f}x"
        print(f"{name:<{width}}  {row}")


if __name__ == "__main__":
    main()
