import numpy as np
import pytest

from iotvote import _kernels
from iotvote._kernels import _pykernels


def _sorted_problem(rng, rows, n, n_classes, distinct):
    vals = rng.integers(0, distinct, (rows, n)).astype(np.float64)
    labs = rng.integers(0, n_classes, (rows, n))
    order = np.argsort(vals, axis=1, kind="stable")
    vals = np.ascontiguousarray(np.take_along_axis(vals, order, axis=1))
    labs = np.ascontiguousarray(np.take_along_axis(labs, order, axis=1), dtype=np.intp)
    return vals, labs


def _split_oracle(vals, labs, n_classes, min_leaf):
    best = (-1, -1, -np.inf)
    rows, n = vals.shape
    for r in range(rows):
        for pos in range(n - 1):
            nl, nr = pos + 1, n - pos - 1
            if nl < min_leaf or nr < min_leaf or not vals[r, pos] < vals[r, pos + 1]:
                continue
            cl = np.bincount(labs[r, :nl], minlength=n_classes)
            cr = np.bincount(labs[r, nl:], minlength=n_classes)
            score = float((cl * cl).sum()) / nl + float((cr * cr).sum()) / nr
            if score > best[2]:
                best = (r, pos, score)
    return best


@pytest.mark.parametrize("seed", range(30))
def test_best_split_matches_loop_oracle(seed, backend):
    rng = np.random.default_rng(seed)
    vals, labs = _sorted_problem(rng, rng.integers(1, 5), rng.integers(2, 40), 3, rng.integers(2, 8))
    min_leaf = int(rng.integers(1, 4))
    got = _kernels.best_split(vals, labs, 3, min_leaf)
    assert got[:2] == _split_oracle(vals, labs, 3, min_leaf)[:2]
    if got[0] >= 0:
        assert got[2] == _split_oracle(vals, labs, 3, min_leaf)[2]


def test_best_split_none_when_constant(backend):
    vals = np.ones((2, 6))
    labs = np.zeros((2, 6), dtype=np.intp)
    labs[:, 3:] = 1
    assert _kernels.best_split(vals, labs, 2, 1)[0] == -1


def _knn_oracle(train, queries, k):
    out = []
    for q in queries:
        d = [(float(((train[i] - q) ** 2).sum()), i) for i in range(len(train))]
        out.append([i for _, i in sorted(d)[:k]])
    return np.array(out)


@pytest.mark.parametrize("seed", range(20))
def test_knn_matches_sort_oracle(seed, backend):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(1, 60)), int(rng.integers(1, 5))
    # small integer grid to force many distance ties
    train = rng.integers(0, 4, (n, p)).astype(np.float64)
    queries = rng.integers(0, 4, (10, p)).astype(np.float64)
    k = int(rng.integers(1, n + 1))
    np.testing.assert_array_equal(_kernels.knn_neighbors(train, queries, k), _knn_oracle(train, queries, k))


@pytest.mark.skipif("cython" not in _kernels.BACKENDS, reason="extension not built")
class TestBackendsAgree:
    def test_split_float_data(self):
        c = _kernels.BACKENDS["cython"]
        rng = np.random.default_rng(5)
        for _ in range(50):
            vals, labs = _sorted_problem(rng, 4, 200, 5, 10**6)
            vals = vals * 1e-3 + 0.1
            a = c.best_split(vals, labs, 5, 2)
            b = _pykernels.best_split(vals, labs, 5, 2)
            assert a == b

    def test_knn_float_data(self):
        c = _kernels.BACKENDS["cython"]
        rng = np.random.default_rng(6)
        train = rng.normal(size=(500, 7))
        queries = rng.normal(size=(80, 7))
        np.testing.assert_array_equal(c.knn_neighbors(train, queries, 9), _pykernels.knn_neighbors(train, queries, 9))


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, IOTVOTE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import iotvote; print(iotvote.KERNEL_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
