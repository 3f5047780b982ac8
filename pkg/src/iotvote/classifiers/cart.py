"""CART classification tree grown by greedy Gini minimisation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import _kernels
from ..datamodel import LabelSet, ModelKind
from ..errors import ParameterError
from .base import Classifier, check_training_data

# guards against float noise when a split is exactly as good as its parent
_DECREASE_TOL = 1e-12


@dataclass(frozen=True)
class CartParams:
    max_depth: int = 12
    min_leaf_samples: int = 2
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ParameterError("max_depth must be >= 0")
        if self.min_leaf_samples < 1:
            raise ParameterError("min_leaf_samples must be >= 1")
        if self.min_impurity_decrease < 0:
            raise ParameterError("min_impurity_decrease must be >= 0")


class TreeModel(Classifier):
    """Flat-array binary tree.

    ``feature[i] == -1`` marks node ``i`` as a leaf; ``counts[i]`` holds the
    training class counts that reached it. Rows with ``x[feature] <= threshold``
    go left.
    """

    kind = ModelKind.CART

    def __init__(self, labels, n_features, feature, threshold, left, right, counts, params: CartParams):
        super().__init__(labels, n_features)
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.counts = np.asarray(counts, dtype=np.int64).reshape(len(self.feature), len(labels))
        self.params = params
        for a in (self.feature, self.threshold, self.left, self.right, self.counts):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.intp)
        for i in range(self.n_nodes):  # children always have larger ids
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by every row."""
        node = np.zeros(len(X), dtype=np.intp)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            nodes = node[active]
            go_left = X[active, self.feature[nodes]] <= self.threshold[nodes]
            node[active] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = active[self.feature[node[active]] >= 0]
        return node

    def _dist(self, X):
        c = self.counts[self.apply(X)].astype(np.float64)
        return c / c.sum(axis=1, keepdims=True)

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "params": asdict(self.params),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, labels: LabelSet) -> "TreeModel":
        return cls(labels, obj["n_features"], obj["feature"], obj["threshold"], obj["left"], obj["right"],
                   np.asarray(obj["counts"], dtype=np.int64).reshape(-1, len(labels)), CartParams(**obj["params"]))


def grow_tree(X, y, labels: LabelSet, params: CartParams, *, sample=None,
              features_per_split: int | None = None, rng: np.random.Generator | None = None) -> TreeModel:
    """Grow one tree on rows ``sample`` (default: all rows; duplicates allowed).

    With ``features_per_split < n_features`` each node draws that many
    candidate features from ``rng``; candidates are always scanned in
    ascending feature order so score ties go to the lowest feature index.
    """
    n_classes = len(labels)
    p = X.shape[1]
    subsample = features_per_split is not None and features_per_split < p
    if subsample and rng is None:
        raise ParameterError("feature subsampling needs a random generator")
    all_feats = np.arange(p)
    root = np.arange(len(X)) if sample is None else np.asarray(sample, dtype=np.intp)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(root), root, 0)]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        n = len(idx)
        if depth >= params.max_depth or n < 2 * params.min_leaf_samples or c.max() == n:
            continue
        feats = np.sort(rng.choice(p, features_per_split, replace=False)) if subsample else all_feats
        sub = X[idx][:, feats].T
        order = np.argsort(sub, axis=1, kind="stable")
        vals = np.ascontiguousarray(np.take_along_axis(sub, order, axis=1))
        labs = np.ascontiguousarray(y[idx][order], dtype=np.intp)
        row, pos, score = _kernels.best_split(vals, labs, n_classes, params.min_leaf_samples)
        if row < 0:
            continue
        sq = float((c.astype(np.int64) ** 2).sum())
        decrease = score / n - sq / (n * n)
        if decrease + _DECREASE_TOL < params.min_impurity_decrease:
            continue
        lo, hi = vals[row, pos], vals[row, pos + 1]
        thr = 0.5 * (lo + hi)
        if not thr < hi:
            thr = lo
        f = int(feats[row])
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, float(thr)
        lnode = new_node(li)
        rnode = new_node(ri)
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is expanded first
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))

    return TreeModel(labels, p, feature, threshold, left, right, np.array(counts), params)


def cart_fit(X, y, labels: LabelSet, params: CartParams | None = None) -> TreeModel:
    X, y = check_training_data(X, y, labels)
    return grow_tree(X, y, labels, params or CartParams())
