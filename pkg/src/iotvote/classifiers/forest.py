"""Random forest: bootstrapped CART trees with per-node feature subsampling."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..datamodel import LabelSet, ModelKind, derive_seed
from ..errors import ParameterError
from .base import Classifier, check_training_data
from .cart import CartParams, TreeModel, grow_tree


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf_samples: int = 2
    min_impurity_decrease: float = 0.0
    features_per_split: int | None = None  # None -> floor(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 42
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ParameterError("n_trees must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ParameterError("features_per_split must be >= 1")
        if self.n_jobs < 1:
            raise ParameterError("n_jobs must be >= 1")

    def tree_params(self) -> CartParams:
        return CartParams(self.max_depth, self.min_leaf_samples, self.min_impurity_decrease)


class ForestModel(Classifier):
    kind = ModelKind.RANDOM_FOREST

    def __init__(self, labels, n_features, trees, tree_seeds, features_per_split, params: ForestParams):
        super().__init__(labels, n_features)
        self.trees = tuple(trees)
        self.tree_seeds = tuple(int(s) for s in tree_seeds)
        self.features_per_split = int(features_per_split)
        self.params = params

    def _dist(self, X):
        total = np.zeros((len(X), len(self.labels)))
        for t in self.trees:
            total = total + t._dist(X)
        return total / len(self.trees)

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "params": asdict(self.params),
            "features_per_split": self.features_per_split,
            "tree_seeds": [str(s) for s in self.tree_seeds],
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict, labels: LabelSet) -> "ForestModel":
        trees = [TreeModel.from_json(t, labels) for t in obj["trees"]]
        return cls(labels, obj["n_features"], trees, [int(s) for s in obj["tree_seeds"]],
                   obj["features_per_split"], ForestParams(**obj["params"]))


def forest_fit(X, y, labels: LabelSet, params: ForestParams | None = None) -> ForestModel:
    """Fit ``n_trees`` trees. Tree ``t`` draws its bootstrap sample and its
    feature subsets from ``derive_seed(params.seed, t)``, so results do not
    depend on ``n_jobs``."""
    params = params or ForestParams()
    X, y = check_training_data(X, y, labels)
    n, p = X.shape
    fps = params.features_per_split or max(1, math.isqrt(p))
    fps = min(fps, p)
    tree_params = params.tree_params()
    seeds = [derive_seed(params.seed, t) for t in range(params.n_trees)]

    def fit_one(seed):
        rng = np.random.default_rng(seed)
        sample = rng.integers(0, n, size=n) if params.bootstrap else None
        return grow_tree(X, y, labels, tree_params, sample=sample, features_per_split=fps, rng=rng)

    if params.n_jobs > 1:
        with ThreadPoolExecutor(params.n_jobs) as pool:
            trees = list(pool.map(fit_one, seeds))
    else:
        trees = [fit_one(s) for s in seeds]
    return ForestModel(labels, p, trees, seeds, fps, params)
