"""Brute-force Euclidean k-nearest-neighbours."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import _kernels
from ..datamodel import LabelSet, ModelKind
from ..errors import ParameterError
from .base import Classifier, check_training_data


@dataclass(frozen=True)
class KnnParams:
    k: int = 5


class KnnModel(Classifier):
    kind = ModelKind.KNN

    def __init__(self, labels, X, y, params: KnnParams):
        X = np.ascontiguousarray(X, dtype=np.float64)
        super().__init__(labels, X.shape[1])
        if not 1 <= params.k <= len(X):
            raise ParameterError(f"k={params.k} must be between 1 and the {len(X)} stored rows")
        self.X = X
        self.y = np.asarray(y, dtype=np.intp)
        self.params = params
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def k(self) -> int:
        return self.params.k

    def neighbors(self, X) -> np.ndarray:
        """(n_queries, k) stored-row indices, nearest first, ties to lower index."""
        return _kernels.knn_neighbors(self.X, self._check(X), self.k)

    def _dist(self, X):
        nb = _kernels.knn_neighbors(self.X, X, self.k)
        votes = self.y[nb]
        out = np.zeros((len(X), len(self.labels)))
        for c in range(len(self.labels)):
            out[:, c] = (votes == c).sum(axis=1)
        return out / self.k

    def to_json(self) -> dict:
        return {"params": asdict(self.params), "X": self.X.tolist(), "y": self.y.tolist(),
                "n_features": self.n_features}

    @classmethod
    def from_json(cls, obj: dict, labels: LabelSet) -> "KnnModel":
        X = np.asarray(obj["X"], dtype=np.float64).reshape(-1, obj["n_features"])
        return cls(labels, X, obj["y"], KnnParams(**obj["params"]))


def knn_fit(X, y, labels: LabelSet, params: KnnParams | None = None) -> KnnModel:
    params = params or KnnParams()
    if not isinstance(params.k, (int, np.integer)) or params.k < 1:
        raise ParameterError(f"k must be a positive integer, got {params.k!r}")
    X, y = check_training_data(X, y, labels)
    return KnnModel(labels, X, y, params)
