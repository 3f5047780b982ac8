from __future__ import annotations

import numpy as np

from ..datamodel import LabelSet, ModelKind
from ..errors import FitError, PredictError


class Classifier:
    """Shared predict surface. Subclasses implement ``_dist(X)``."""

    kind: ModelKind

    def __init__(self, labels: LabelSet, n_features: int):
        self.labels = labels
        self.n_features = int(n_features)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise PredictError(
                f"{self.kind.value}: expected rows with {self.n_features} features, got shape {X.shape}"
            )
        return X

    def predict_dist(self, X) -> np.ndarray:
        """(n_rows, n_labels) class probabilities; rows sum to 1."""
        return self._dist(self._check(X))

    def predict_codes(self, X) -> np.ndarray:
        # np.argmax returns the first maximum: ties go to the lower label index
        return np.argmax(self.predict_dist(X), axis=1)

    def predict(self, X) -> list:
        return self.labels.decode(self.predict_codes(X))

    def _dist(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def check_training_data(X, y, labels: LabelSet) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2:
        raise FitError(f"feature matrix must be 2-D, got shape {X.shape}")
    if len(X) == 0:
        raise FitError("training set is empty")
    if len(y) != len(X):
        raise FitError(f"{len(X)} feature rows but {len(y)} labels")
    if not np.isfinite(X).all():
        raise FitError("feature matrix holds non-finite values")
    if len(labels) == 0:
        raise FitError("label set is empty")
    if y.min() < 0 or y.max() >= len(labels):
        raise FitError("label codes fall outside the label set")
    return X, y


def predict(model: Classifier, row):
    """Label for a single feature row."""
    return model.predict(np.asarray(row, dtype=np.float64).reshape(1, -1))[0]


def predict_dist(model: Classifier, row) -> np.ndarray:
    """Probability vector over ``model.labels`` for a single row."""
    return model.predict_dist(np.asarray(row, dtype=np.float64).reshape(1, -1))[0]
