"""Gaussian naive Bayes with a variance floor."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..datamodel import LabelSet, ModelKind
from ..errors import ParameterError
from .base import Classifier, check_training_data


@dataclass(frozen=True)
class GnbParams:
    var_smoothing_fraction: float = 1e-9

    def __post_init__(self):
        if not self.var_smoothing_fraction > 0:
            raise ParameterError("var_smoothing_fraction must be > 0")


class GnbModel(Classifier):
    """Per-class priors, means and population variances.

    Classes of the label set that never occur in training get prior 0 and
    therefore posterior 0.
    """

    kind = ModelKind.GAUSSIAN_NB

    def __init__(self, labels, priors, means, variances, epsilon, params: GnbParams):
        self.priors = np.asarray(priors, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        super().__init__(labels, self.means.shape[1])
        self.epsilon = float(epsilon)
        self.params = params

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = self._check(X)
        return self._jll(X)

    def _jll(self, X):
        present = self.priors > 0
        out = np.full((len(X), len(self.labels)), -np.inf)
        for c in np.flatnonzero(present):
            var = self.variances[c]
            ll = -0.5 * np.log(2.0 * np.pi * var) - (X - self.means[c]) ** 2 / (2.0 * var)
            out[:, c] = np.log(self.priors[c]) + ll.sum(axis=1)
        return out

    def _dist(self, X):
        jll = self._jll(X)
        top = jll.max(axis=1, keepdims=True)
        w = np.exp(jll - top)
        return w / w.sum(axis=1, keepdims=True)

    def to_json(self) -> dict:
        return {"params": asdict(self.params), "priors": self.priors.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "epsilon": self.epsilon}

    @classmethod
    def from_json(cls, obj: dict, labels: LabelSet) -> "GnbModel":
        return cls(labels, obj["priors"], obj["means"], obj["variances"], obj["epsilon"], GnbParams(**obj["params"]))


def gnb_fit(X, y, labels: LabelSet, params: GnbParams | None = None) -> GnbModel:
    params = params or GnbParams()
    X, y = check_training_data(X, y, labels)
    n, p = X.shape
    k = len(labels)
    eps = params.var_smoothing_fraction * float(X.var(axis=0).max())
    if eps == 0.0:
        # every feature constant: fall back to an absolute floor
        eps = params.var_smoothing_fraction
    priors = np.zeros(k)
    means = np.zeros((k, p))
    variances = np.full((k, p), max(1.0, eps))
    for c in range(k):
        rows = X[y == c]
        if len(rows) == 0:
            continue
        priors[c] = len(rows) / n
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), eps)
    return GnbModel(labels, priors, means, variances, eps, params)
