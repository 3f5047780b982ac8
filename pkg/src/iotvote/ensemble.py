"""Weighted plurality voting over independently fitted base learners.

Hard voting picks the label with the greatest total member weight; soft
voting picks the argmax of the weighted mean of member distributions. Both
break ties toward the lower label index. :func:`ensemble_error` gives the
binomial probability that a majority of independent members err together.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .classifiers import Classifier, fit_model, load_model, save_model
from .datamodel import EnsembleSpec, LabelSet, ModelKind, Voting, derive_seed
from .errors import DomainError, FitError, IotVoteError, ModelFormatError, PredictError, VoteError

DIST_TOL = 1e-9


def _weights(weights, m: int) -> list[float]:
    if weights is None:
        return [1.0] * m
    w = [float(x) for x in weights]
    if len(w) != m:
        raise VoteError(f"{m} votes but {len(w)} weights")
    if any(x < 0 or not math.isfinite(x) for x in w):
        raise VoteError("weights must be finite and non-negative")
    return w


def _order(labels, votes) -> list:
    if labels is None:
        return sorted(set(votes))
    return list(labels.labels if isinstance(labels, LabelSet) else labels)


def vote_hard(votes: Sequence, weights: Sequence[float] | None = None, labels=None):
    """Weighted plurality vote.

    ``labels`` fixes the tie-break order (a LabelSet or sequence); without it
    the sorted distinct votes are used. Uniform weights give the mode.

    >>> vote_hard([1, 1, 1, 0, 0])
    1
    >>> vote_hard(["A", "B", "B"], weights=[3, 1, 1])
    'A'
    """
    votes = list(votes)
    if not votes:
        raise VoteError("cannot vote with no members")
    w = _weights(weights, len(votes))
    order = _order(labels, votes)
    tally = dict.fromkeys(order, 0.0)
    for v, wj in zip(votes, w):
        if v not in tally:
            raise VoteError(f"vote {v!r} is not in the label set")
        tally[v] += wj
    best = order[0]
    for lab in order[1:]:
        if tally[lab] > tally[best]:
            best = lab
    return best


def vote_sign(votes: Sequence[int], weights: Sequence[float] | None = None) -> int:
    """Binary vote over +1/-1 members: +1 iff the weighted sum is >= 0."""
    votes = list(votes)
    if not votes:
        raise VoteError("cannot vote with no members")
    for v in votes:
        if v not in (-1, 1) or isinstance(v, bool):
            raise DomainError(f"sign votes must be +1 or -1, got {v!r}")
    w = _weights(weights, len(votes))
    total = 0.0
    for v, wj in zip(votes, w):
        total += wj * v
    return 1 if total >= 0 else -1


def _check_dist(d: np.ndarray, j: int) -> None:
    if d.ndim != 1 or not np.isfinite(d).all() or (d < 0).any() or abs(d.sum() - 1.0) > DIST_TOL:
        raise DomainError(f"member {j} distribution is not a probability vector: {d}")


def soft_average(dists: Sequence[Sequence[float]], weights: Sequence[float] | None = None) -> np.ndarray:
    """Weighted mean of member distributions."""
    arrs = [np.asarray(d, dtype=np.float64) for d in dists]
    if not arrs:
        raise VoteError("cannot vote with no members")
    for j, d in enumerate(arrs):
        _check_dist(d, j)
        if len(d) != len(arrs[0]):
            raise DomainError("member distributions have different lengths")
    w = _weights(weights, len(arrs))
    total_w = sum(w)
    if total_w <= 0:
        raise VoteError("at least one weight must be positive")
    acc = np.zeros(len(arrs[0]))
    for d, wj in zip(arrs, w):
        acc = acc + wj * d
    return acc / total_w


def vote_soft(dists: Sequence[Sequence[float]], weights: Sequence[float] | None = None, labels=None):
    """Argmax of the weighted mean distribution (label if ``labels`` given, else index)."""
    idx = int(np.argmax(soft_average(dists, weights)))
    if labels is None:
        return idx
    return _order(labels, [])[idx]


# batch forms used for dataset-scale prediction --------------------------------


def hard_tally(codes: np.ndarray, weights: Sequence[float], n_labels: int) -> np.ndarray:
    """(n_rows, n_labels) weight totals from an (m, n_rows) matrix of label codes."""
    codes = np.asarray(codes, dtype=np.intp)
    rows = np.arange(codes.shape[1])
    tally = np.zeros((codes.shape[1], n_labels))
    for j, wj in enumerate(weights):
        tally[rows, codes[j]] += float(wj)
    return tally


def hard_vote_codes(codes, weights, n_labels: int) -> np.ndarray:
    return np.argmax(hard_tally(codes, weights, n_labels), axis=1)


def soft_vote_codes(dists, weights) -> np.ndarray:
    """``dists`` is (m, n_rows, n_labels)."""
    acc = np.zeros(np.shape(dists)[1:])
    for d, wj in zip(dists, weights):
        acc = acc + float(wj) * np.asarray(d)
    return np.argmax(acc / float(sum(weights)), axis=1)


# fitted ensembles ------------------------------------------------------------


class EnsembleModel:
    """Fitted members plus the EnsembleSpec that combines them."""

    def __init__(self, spec: EnsembleSpec, members: Sequence[Classifier], labels: LabelSet, seed: int = 42):
        members = tuple(members)
        if len(members) != len(spec.members):
            raise FitError(f"spec lists {len(spec.members)} members, got {len(members)} fitted models")
        for j, (m, (kind, _)) in enumerate(zip(members, spec.members)):
            if m.kind is not kind:
                raise FitError(f"member {j} is {m.kind.value}, spec expects {kind.value}")
            if m.labels != labels:
                raise FitError(f"member {j} was fit on a different label set")
            if m.n_features != members[0].n_features:
                raise FitError(f"member {j} was fit on a different feature arity")
        self.spec = spec
        self.members = members
        self.labels = labels
        self.seed = int(seed)

    @property
    def n_features(self) -> int:
        return self.members[0].n_features

    @property
    def voting(self) -> Voting:
        return self.spec.voting

    def member_codes(self, X) -> np.ndarray:
        return np.stack([m.predict_codes(X) for m in self.members])

    def member_dists(self, X) -> np.ndarray:
        return np.stack([m.predict_dist(X) for m in self.members])

    def predict_codes(self, X, voting: Voting | str | None = None) -> np.ndarray:
        mode = Voting(voting) if voting is not None else self.spec.voting
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise PredictError(f"expected rows with {self.n_features} features, got shape {X.shape}")
        if mode is Voting.HARD:
            return hard_vote_codes(self.member_codes(X), self.spec.weights, len(self.labels))
        return soft_vote_codes(self.member_dists(X), self.spec.weights)

    def predict(self, X, voting: Voting | str | None = None) -> list:
        return self.labels.decode(self.predict_codes(X, voting))

    def predict_dist(self, X) -> np.ndarray:
        """Vote shares (hard) or mean member distribution (soft)."""
        X = np.asarray(X, dtype=np.float64)
        w = self.spec.weights
        if self.spec.voting is Voting.HARD:
            return hard_tally(self.member_codes(X), w, len(self.labels)) / sum(w)
        acc = np.zeros((len(X), len(self.labels)))
        for d, wj in zip(self.member_dists(X), w):
            acc = acc + wj * d
        return acc / sum(w)


def fit_ensemble(spec: EnsembleSpec, X, y, labels: LabelSet, seed: int = 42) -> EnsembleModel:
    """Fit every member on the full training set; member ``j`` gets seed
    ``derive_seed(seed, j)``. No member sees another's output."""
    members = []
    for j, (kind, params) in enumerate(spec.members):
        try:
            members.append(fit_model(kind, X, y, labels, params, seed=derive_seed(seed, j)))
        except IotVoteError as exc:
            raise type(exc)(f"member {j} ({kind.value}): {exc}") from exc
    return EnsembleModel(spec, members, labels, seed)


def predict_ensemble(model: EnsembleModel, row, voting: Voting | str | None = None):
    """Label for one feature row."""
    return model.predict(np.asarray(row, dtype=np.float64).reshape(1, -1), voting)[0]


# analytic ensemble error -----------------------------------------------------


@dataclass(frozen=True)
class EnsembleErrorQuery:
    n: int
    epsilon: float
    k: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError(f"epsilon must be in [0, 1], got {self.epsilon}")
        k = self.n // 2 + 1 if self.k is None else self.k
        if not 1 <= k <= self.n:
            raise DomainError(f"k must be in [1, {self.n}], got {k}")
        object.__setattr__(self, "k", k)


_EXACT_MAX_N = 60


def ensemble_error(n: int | EnsembleErrorQuery, epsilon: float | None = None, k: int | None = None) -> float:
    """P(at least k of n independent members with error rate epsilon are wrong).

    ``k`` defaults to the majority threshold ``n // 2 + 1``. Above n = 60 the
    binomial terms are summed in log space.

    >>> round(ensemble_error(5, 0.1), 9)
    0.00856
    """
    q = n if isinstance(n, EnsembleErrorQuery) else EnsembleErrorQuery(int(n), float(epsilon), k)
    n, eps, k = q.n, q.epsilon, q.k
    if eps == 0.0:
        return 0.0
    if eps == 1.0:
        return 1.0
    if n <= _EXACT_MAX_N:
        total = sum(math.comb(n, i) * eps**i * (1.0 - eps) ** (n - i) for i in range(k, n + 1))
    else:
        log_eps, log_1m = math.log(eps), math.log1p(-eps)
        logs = [
            math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1) + i * log_eps + (n - i) * log_1m
            for i in range(k, n + 1)
        ]
        top = max(logs)
        total = math.exp(top) * math.fsum(math.exp(v - top) for v in logs)
    return min(max(total, 0.0), 1.0)


# persistence -------------------------------------------------------------------

ENSEMBLE_FORMAT = "iotvote-ensemble"
ENSEMBLE_VERSION = 1


def save_ensemble(model: EnsembleModel, path: str | os.PathLike, extra: dict[str, Any] | None = None) -> list[Path]:
    """Write a container file plus one model file per member beside it.

    The container stores the EnsembleSpec (preset name, weights, voting mode), the
    label set, the member file names relative to itself, and an optional
    ``extra`` JSON object. Returns every path written.
    """
    path = Path(path)
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    written = []
    names = []
    for j, m in enumerate(model.members):
        member_path = path.with_name(f"{stem}.member{j}-{m.kind.value}.json")
        save_model(m, member_path)
        names.append(member_path.name)
        written.append(member_path)
    container = {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "spec": model.spec.to_json(),
        "labels": list(model.labels.labels),
        "n_features": model.n_features,
        "seed": model.seed,
        "members": names,
        "extra": extra or {},
    }
    path.write_text(json.dumps(container, indent=1) + "\n", encoding="utf-8")
    written.append(path)
    return written


def load_ensemble(path: str | os.PathLike) -> tuple[EnsembleModel, dict[str, Any]]:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None
    if obj.get("format") != ENSEMBLE_FORMAT:
        raise ModelFormatError(f"{path}: not an ensemble container (format={obj.get('format')!r})")
    if obj.get("version") != ENSEMBLE_VERSION:
        raise ModelFormatError(f"{path}: unsupported container version {obj.get('version')!r}")
    spec = EnsembleSpec.from_json(obj["spec"])
    labels = LabelSet(tuple(obj["labels"]))
    members = []
    for name in obj["members"]:
        member_path = path.with_name(name)
        if not member_path.exists():
            raise ModelFormatError(f"{path}: member file {name} not found")
        members.append(load_model(member_path))
    return EnsembleModel(spec, members, labels, obj.get("seed", 42)), obj.get("extra", {})


__all__ = [
    "vote_hard", "vote_sign", "vote_soft", "soft_average", "hard_tally", "hard_vote_codes",
    "soft_vote_codes", "EnsembleModel", "fit_ensemble", "predict_ensemble", "EnsembleErrorQuery",
    "ensemble_error", "save_ensemble", "load_ensemble", "ModelKind",
]
