"""From-scratch base learners and their model-file format."""

from __future__ import annotations

import json
import os
from pathlib import Path

from ..datamodel import LabelSet, ModelKind
from ..errors import ModelFormatError, ParameterError
from .base import Classifier, predict, predict_dist
from .cart import CartParams, TreeModel, cart_fit
from .forest import ForestModel, ForestParams, forest_fit
from .gnb import GnbModel, GnbParams, gnb_fit
from .knn import KnnModel, KnnParams, knn_fit

MODEL_FORMAT = "iotvote-model"
MODEL_VERSION = 1

PARAM_TYPES = {
    ModelKind.CART: CartParams,
    ModelKind.RANDOM_FOREST: ForestParams,
    ModelKind.KNN: KnnParams,
    ModelKind.GAUSSIAN_NB: GnbParams,
}
_FITTERS = {
    ModelKind.CART: cart_fit,
    ModelKind.RANDOM_FOREST: forest_fit,
    ModelKind.KNN: knn_fit,
    ModelKind.GAUSSIAN_NB: gnb_fit,
}
_MODEL_TYPES = {
    ModelKind.CART: TreeModel,
    ModelKind.RANDOM_FOREST: ForestModel,
    ModelKind.KNN: KnnModel,
    ModelKind.GAUSSIAN_NB: GnbModel,
}


def make_params(kind: ModelKind, params: dict | None = None):
    cls = PARAM_TYPES[ModelKind(kind)]
    try:
        return cls(**(params or {}))
    except TypeError as exc:
        raise ParameterError(f"bad hyperparameters for {kind.value}: {exc}") from None


def fit_model(kind: ModelKind, X, y, labels: LabelSet, params: dict | None = None,
              seed: int | None = None) -> Classifier:
    """Fit any base learner from a plain parameter dict.

    ``seed`` overrides the forest seed; the other learners are deterministic
    and ignore it.
    """
    kind = ModelKind(kind)
    p = dict(params or {})
    if kind is ModelKind.RANDOM_FOREST and seed is not None:
        p["seed"] = int(seed)
    return _FITTERS[kind](X, y, labels, make_params(kind, p))


def model_to_json(model: Classifier) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind.value,
        "labels": list(model.labels.labels),
        "model": model.to_json(),
    }


def model_from_json(obj: dict) -> Classifier:
    if obj.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a model file (format={obj.get('format')!r})")
    if obj.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model file version {obj.get('version')!r}")
    try:
        kind = ModelKind(obj["kind"])
        labels = LabelSet(tuple(obj["labels"]))
        return _MODEL_TYPES[kind].from_json(obj["model"], labels)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None


def save_model(model: Classifier, path: str | os.PathLike) -> None:
    """Write a self-describing JSON model file. Floats use shortest
    round-trip repr, so a reload reproduces predictions bit for bit."""
    Path(path).write_text(json.dumps(model_to_json(model), separators=(",", ":")) + "\n", encoding="utf-8")


def load_model(path: str | os.PathLike) -> Classifier:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None
    return model_from_json(obj)


__all__ = [
    "Classifier", "TreeModel", "ForestModel", "KnnModel", "GnbModel",
    "CartParams", "ForestParams", "KnnParams", "GnbParams",
    "cart_fit", "forest_fit", "knn_fit", "gnb_fit", "fit_model", "make_params",
    "predict", "predict_dist", "save_model", "load_model", "model_to_json", "model_from_json",
]
