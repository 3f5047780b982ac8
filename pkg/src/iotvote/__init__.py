"""Plurality-voting ensemble intrusion detection for IoT telemetry."""

__version__ = "0.1.0"

from .datamodel import (  # noqa: E402
    MISSING,
    Dataset,
    EncodingMap,
    EnsembleSpec,
    FeatureKind,
    LabelSet,
    ModelKind,
    Schema,
    Voting,
    canonical_attack_labels,
    preset,
    single,
)
from .ensemble import (  # noqa: E402
    EnsembleModel,
    ensemble_error,
    fit_ensemble,
    predict_ensemble,
    vote_hard,
    vote_sign,
    vote_soft,
)
from ._kernels import BACKEND as KERNEL_BACKEND  # noqa: E402

__all__ = [
    "MISSING", "Dataset", "EncodingMap", "EnsembleSpec", "FeatureKind", "LabelSet", "ModelKind", "Schema",
    "Voting", "canonical_attack_labels", "preset", "single", "EnsembleModel", "ensemble_error",
    "fit_ensemble", "predict_ensemble", "vote_hard", "vote_sign", "vote_soft", "KERNEL_BACKEND",
]
