"""Confusion-matrix metrics and the dataset x model comparison harness.

Per-class scores are computed as exact rationals and rounded to float once,
so identities such as accuracy == weighted recall hold exactly.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .datamodel import (
    BINARY_LABELS,
    MISSING,
    Dataset,
    EnsembleSpec,
    FeatureKind,
    LabelSet,
    Voting,
    canonical_attack_labels,
    normalize_attack_label,
)
from .ensemble import fit_ensemble
from .errors import DomainError, TaskError
from .ingest import Preprocessor, SplitSpec, stratified_split

log = logging.getLogger(__name__)


class Task(str, enum.Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


class Averaging(str, enum.Enum):
    WEIGHTED = "weighted"
    MACRO = "macro"


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: LabelSet
    counts: np.ndarray  # rows = true label, columns = predicted label

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(true_labels: Sequence, predicted_labels: Sequence, labels: LabelSet) -> ConfusionMatrix:
    true_labels, predicted_labels = list(true_labels), list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise DomainError(f"{len(true_labels)} true labels but {len(predicted_labels)} predictions")
    k = len(labels)
    counts = np.zeros((k, k), dtype=np.int64)
    try:
        t = labels.encode(true_labels)
        p = labels.encode(predicted_labels)
    except KeyError as exc:
        raise DomainError(str(exc.args[0])) from None
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(labels, counts)


def confusion_from_codes(true_codes, pred_codes, labels: LabelSet) -> ConfusionMatrix:
    k = len(labels)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (np.asarray(true_codes, dtype=np.intp), np.asarray(pred_codes, dtype=np.intp)), 1)
    return ConfusionMatrix(labels, counts)


@dataclass(frozen=True)
class Scores:
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    zero_division: int = 0


def metrics(cm: ConfusionMatrix, averaging: Averaging | str = Averaging.WEIGHTED) -> Scores:
    """Accuracy plus averaged precision, recall and F1.

    Zero denominators make the per-class score 0 and are counted in
    ``zero_division``. Weighted averaging weights classes by true support;
    macro averages over classes with non-zero support.
    """
    averaging = Averaging(averaging)
    c = [[int(x) for x in row] for row in cm.counts]
    total = sum(map(sum, c))
    if total == 0:
        raise DomainError("confusion matrix is empty")
    k = len(c)
    support = [sum(c[i]) for i in range(k)]
    predicted = [sum(c[r][i] for r in range(k)) for i in range(k)]
    zero = 0
    prec, rec, f1 = [], [], []
    for i in range(k):
        tp = c[i][i]
        if predicted[i]:
            p = Fraction(tp, predicted[i])
        else:
            p = Fraction(0)
            zero += support[i] > 0
        r = Fraction(tp, support[i]) if support[i] else Fraction(0)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        prec.append(p)
        rec.append(r)
        f1.append(f)
    if zero:
        log.warning("%d class(es) were never predicted; their precision is set to 0", zero)

    if averaging is Averaging.WEIGHTED:
        avg = lambda xs: sum((Fraction(support[i], total) * xs[i] for i in range(k)), Fraction(0))
    else:
        present = [i for i in range(k) if support[i]]
        avg = lambda xs: sum((xs[i] for i in present), Fraction(0)) / len(present)
    accuracy = Fraction(sum(c[i][i] for i in range(k)), total)
    return Scores(float(accuracy), float(avg(prec)), float(avg(rec)), float(avg(f1)), zero)


@dataclass
class MetricRow:
    dataset: str
    model: str
    task: Task
    averaging: Averaging
    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    f_measure: float | None = None
    n_test: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


# tasks -------------------------------------------------------------------------


@dataclass
class TaskData:
    X: np.ndarray
    y: np.ndarray
    labels: LabelSet
    feature_names: tuple[str, ...]


def _feature_matrix(data: Dataset, feature_names: Sequence[str] | None) -> tuple[np.ndarray, tuple[str, ...]]:
    names = tuple(feature_names) if feature_names is not None else data.schema.feature_names()
    for n in names:
        if n not in data.schema:
            raise TaskError(f"feature column {n!r} not in dataset")
    try:
        return data.numeric_matrix(names), names
    except Exception as exc:
        raise TaskError(str(exc)) from None


def binary_labels(data: Dataset, column: str | None = None) -> np.ndarray:
    col = column or data.schema.binary_label_column
    if col is None or col not in data.schema:
        raise TaskError(f"binary label column {col!r} not in dataset")
    out = np.empty(data.n_rows, dtype=np.intp)
    for i, cell in enumerate(data.cells(col)):
        try:
            v = float(cell)
        except (TypeError, ValueError):
            raise TaskError(f"row {i}: binary label {cell!r} is not 0 or 1") from None
        if v not in (0.0, 1.0):
            raise TaskError(f"row {i}: binary label {cell!r} is not 0 or 1")
        out[i] = int(v)
    return out


def multiclass_labels(data: Dataset, column: str | None = None) -> np.ndarray:
    col = column or data.schema.type_label_column
    if col is None or col not in data.schema:
        raise TaskError(f"attack-type column {col!r} not in dataset")
    canon = canonical_attack_labels()
    cells = data.cells(col)
    if any(c is MISSING for c in cells):
        raise TaskError(f"attack-type column {col!r} has missing cells")
    return np.array([canon.index(normalize_attack_label(c)) for c in cells], dtype=np.intp)


def make_binary_task(data: Dataset, feature_names: Sequence[str] | None = None) -> TaskData:
    y = binary_labels(data)
    X, names = _feature_matrix(data, feature_names)
    return TaskData(X, y, BINARY_LABELS, names)


def make_multiclass_task(data: Dataset, feature_names: Sequence[str] | None = None) -> TaskData:
    y = multiclass_labels(data)
    X, names = _feature_matrix(data, feature_names)
    return TaskData(X, y, canonical_attack_labels(), names)


def make_task(data: Dataset, task: Task | str, feature_names: Sequence[str] | None = None) -> TaskData:
    if Task(task) is Task.BINARY:
        return make_binary_task(data, feature_names)
    return make_multiclass_task(data, feature_names)


def task_label_column(data: Dataset, task: Task | str) -> str:
    col = data.schema.binary_label_column if Task(task) is Task.BINARY else data.schema.type_label_column
    if col is None or col not in data.schema:
        raise TaskError(f"{Task(task).value} task needs label column {col!r}")
    return col


def normalize_type_column(data: Dataset) -> Dataset:
    col = data.schema.type_label_column
    if col is None or col not in data.schema:
        return data
    cells = [c if c is MISSING else normalize_attack_label(c) for c in data.cells(col)]
    return data.with_column(col, FeatureKind.CATEGORICAL, cells)


# harness -------------------------------------------------------------------------


@dataclass
class Report:
    rows: list[MetricRow] = field(default_factory=list)

    def models(self) -> list[str]:
        return list(dict.fromkeys(r.model for r in self.rows))

    def datasets(self) -> list[str]:
        return list(dict.fromkeys(r.dataset for r in self.rows))

    def get(self, dataset: str, model: str) -> MetricRow:
        for r in self.rows:
            if r.dataset == dataset and r.model == model:
                return r
        raise KeyError((dataset, model))


def expand_voting(models: Sequence[EnsembleSpec], voting: str) -> list[EnsembleSpec]:
    """Apply ``hard``/``soft`` to every multi-member spec, or emit both with ``both``."""
    out = []
    for spec in models:
        if len(spec.members) == 1:
            out.append(spec)
        elif voting == "both":
            out.append(spec.with_voting(Voting.HARD))
            soft = spec.with_voting(Voting.SOFT)
            out.append(EnsembleSpec(soft.members, soft.weights, soft.voting, f"{spec.name}[soft]"))
        else:
            out.append(spec.with_voting(voting))
    return out


def evaluate_model(model, data: TaskData, averaging: Averaging | str = Averaging.WEIGHTED) -> Scores:
    pred = model.predict_codes(data.X)
    return metrics(confusion_from_codes(data.y, pred, data.labels), averaging)


def compare(
    datasets: Sequence[tuple[str, Dataset]],
    models: Sequence[EnsembleSpec],
    split: SplitSpec = SplitSpec(),
    task: Task | str = Task.BINARY,
    averaging: Averaging | str = Averaging.WEIGHTED,
    seed: int | None = None,
    scale: bool = True,
) -> Report:
    """Fit and score every model on every dataset.

    Each dataset is split once (stratified on the task's label column), the
    preprocessing is fitted on the train side only, and every model sees
    that identical split. A failing cell is recorded with its error and the
    grid continues. Rows come out in (dataset, model) order.
    """
    task, averaging = Task(task), Averaging(averaging)
    seed = split.seed if seed is None else seed
    report = Report()
    for name, data in datasets:
        try:
            prepared = _prepare_split(data, split, task, scale)
        except Exception as exc:  # whole dataset unusable
            log.error("dataset %s: %s", name, exc)
            for spec in models:
                report.rows.append(MetricRow(name, spec.name, task, averaging, error=str(exc)))
            continue
        train, test = prepared
        for spec in models:
            row = MetricRow(name, spec.name, task, averaging, n_test=len(test.y))
            try:
                model = fit_ensemble(spec, train.X, train.y, train.labels, seed)
                s = evaluate_model(model, test, averaging)
                row.accuracy, row.precision, row.recall, row.f_measure = s.accuracy, s.precision, s.recall, s.f_measure
            except Exception as exc:
                log.error("dataset %s, model %s: %s", name, spec.name, exc)
                row.error = f"{type(exc).__name__}: {exc}"
            report.rows.append(row)
    return report


def _prepare_split(data: Dataset, split: SplitSpec, task: Task, scale: bool) -> tuple[TaskData, TaskData]:
    if task is Task.MULTICLASS:
        data = normalize_type_column(data)
    col = task_label_column(data, task)
    train_raw, test_raw = stratified_split(data, SplitSpec(split.test_fraction, split.seed, col))
    pre, train_ds, _ = Preprocessor.fit(train_raw, scale=scale)
    test_ds, _ = pre.transform(test_raw)
    train = make_task(train_ds, task)
    test = make_task(test_ds, task, train.feature_names)
    return train, test


# emitters -------------------------------------------------------------------------

METRIC_NAMES = (("accuracy", "Accuracy"), ("precision", "Precision"), ("recall", "Recall"), ("f_measure", "F-measure"))


def _cell(row: MetricRow, attr: str) -> str:
    if not row.ok:
        return "ERR"
    return f"{getattr(row, attr):.4f}"


def _grid(report: Report) -> tuple[list[str], list[list[str]]]:
    models = report.models()
    header = ["Dataset", "Metric", *models]
    body = []
    for ds in report.datasets():
        for attr, title in METRIC_NAMES:
            cells = []
            for m in models:
                try:
                    cells.append(_cell(report.get(ds, m), attr))
                except KeyError:
                    cells.append("")
            body.append([ds if attr == "accuracy" else "", title, *cells])
    return header, body


def format_report(report: Report, emit: str = "table") -> str:
    """Render as ``table`` (aligned text), ``markdown`` or ``csv``.

    Table and markdown use dataset row groups, metric rows and model
    columns; csv is one line per (dataset, model) with full precision.
    """
    if emit == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "model", "task", "averaging", "accuracy", "precision", "recall", "f_measure",
                    "n_test", "error"])
        for r in report.rows:
            vals = ["" if not r.ok else repr(getattr(r, a)) for a, _ in METRIC_NAMES]
            w.writerow([r.dataset, r.model, r.task.value, r.averaging.value, *vals, r.n_test, r.error or ""])
        return buf.getvalue()
    header, body = _grid(report)
    if emit == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---", "---"] + ["---:"] * (len(header) - 2)) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        errors = [r for r in report.rows if not r.ok]
        if errors:
            lines.append("")
            lines += [f"- ERR {r.dataset} / {r.model}: {r.error}" for r in errors]
        return "\n".join(lines) + "\n"
    if emit != "table":
        raise ValueError(f"unknown report format {emit!r}")
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    fmt = lambda r: "  ".join(x.ljust(w) if i < 2 else x.rjust(w) for i, (x, w) in enumerate(zip(r, widths))).rstrip()
    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in body]
    for r in report.rows:
        if not r.ok:
            lines.append(f"ERR {r.dataset} / {r.model}: {r.error}")
    return "\n".join(lines) + "\n"
