"""CSV ingestion and preprocessing for per-device telemetry files.

Pipeline order used by :class:`Preprocessor`: impute (median for numeric,
mode for categorical) -> label-encode categoricals -> min-max scale. Label
columns are never imputed, encoded, or scaled.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO

import numpy as np

from .datamodel import (
    MISSING,
    Dataset,
    EncodingMap,
    FeatureKind,
    Schema,
    canonical_attack_labels,
    normalize_attack_label,
)
from .errors import DataError, ImputationError, MergeError, ParseError, SchemaError, SplitError

log = logging.getLogger(__name__)

DEFAULT_MISSING = ("", "NaN", "nan", "-")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 42
    stratify_on: str = "label"

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


@dataclass(frozen=True)
class ScalerParams:
    bounds: dict[str, tuple[float, float]]

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not lo <= hi:
                raise ValueError(f"scaler bounds for {name!r} have min > max")


@dataclass
class IngestReport:
    rows_in: int = 0
    rows_out: int = 0
    dropped_unlabeled: int = 0
    unseen_tokens: dict[str, int] = field(default_factory=dict)
    fills: dict[str, Any] = field(default_factory=dict)
    encodings: dict[str, list[str]] = field(default_factory=dict)
    scaler: dict[str, list[float]] = field(default_factory=dict)

    def count_unseen(self, column: str, n: int) -> None:
        if n:
            self.unseen_tokens[column] = self.unseen_tokens.get(column, 0) + n

    def to_json(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "dropped_unlabeled": self.dropped_unlabeled,
            "unseen_tokens": dict(self.unseen_tokens),
            "fills": dict(self.fills),
            "encodings": dict(self.encodings),
            "scaler": dict(self.scaler),
        }

    def to_text(self) -> str:
        lines = [
            f"rows in:            {self.rows_in}",
            f"rows out:           {self.rows_out}",
            f"dropped unlabeled:  {self.dropped_unlabeled}",
        ]
        if self.fills:
            lines.append("imputation fills:")
            lines += [f"  {k}: {v}" for k, v in self.fills.items()]
        if self.encodings:
            lines.append("encodings:")
            lines += [f"  {k}: " + ", ".join(f"{t}={i}" for i, t in enumerate(v)) for k, v in self.encodings.items()]
        if self.scaler:
            lines.append("scaler bounds (min, max):")
            lines += [f"  {k}: {lo!r}, {hi!r}" for k, (lo, hi) in self.scaler.items()]
        if self.unseen_tokens:
            lines.append("unseen tokens:")
            lines += [f"  {k}: {v}" for k, v in self.unseen_tokens.items()]
        return "\n".join(lines) + "\n"


# CSV ---------------------------------------------------------------------


def _parse_number(token: str) -> float | None:
    try:
        x = float(token)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def load_csv(
    path: str | os.PathLike,
    schema: Schema | None = None,
    *,
    kinds: dict[str, FeatureKind] | None = None,
    missing_values: Iterable[str] = DEFAULT_MISSING,
    label_column: str | None = "label",
    type_column: str | None = "type",
    has_header: bool = True,
) -> Dataset:
    """Read a CSV file into a Dataset.

    Without ``schema`` the header names the columns and kinds are inferred:
    a column is numeric iff every non-missing cell parses as a finite real.
    ``kinds`` forces the kind of selected columns. With ``schema`` the header
    (if present) must list exactly the schema's columns, in order.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        return _read_csv(fh, str(path), schema, kinds, set(missing_values), label_column, type_column, has_header)


def read_csv_text(text: str, schema: Schema | None = None, **kwargs) -> Dataset:
    """Same as :func:`load_csv` for in-memory CSV text."""
    kw = {"kinds": None, "missing_values": DEFAULT_MISSING, "label_column": "label",
          "type_column": "type", "has_header": True, **kwargs}
    return _read_csv(io.StringIO(text), "<text>", schema, kw["kinds"], set(kw["missing_values"]),
                     kw["label_column"], kw["type_column"], kw["has_header"])


def _read_csv(fh: TextIO, source, schema, kinds, missing, label_column, type_column, has_header) -> Dataset:
    reader = csv.reader(fh)
    header = None
    if has_header:
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            if schema is None:
                raise ParseError(f"{source}: empty file, a header row is required") from None
            return Dataset.empty(schema)
        except csv.Error as exc:
            raise ParseError(f"{source}: line 1: {exc}", row=1) from None
    if schema is not None:
        if header is not None and tuple(header) != schema.names:
            raise SchemaError(f"{source}: header {header} does not match schema columns {list(schema.names)}")
        names = list(schema.names)
    elif header is None:
        raise ParseError(f"{source}: a header row is required when no schema is given")
    else:
        names = header
        if len(set(names)) != len(names):
            raise SchemaError(f"{source}: duplicate column names in header")

    width = len(names)
    raw: list[list[str]] = [[] for _ in range(width)]
    try:
        for row in reader:
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"{source}: row {reader.line_num} has {len(row)} fields, expected {width}",
                    row=reader.line_num,
                )
            for j, tok in enumerate(row):
                raw[j].append(tok)
    except csv.Error as exc:
        raise ParseError(f"{source}: line {reader.line_num}: {exc}", row=reader.line_num) from None

    forced = dict(kinds or {})
    if schema is not None:
        forced.update({n: k for n, k in schema.columns})

    columns = {}
    col_kinds = []
    for name, toks in zip(names, raw):
        kind = forced.get(name)
        cells: list[Any] = []
        if kind is None:
            parsed = [MISSING if t.strip() in missing or t in missing else _parse_number(t) for t in toks]
            if all(p is not None for p in parsed):
                kind, cells = FeatureKind.NUMERIC, parsed
            else:
                kind = FeatureKind.CATEGORICAL
        elif kind is FeatureKind.NUMERIC:
            for i, t in enumerate(toks):
                if t.strip() in missing or t in missing:
                    cells.append(MISSING)
                    continue
                x = _parse_number(t)
                if x is None:
                    raise ParseError(f"{source}: column {name!r} data row {i + 1}: {t!r} is not a finite number", row=i + 1)
                cells.append(x)
        if kind is FeatureKind.CATEGORICAL:
            cells = [MISSING if (t.strip() in missing or t in missing) else t.strip() for t in toks]
        columns[name] = cells
        col_kinds.append((name, kind))

    if schema is None:
        schema = Schema(tuple(col_kinds), label_column, type_column)
    return Dataset.from_columns(schema, columns)


def format_cell(cell: Any) -> str:
    if cell is MISSING:
        return ""
    if isinstance(cell, str):
        return cell
    x = float(cell)
    if x.is_integer() and abs(x) < 1e16 and math.copysign(1.0, x) > 0:
        return str(int(x))
    return repr(x)


def write_csv(data: Dataset, dest: str | os.PathLike | TextIO) -> None:
    """Emit a Dataset as CSV; floats are written with round-trip precision."""
    if hasattr(dest, "write"):
        _write(data, dest)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write(data, fh)


def _write(data: Dataset, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(data.schema.names)
    for row in data.rows():
        w.writerow([format_cell(c) for c in row])


def dataset_to_csv_text(data: Dataset) -> str:
    buf = io.StringIO()
    _write(data, buf)
    return buf.getvalue()


# row hygiene ---------------------------------------------------------------


def drop_unlabeled(data: Dataset) -> tuple[Dataset, int]:
    """Drop rows whose label cells are missing; returns the dropped count."""
    labels = data.schema.label_columns
    if not labels or not data.n_rows:
        return data, 0
    bad = np.zeros(data.n_rows, dtype=bool)
    for c in labels:
        bad |= data.missing(c)
    n_bad = int(bad.sum())
    if n_bad:
        log.warning("dropping %d row(s) with missing labels", n_bad)
        data = data.take(np.flatnonzero(~bad))
    return data, n_bad


# encoding ------------------------------------------------------------------


def label_encode(
    data: Dataset,
    mapping: EncodingMap | None = None,
    report: IngestReport | None = None,
) -> tuple[Dataset, EncodingMap]:
    """Replace every categorical feature column by integer codes.

    With ``mapping`` (test time) known tokens reuse their codes and unseen
    tokens get the reserved code ``len(seen)``; the count is added to
    ``report``. Columns absent from ``mapping`` are fitted fresh. Missing
    cells stay missing.
    """
    labels = set(data.schema.label_columns)
    known = dict(mapping.columns) if mapping is not None else {}
    out = data
    fitted: dict[str, tuple[str, ...]] = {}
    for name, kind in data.schema.columns:
        if kind is not FeatureKind.CATEGORICAL or name in labels:
            continue
        cells = data.cells(name)
        if name in known:
            seen = known[name]
        else:
            seen = tuple(dict.fromkeys(c for c in cells if c is not MISSING))
        codes = {tok: i for i, tok in enumerate(seen)}
        reserved = len(seen)
        unseen = 0
        vals = np.zeros(len(cells))
        mask = np.zeros(len(cells), dtype=bool)
        for i, c in enumerate(cells):
            if c is MISSING:
                mask[i] = True
            elif c in codes:
                vals[i] = codes[c]
            else:
                vals[i] = reserved
                unseen += 1
        if unseen:
            log.info("column %r: %d unseen token(s) mapped to code %d", name, unseen, reserved)
        if report is not None:
            report.count_unseen(name, unseen)
        fitted[name] = seen
        out = out.with_numeric(name, vals, mask)
    merged = {**known, **fitted}
    return out, EncodingMap(merged)


# imputation ----------------------------------------------------------------


def _median(values: np.ndarray) -> float:
    s = np.sort(values)
    n = len(s)
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return float((s[mid - 1] + s[mid]) / 2.0)


def _mode(tokens: Sequence[str]) -> str:
    counts = Counter(tokens)
    best = max(counts.values())
    return next(t for t in counts if counts[t] == best)


def impute_median(
    data: Dataset, medians: dict[str, Any] | None = None
) -> tuple[Dataset, dict[str, Any]]:
    """Fill missing feature cells: numeric by median, categorical by mode.

    Fill values are computed over non-missing cells only unless supplied in
    ``medians``. Returns the filled dataset and the fill value per column.
    """
    supplied = dict(medians or {})
    labels = set(data.schema.label_columns)
    fills: dict[str, Any] = {}
    out = data
    for name, kind in data.schema.columns:
        if name in labels:
            continue
        mask = data.missing(name)
        if kind is FeatureKind.NUMERIC:
            if name in supplied:
                fill = float(supplied[name])
            else:
                observed = data.values(name)[~mask]
                if len(observed) == 0:
                    if not mask.any():
                        continue
                    raise ImputationError(f"column {name!r} has no observed values to take a median from")
                fill = _median(observed)
            fills[name] = fill
            if mask.any():
                vals = np.where(mask, fill, data.values(name))
                out = out.with_numeric(name, vals)
        else:
            cells = data.cells(name)
            if name in supplied:
                fill = str(supplied[name])
            else:
                observed_tokens = [c for c in cells if c is not MISSING]
                if not observed_tokens:
                    if not mask.any():
                        continue
                    raise ImputationError(f"column {name!r} has no observed values to take a mode from")
                fill = _mode(observed_tokens)
            fills[name] = fill
            if mask.any():
                out = out.with_column(name, kind, [fill if c is MISSING else c for c in cells])
    return out, fills


# scaling -------------------------------------------------------------------


def fit_scaler(data: Dataset) -> ScalerParams:
    labels = set(data.schema.label_columns)
    bounds = {}
    for name, kind in data.schema.columns:
        if kind is not FeatureKind.NUMERIC or name in labels:
            continue
        observed = data.values(name)[~data.missing(name)]
        if len(observed):
            bounds[name] = (float(observed.min()), float(observed.max()))
    return ScalerParams(bounds)


def apply_scaler(data: Dataset, params: ScalerParams) -> Dataset:
    """Min-max scale with training bounds. Constant columns map to 0.0; no clamping."""
    out = data
    for name, (lo, hi) in params.bounds.items():
        if name not in data.schema or data.schema.kind(name) is not FeatureKind.NUMERIC:
            continue
        mask = data.missing(name)
        x = data.values(name)
        if hi > lo:
            scaled = (x - lo) / (hi - lo)
        else:
            scaled = np.zeros_like(x)
        out = out.with_numeric(name, scaled, mask)
    return out


# merging -------------------------------------------------------------------


def merge_datasets(parts: Sequence[Dataset]) -> Dataset:
    """Row-concatenate datasets over the first-seen union of their columns."""
    if not parts:
        raise MergeError("nothing to merge")
    first = parts[0].schema
    for p in parts[1:]:
        if (p.schema.binary_label_column, p.schema.type_label_column) != (
            first.binary_label_column, first.type_label_column
        ):
            raise MergeError("parts disagree on label column names")
    if len(parts) == 1:
        return parts[0]

    kinds: dict[str, FeatureKind] = {}
    for p in parts:
        for name, kind in p.schema.columns:
            if name in kinds and kinds[name] is not kind:
                raise MergeError(
                    f"column {name!r} is {kinds[name].value} in one part and {kind.value} in another"
                )
            kinds.setdefault(name, kind)

    schema = Schema(tuple(kinds.items()), first.binary_label_column, first.type_label_column)
    columns: dict[str, list] = {n: [] for n in kinds}
    for p in parts:
        for name in kinds:
            if name in p.schema:
                columns[name].extend(p.cells(name))
            else:
                columns[name].extend([MISSING] * p.n_rows)
    return Dataset.from_columns(schema, columns)


# splitting -----------------------------------------------------------------


def stratified_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded per-class split. Each class sends round(count * fraction) rows,
    clamped to [1, count - 1], to the test side. Row order is preserved."""
    if spec.stratify_on not in data.schema:
        raise SplitError(f"stratify column {spec.stratify_on!r} not in dataset")
    cells = data.cells(spec.stratify_on)
    groups: dict[Any, list[int]] = {}
    for i, c in enumerate(cells):
        if c is MISSING:
            raise SplitError(f"row {i} has no value in stratify column {spec.stratify_on!r}")
        groups.setdefault(c, []).append(i)
    for label, idx in groups.items():
        if len(idx) < 2:
            raise SplitError(f"class {label!r} has {len(idx)} row(s); at least 2 are needed to split")

    rng = np.random.default_rng(spec.seed & 0xFFFFFFFFFFFFFFFF)
    test_idx: list[int] = []
    for label, idx in groups.items():
        n = len(idx)
        n_test = min(max(int(math.floor(n * spec.test_fraction + 0.5)), 1), n - 1)
        perm = rng.permutation(n)
        test_idx.extend(idx[k] for k in perm[:n_test])
    is_test = np.zeros(data.n_rows, dtype=bool)
    is_test[test_idx] = True
    return data.take(np.flatnonzero(~is_test)), data.take(np.flatnonzero(is_test))


# stats ---------------------------------------------------------------------


def dataset_stats(data: Dataset, type_column: str | None = None) -> dict[str, int]:
    """Row count per attack type, in canonical label order."""
    col = type_column or data.schema.type_label_column
    if col is None or col not in data.schema:
        raise DataError(f"attack-type column {col!r} not in dataset")
    counts: Counter = Counter()
    for i, c in enumerate(data.cells(col)):
        if c is MISSING:
            raise DataError(f"row {i} has no attack type")
        counts[normalize_attack_label(c)] += 1
    return {lab: counts[lab] for lab in canonical_attack_labels() if counts[lab]}


def format_stats(per_dataset: dict[str, dict[str, int]], emit: str = "table") -> str:
    labels = list(canonical_attack_labels())
    header = ["dataset", *labels, "total"]
    rows = []
    for name, counts in per_dataset.items():
        rows.append([name, *(str(counts.get(lab, 0)) for lab in labels), str(sum(counts.values()))])
    if emit == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if emit == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    fmt = lambda r: "  ".join(x.rjust(w) if i else x.ljust(w) for i, (x, w) in enumerate(zip(r, widths))).rstrip()
    return "\n".join([fmt(header), *map(fmt, rows)]) + "\n"


# fitted pipeline --------------------------------------------------------------


@dataclass
class Preprocessor:
    """Impute/encode/scale parameters learned on training data."""

    kinds: dict[str, FeatureKind] = field(default_factory=dict)
    fills: dict[str, Any] = field(default_factory=dict)
    encoding: EncodingMap = field(default_factory=EncodingMap)
    scaler: ScalerParams = field(default_factory=lambda: ScalerParams({}))
    scale: bool = True

    @classmethod
    def fit(cls, data: Dataset, scale: bool = True) -> tuple["Preprocessor", Dataset, IngestReport]:
        report = IngestReport(rows_in=data.n_rows)
        labels = set(data.schema.label_columns)
        kinds = {n: k for n, k in data.schema.columns if n not in labels}
        imputed, fills = impute_median(data)
        encoded, enc = label_encode(imputed, None, report)
        scaler = fit_scaler(encoded) if scale else ScalerParams({})
        out = apply_scaler(encoded, scaler)
        pre = cls(kinds, fills, enc, scaler, scale)
        pre._fill_report(report, out)
        return pre, out, report

    def transform(self, data: Dataset) -> tuple[Dataset, IngestReport]:
        report = IngestReport(rows_in=data.n_rows)
        for name, kind in self.kinds.items():
            if name not in data.schema:
                raise SchemaError(f"column {name!r} seen at fit time is missing")
            if data.schema.kind(name) is not kind:
                raise SchemaError(
                    f"column {name!r} was {kind.value} at fit time but is {data.schema.kind(name).value}"
                )
        imputed, _ = impute_median(data, self.fills)
        encoded, _ = label_encode(imputed, self.encoding, report)
        out = apply_scaler(encoded, self.scaler)
        self._fill_report(report, out)
        return out, report

    def _fill_report(self, report: IngestReport, out: Dataset) -> None:
        report.rows_out = out.n_rows
        report.fills = dict(self.fills)
        report.encodings = {k: list(v) for k, v in self.encoding.columns.items()}
        report.scaler = {k: [lo, hi] for k, (lo, hi) in self.scaler.bounds.items()}

    def to_json(self) -> dict:
        return {
            "kinds": {k: v.value for k, v in self.kinds.items()},
            "fills": dict(self.fills),
            "encoding": self.encoding.to_json(),
            "scaler": {k: [lo, hi] for k, (lo, hi) in self.scaler.bounds.items()},
            "scale": self.scale,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Preprocessor":
        return cls(
            {k: FeatureKind(v) for k, v in obj["kinds"].items()},
            dict(obj["fills"]),
            EncodingMap.from_json(obj["encoding"]),
            ScalerParams({k: (float(lo), float(hi)) for k, (lo, hi) in obj["scaler"].items()}),
            bool(obj.get("scale", True)),
        )
