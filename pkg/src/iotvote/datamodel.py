"""Core value types shared across the package.

Datasets are stored column-wise. Numeric columns hold a float64 array plus a
boolean missing mask; categorical columns hold an object array whose cells are
either ``str`` tokens or the :data:`MISSING` singleton. All arrays are frozen
(``writeable=False``) so a Dataset can be shared freely once built.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, SchemaError


class _Missing:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()
"""Explicit missing-cell marker. Never compared by value, only by identity."""


class FeatureKind(str, enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, FeatureKind], ...]
    binary_label_column: str | None = "label"
    type_label_column: str | None = "type"

    def __post_init__(self):
        cols = tuple((str(n), FeatureKind(k)) for n, k in self.columns)
        object.__setattr__(self, "columns", cols)
        names = [n for n, _ in cols]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {', '.join(dupes)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.columns)

    def kind(self, name: str) -> FeatureKind:
        for n, k in self.columns:
            if n == name:
                return k
        raise SchemaError(f"no such column: {name!r}")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"no such column: {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self.names

    @property
    def label_columns(self) -> tuple[str, ...]:
        """Label columns that are actually present in this schema."""
        return tuple(
            c for c in (self.binary_label_column, self.type_label_column)
            if c is not None and c in self.names
        )

    def feature_names(self) -> tuple[str, ...]:
        labels = set(self.label_columns)
        return tuple(n for n in self.names if n not in labels)

    def replace_kinds(self, kinds: dict[str, FeatureKind]) -> "Schema":
        cols = tuple((n, kinds.get(n, k)) for n, k in self.columns)
        return Schema(cols, self.binary_label_column, self.type_label_column)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class Dataset:
    """In-memory table of telemetry records.

    Build instances with :meth:`from_rows` or :meth:`from_columns`; the
    constructor itself trusts its inputs and only runs :meth:`validate`.
    """

    __slots__ = ("schema", "_values", "_masks", "_n")

    def __init__(self, schema: Schema, values: Sequence[np.ndarray], masks: Sequence[np.ndarray | None]):
        self.schema = schema
        self._values = tuple(_freeze(np.asarray(v)) for v in values)
        self._masks = tuple(None if m is None else _freeze(np.asarray(m, dtype=bool)) for m in masks)
        self._n = len(self._values[0]) if self._values else 0
        self.validate()

    # construction -----------------------------------------------------

    @classmethod
    def from_columns(cls, schema: Schema, columns: dict[str, Sequence[Any]]) -> "Dataset":
        values, masks = [], []
        for name, kind in schema.columns:
            if name not in columns:
                raise SchemaError(f"missing data for column {name!r}")
            v, m = _column_from_cells(columns[name], kind, name)
            values.append(v)
            masks.append(m)
        return cls(schema, values, masks)

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence[Any]]) -> "Dataset":
        rows = [tuple(r) for r in rows]
        width = len(schema.columns)
        for i, r in enumerate(rows):
            if len(r) != width:
                raise DataError(f"row {i} has {len(r)} cells, schema has {width} columns")
        cols = {name: [r[j] for r in rows] for j, (name, _) in enumerate(schema.columns)}
        return cls.from_columns(schema, cols)

    @classmethod
    def empty(cls, schema: Schema) -> "Dataset":
        return cls.from_columns(schema, {n: [] for n in schema.names})

    # access -----------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    def values(self, name: str) -> np.ndarray:
        """Raw column storage (float64 for numeric, object for categorical)."""
        return self._values[self.schema.index(name)]

    def missing(self, name: str) -> np.ndarray:
        i = self.schema.index(name)
        m = self._masks[i]
        if m is not None:
            return m
        v = self._values[i]
        return np.fromiter((c is MISSING for c in v), dtype=bool, count=len(v))

    def cells(self, name: str) -> list[Any]:
        """Column as a list of Python cells with MISSING substituted."""
        i = self.schema.index(name)
        v, m = self._values[i], self._masks[i]
        if m is None:
            return list(v)
        return [MISSING if miss else float(x) for x, miss in zip(v, m)]

    def rows(self) -> Iterator[tuple[Any, ...]]:
        cols = [self.cells(n) for n in self.schema.names]
        return iter(zip(*cols)) if cols else iter(())

    def missing_count(self, name: str | None = None) -> int:
        names = [name] if name is not None else list(self.schema.names)
        return int(sum(self.missing(n).sum() for n in names))

    # transformation ---------------------------------------------------

    def take(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        values = [v[idx] for v in self._values]
        masks = [None if m is None else m[idx] for m in self._masks]
        return Dataset(self.schema, values, masks)

    def with_column(self, name: str, kind: FeatureKind, cells: Sequence[Any]) -> "Dataset":
        """Replace (or append) one column."""
        v, m = _column_from_cells(cells, kind, name)
        if len(v) != self._n and self.schema.columns:
            raise DataError(f"column {name!r} has {len(v)} cells, dataset has {self._n} rows")
        if name in self.schema:
            i = self.schema.index(name)
            values, masks = list(self._values), list(self._masks)
            values[i], masks[i] = v, m
            schema = self.schema.replace_kinds({name: kind})
        else:
            values, masks = list(self._values) + [v], list(self._masks) + [m]
            schema = Schema(self.schema.columns + ((name, kind),),
                            self.schema.binary_label_column, self.schema.type_label_column)
        return Dataset(schema, values, masks)

    def with_numeric(self, name: str, values: np.ndarray, mask: np.ndarray | None = None) -> "Dataset":
        """Fast path to swap in a numeric column from arrays."""
        vals = np.array(values, dtype=np.float64)
        m = np.zeros(len(vals), dtype=bool) if mask is None else np.array(mask, dtype=bool)
        vals[m] = 0.0
        i = self.schema.index(name)
        all_v, all_m = list(self._values), list(self._masks)
        all_v[i], all_m[i] = vals, m
        return Dataset(self.schema.replace_kinds({name: FeatureKind.NUMERIC}), all_v, all_m)

    def numeric_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack numeric columns into an (n_rows, len(names)) float64 matrix."""
        out = np.empty((self._n, len(names)), dtype=np.float64)
        for j, n in enumerate(names):
            if self.schema.kind(n) is not FeatureKind.NUMERIC:
                raise DataError(f"column {n!r} is categorical; encode it first")
            if self.missing(n).any():
                raise DataError(f"column {n!r} has missing cells; impute first")
            out[:, j] = self.values(n)
        return out

    # integrity --------------------------------------------------------

    def validate(self) -> None:
        if len(self._values) != len(self.schema.columns) or len(self._masks) != len(self._values):
            raise DataError("column storage does not match schema")
        for (name, kind), v, m in zip(self.schema.columns, self._values, self._masks):
            if len(v) != self._n:
                raise DataError(f"column {name!r} has {len(v)} cells, expected {self._n}")
            if kind is FeatureKind.NUMERIC:
                if v.dtype != np.float64 or m is None or len(m) != self._n:
                    raise DataError(f"numeric column {name!r} has invalid storage")
                if self._n and not np.isfinite(v[~m]).all():
                    raise DataError(f"numeric column {name!r} holds non-finite values")
            else:
                if v.dtype != object or m is not None:
                    raise DataError(f"categorical column {name!r} has invalid storage")
                for c in v:
                    if c is not MISSING and not isinstance(c, str):
                        raise DataError(f"categorical column {name!r} holds non-string cell {c!r}")

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema or self._n != other._n:
            return False
        for name in self.schema.names:
            if self.cells(name) != other.cells(name):
                return False
        return True

    def __repr__(self) -> str:
        return f"Dataset({self._n} rows, columns={list(self.schema.names)})"


def _column_from_cells(cells: Sequence[Any], kind: FeatureKind, name: str):
    n = len(cells)
    if kind is FeatureKind.NUMERIC:
        vals = np.zeros(n, dtype=np.float64)
        mask = np.zeros(n, dtype=bool)
        for i, c in enumerate(cells):
            if c is MISSING:
                mask[i] = True
                continue
            try:
                x = float(c)
            except (TypeError, ValueError):
                raise DataError(f"column {name!r} row {i}: {c!r} is not numeric") from None
            if not math.isfinite(x):
                raise DataError(f"column {name!r} row {i}: non-finite value {c!r}")
            vals[i] = x
        return vals, mask
    vals = np.empty(n, dtype=object)
    for i, c in enumerate(cells):
        vals[i] = c if c is MISSING else str(c)
    return vals, None


# labels ----------------------------------------------------------------


@dataclass(frozen=True)
class LabelSet:
    """Ordered set of distinct labels; position is the tie-break order."""

    labels: tuple
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels are not distinct: {labels}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def index(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in {self.labels}") from None

    def encode(self, labels: Iterable) -> np.ndarray:
        return np.array([self.index(lab) for lab in labels], dtype=np.intp)

    def decode(self, codes: Iterable[int]) -> list:
        return [self.labels[int(c)] for c in codes]


ATTACK_LABELS = ("normal", "password", "scanning", "xss", "ddos", "ransomware", "injection", "backdoor")


def canonical_attack_labels() -> LabelSet:
    """The 8-way attack taxonomy, ``normal`` first, attacks in table order."""
    return LabelSet(ATTACK_LABELS)


def normalize_attack_label(raw: object) -> str:
    token = str(raw).strip().lower()
    if token not in ATTACK_LABELS:
        raise DataError(f"unknown attack type {raw!r}; expected one of {', '.join(ATTACK_LABELS)}")
    return token


BINARY_LABELS = LabelSet((0, 1))


# encodings -------------------------------------------------------------


@dataclass(frozen=True)
class EncodingMap:
    """Per-column token -> code maps, codes contiguous in first-seen order."""

    columns: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def codes(self, column: str) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(self.columns[column])}

    def encode(self, column: str, token: str) -> int:
        """Unseen tokens map to the reserved code ``len(seen)``."""
        return self.codes(column).get(token, len(self.columns[column]))

    def decode(self, column: str, code: int) -> str:
        return self.columns[column][code]

    def to_json(self) -> dict:
        return {k: list(v) for k, v in self.columns.items()}

    @classmethod
    def from_json(cls, obj: dict) -> "EncodingMap":
        return cls({k: tuple(v) for k, v in obj.items()})


# models ----------------------------------------------------------------


class ModelKind(str, enum.Enum):
    CART = "cart"
    RANDOM_FOREST = "rf"
    KNN = "knn"
    GAUSSIAN_NB = "gnb"


class Voting(str, enum.Enum):
    HARD = "hard"
    SOFT = "soft"


_ALIASES = {"dt": ModelKind.CART, "cart": ModelKind.CART, "rf": ModelKind.RANDOM_FOREST,
            "knn": ModelKind.KNN, "nb": ModelKind.GAUSSIAN_NB, "gnb": ModelKind.GAUSSIAN_NB}


def parse_model_kind(name: str) -> ModelKind:
    try:
        return _ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown model kind {name!r}; use one of {', '.join(sorted(_ALIASES))}") from None


@dataclass(frozen=True)
class EnsembleSpec:
    members: tuple[tuple[ModelKind, dict], ...]
    weights: tuple[float, ...] | None = None
    voting: Voting = Voting.HARD
    name: str | None = None

    def __post_init__(self):
        members = tuple((ModelKind(k), dict(p)) for k, p in self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        weights = (1.0,) * len(members) if self.weights is None else tuple(float(w) for w in self.weights)
        if len(weights) != len(members):
            raise ValueError(f"{len(members)} members but {len(weights)} weights")
        if any(w < 0 or not math.isfinite(w) for w in weights) or not any(w > 0 for w in weights):
            raise ValueError("weights must be finite, non-negative, and not all zero")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "voting", Voting(self.voting))
        if self.name is None:
            object.__setattr__(self, "name", "-".join(k.value for k, _ in members))

    @property
    def kinds(self) -> tuple[ModelKind, ...]:
        return tuple(k for k, _ in self.members)

    def with_voting(self, voting: Voting | str) -> "EnsembleSpec":
        return EnsembleSpec(self.members, self.weights, Voting(voting), self.name)

    def with_params(self, overrides: dict[ModelKind, dict]) -> "EnsembleSpec":
        members = tuple((k, {**p, **overrides.get(k, {})}) for k, p in self.members)
        return EnsembleSpec(members, self.weights, self.voting, self.name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "voting": self.voting.value,
            "weights": list(self.weights),
            "members": [{"kind": k.value, "params": p} for k, p in self.members],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EnsembleSpec":
        members = tuple((ModelKind(m["kind"]), m["params"]) for m in obj["members"])
        return cls(members, tuple(obj["weights"]), Voting(obj["voting"]), obj["name"])


PRESETS: dict[str, tuple[ModelKind, ...]] = {
    "dt-rf-knn-nb": (ModelKind.CART, ModelKind.RANDOM_FOREST, ModelKind.KNN, ModelKind.GAUSSIAN_NB),
    "dt-rf-nb": (ModelKind.CART, ModelKind.RANDOM_FOREST, ModelKind.GAUSSIAN_NB),
    "dt-rf-knn": (ModelKind.CART, ModelKind.RANDOM_FOREST, ModelKind.KNN),
}

SINGLE_MODELS: dict[str, ModelKind] = {
    "knn": ModelKind.KNN,
    "rf": ModelKind.RANDOM_FOREST,
    "cart": ModelKind.CART,
    "nb": ModelKind.GAUSSIAN_NB,
}


def preset(name: str, voting: Voting | str = Voting.HARD) -> EnsembleSpec:
    """Uniform-weight preset ensemble, e.g. ``preset("dt-rf-nb")``."""
    key = name.strip().lower()
    if key not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; use one of {', '.join(PRESETS)}")
    return EnsembleSpec(tuple((k, {}) for k in PRESETS[key]), voting=Voting(voting), name=key)


def single(kind: ModelKind | str, params: dict | None = None, name: str | None = None) -> EnsembleSpec:
    """A one-member spec; its predictions equal the member's."""
    k = kind if isinstance(kind, ModelKind) else parse_model_kind(kind)
    return EnsembleSpec(((k, dict(params or {})),), name=name or k.value)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed; the same (seed, keys) always gives the same value."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
