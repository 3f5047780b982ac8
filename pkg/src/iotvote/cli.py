"""``iotvote`` command-line interface.

Options resolve in three layers: built-in defaults, then ``--config FILE``
(JSON), then explicit flags. ``--save-config FILE`` writes the fully
resolved configuration; rerunning with it reproduces the output exactly.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from . import __version__
from .datamodel import (
    PRESETS,
    SINGLE_MODELS,
    EnsembleSpec,
    FeatureKind,
    ModelKind,
    Voting,
    parse_model_kind,
    preset,
    single,
)
from .ensemble import ensemble_error, fit_ensemble, load_ensemble, save_ensemble
from .errors import IotVoteError
from .evaluation import (
    Averaging,
    MetricRow,
    Report,
    Task,
    compare,
    evaluate_model,
    expand_voting,
    format_report,
    make_task,
    normalize_type_column,
)
from .ingest import (
    DEFAULT_MISSING,
    Preprocessor,
    SplitSpec,
    dataset_stats,
    drop_unlabeled,
    format_stats,
    impute_median,
    load_csv,
    merge_datasets,
    write_csv,
)

log = logging.getLogger("iotvote")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    input: str | None = None
    inputs: list[str] = field(default_factory=list)
    out: str | None = None
    report: str | None = None
    model: str | None = None
    params_in: str | None = None
    params_out: str | None = None
    label_col: str = "label"
    type_col: str = "type"
    missing: list[str] = field(default_factory=lambda: list(DEFAULT_MISSING))
    scale: bool = True
    test_fraction: float = 0.2
    seed: int = 42
    task: str = "binary"
    preset: str | None = None
    members: str | None = None
    weights: str | None = None
    presets: str = ",".join(PRESETS)
    models: str = ",".join(SINGLE_MODELS)
    voting: str | None = None  # None: hard for train/compare, the saved mode for predict/evaluate
    averaging: str = "weighted"
    emit: str = "table"
    max_depth: int = 12
    min_leaf_samples: int = 2
    min_impurity_decrease: float = 0.0
    n_trees: int = 100
    features_per_split: int | None = None
    bootstrap: bool = True
    n_jobs: int = 1
    k: int = 5
    var_smoothing: float = 1e-9
    n: int | None = None
    epsilon: float | None = None
    threshold: int | None = None

    @classmethod
    def resolve(cls, command: str, config_file: str | None, flags: dict[str, Any]) -> "RunConfig":
        values: dict[str, Any] = {}
        if config_file:
            try:
                loaded = json.loads(Path(config_file).read_text(encoding="utf-8"))
            except OSError as exc:
                raise UsageError(f"cannot read config {config_file}: {exc.strerror or exc}") from None
            except json.JSONDecodeError as exc:
                raise UsageError(f"config {config_file} is not valid JSON: {exc}") from None
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(loaded) - known)
            if unknown:
                raise UsageError(f"unknown config keys: {', '.join(unknown)}")
            values.update(loaded)
        values.update(flags)
        values["command"] = command
        return cls(**values)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def model_overrides(self) -> dict[ModelKind, dict]:
        tree = {"max_depth": self.max_depth, "min_leaf_samples": self.min_leaf_samples,
                "min_impurity_decrease": self.min_impurity_decrease}
        return {
            ModelKind.CART: dict(tree),
            ModelKind.RANDOM_FOREST: {**tree, "n_trees": self.n_trees, "features_per_split": self.features_per_split,
                                      "bootstrap": self.bootstrap, "n_jobs": self.n_jobs},
            ModelKind.KNN: {"k": self.k},
            ModelKind.GAUSSIAN_NB: {"var_smoothing_fraction": self.var_smoothing},
        }

    def validate(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise UsageError("--test-fraction must be strictly between 0 and 1")
        for name, value, allowed in (
            ("--task", self.task, {t.value for t in Task}),
            ("--averaging", self.averaging, {a.value for a in Averaging}),
            ("--emit", self.emit, {"table", "csv", "markdown"}),
        ):
            if value not in allowed:
                raise UsageError(f"{name} must be one of {', '.join(sorted(allowed))}")
        allowed_voting = {"hard", "soft", "both"} if self.command == "compare" else {"hard", "soft"}
        if self.voting is not None and self.voting not in allowed_voting:
            raise UsageError(f"--voting must be one of {', '.join(sorted(allowed_voting))}")


# argument parsing -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON run config; explicit flags override it")
    common.add_argument("--save-config", help="write the resolved run config to this path")
    common.add_argument("--label-col", help="binary label column (default: label)")
    common.add_argument("--type-col", help="attack-type column (default: type)")
    common.add_argument("--missing", nargs="*", help="tokens read as missing (default: '' NaN nan -)")
    common.add_argument("--test-fraction", type=float, help="held-out fraction (default: 0.2)")
    common.add_argument("--seed", type=int, help="master seed (default: 42)")
    common.add_argument("--voting", help="hard | soft (compare also accepts both)")
    common.add_argument("--averaging", help="weighted | macro")
    common.add_argument("--emit", help="table | csv | markdown")
    common.add_argument("-v", "--verbose", action="count", default=0)

    hyper = _Parser(add_help=False, argument_default=S)
    g = hyper.add_argument_group("hyperparameters")
    g.add_argument("--max-depth", type=int)
    g.add_argument("--min-leaf-samples", type=int)
    g.add_argument("--min-impurity-decrease", type=float)
    g.add_argument("--n-trees", type=int)
    g.add_argument("--features-per-split", type=int)
    g.add_argument("--no-bootstrap", dest="bootstrap", action="store_false")
    g.add_argument("--n-jobs", type=int)
    g.add_argument("--k", type=int, help="k-NN neighbour count")
    g.add_argument("--var-smoothing", type=float, help="GNB variance floor fraction")

    parser = _Parser(prog="iotvote", description="Voting-ensemble intrusion detection for IoT telemetry.")
    parser.add_argument("--version", action="version", version=f"iotvote {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("prepare", parents=[common], argument_default=S,
                       help="impute, label-encode and scale one CSV")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--report", help="write the ingest report (JSON) here instead of stdout text")
    p.add_argument("--params-in", help="apply preprocessing parameters saved by an earlier run")
    p.add_argument("--params-out", help="save the fitted preprocessing parameters")
    p.add_argument("--no-scale", dest="scale", action="store_false")

    p = sub.add_parser("merge", parents=[common], argument_default=S,
                       help="combine device CSVs and impute the gaps")
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("stats", parents=[common], argument_default=S, help="rows per attack type")
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("train", parents=[common, hyper], argument_default=S,
                       help="fit a model or ensemble and save it")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--task")
    p.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
    p.add_argument("--members", help="comma list of member kinds (dt/cart, rf, knn, nb/gnb)")
    p.add_argument("--weights", help="comma list of member weights")
    p.add_argument("--no-scale", dest="scale", action="store_false")

    p = sub.add_parser("predict", parents=[common], argument_default=S,
                       help="append a 'predicted' column to a CSV")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--out")

    p = sub.add_parser("evaluate", parents=[common], argument_default=S,
                       help="score a saved model on a labelled CSV")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--out")

    p = sub.add_parser("compare", parents=[common, hyper], argument_default=S,
                       help="cross-compare models over datasets")
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--task")
    p.add_argument("--presets", help="comma list of presets ('' for none)")
    p.add_argument("--models", help="comma list of single models: knn,rf,cart,nb ('' for none)")
    p.add_argument("--no-scale", dest="scale", action="store_false")

    p = sub.add_parser("ensemble-error", parents=[common], argument_default=S,
                       help="binomial error of n independent voters")
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--k", dest="threshold", type=int, help="wrong-vote threshold (default n//2+1)")
    return parser


# commands ----------------------------------------------------------------------------


def _require(cfg: RunConfig, *names: str) -> None:
    for n in names:
        v = getattr(cfg, n)
        if v is None or v == []:
            raise UsageError(f"{cfg.command} needs --{n.replace('_', '-')}")


def _load(cfg: RunConfig, path: str, kinds: dict[str, FeatureKind] | None = None):
    return load_csv(path, kinds=kinds, missing_values=cfg.missing, label_column=cfg.label_col,
                    type_column=cfg.type_col)


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_prepare(cfg: RunConfig) -> None:
    _require(cfg, "input", "out")
    data = _load(cfg, cfg.input)
    data, dropped = drop_unlabeled(data)
    if cfg.params_in:
        pre = Preprocessor.from_json(json.loads(Path(cfg.params_in).read_text(encoding="utf-8")))
        out, report = pre.transform(data)
    else:
        pre, out, report = Preprocessor.fit(data, scale=cfg.scale)
    report.rows_in += dropped
    report.dropped_unlabeled = dropped
    write_csv(out, cfg.out)
    if cfg.params_out:
        Path(cfg.params_out).write_text(json.dumps(pre.to_json(), indent=1) + "\n", encoding="utf-8")
    if cfg.report:
        Path(cfg.report).write_text(json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8")
    else:
        sys.stdout.write(report.to_text())


def cmd_merge(cfg: RunConfig) -> None:
    _require(cfg, "inputs", "out")
    parts = [_load(cfg, p) for p in cfg.inputs]
    merged, fills = impute_median(merge_datasets(parts))
    write_csv(merged, cfg.out)
    log.info("merged %d file(s) into %d rows", len(parts), merged.n_rows)


def cmd_stats(cfg: RunConfig) -> None:
    _require(cfg, "inputs")
    per = {Path(p).stem: dataset_stats(_load(cfg, p), cfg.type_col) for p in cfg.inputs}
    _write_text(format_stats(per, cfg.emit), cfg.out)


def _train_spec(cfg: RunConfig) -> EnsembleSpec:
    chosen = [x for x in (cfg.preset, cfg.members) if x]
    if len(chosen) != 1:
        raise UsageError("train needs exactly one of --preset or --members")
    if cfg.preset:
        try:
            spec = preset(cfg.preset, cfg.voting or "hard")
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        try:
            kinds = [parse_model_kind(m) for m in _csv_list(cfg.members)]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if len(kinds) == 1:
            name = next((k for k, v in SINGLE_MODELS.items() if v is kinds[0]), kinds[0].value)
        else:
            name = "-".join(m.lower() for m in _csv_list(cfg.members))
        spec = EnsembleSpec(tuple((k, {}) for k in kinds), voting=Voting(cfg.voting or "hard"), name=name)
    if cfg.weights:
        try:
            w = tuple(float(x) for x in _csv_list(cfg.weights))
            spec = EnsembleSpec(spec.members, w, spec.voting, spec.name)
        except ValueError as exc:
            raise UsageError(f"bad --weights: {exc}") from None
    return spec.with_params(cfg.model_overrides())


def cmd_train(cfg: RunConfig) -> None:
    _require(cfg, "input", "out")
    spec = _train_spec(cfg)
    data = _load(cfg, cfg.input)
    data, _ = drop_unlabeled(data)
    if Task(cfg.task) is Task.MULTICLASS:
        data = normalize_type_column(data)
    pre, prepared, _ = Preprocessor.fit(data, scale=cfg.scale)
    td = make_task(prepared, cfg.task)
    model = fit_ensemble(spec, td.X, td.y, td.labels, cfg.seed)
    extra = {
        "task": cfg.task,
        "feature_columns": list(td.feature_names),
        "label_col": cfg.label_col,
        "type_col": cfg.type_col,
        "preprocessor": pre.to_json(),
    }
    save_ensemble(model, cfg.out, extra)
    log.info("saved %s (%d member(s)) to %s", spec.name, len(spec.members), cfg.out)


def _load_bundle(cfg: RunConfig):
    model, extra = load_ensemble(cfg.model)
    if "preprocessor" not in extra:
        raise IotVoteError(f"{cfg.model} carries no preprocessing parameters")
    pre = Preprocessor.from_json(extra["preprocessor"])
    return model, extra, pre


def cmd_predict(cfg: RunConfig) -> None:
    _require(cfg, "model", "input")
    model, extra, pre = _load_bundle(cfg)
    raw = _load(cfg, cfg.input, pre.kinds)
    prepared, _ = pre.transform(raw)
    X = prepared.numeric_matrix(extra["feature_columns"])
    pred = model.predict(X, cfg.voting)
    kind = FeatureKind.NUMERIC if extra["task"] == Task.BINARY.value else FeatureKind.CATEGORICAL
    out = raw.with_column("predicted", kind, pred)
    if cfg.out:
        write_csv(out, cfg.out)
    else:
        write_csv(out, sys.stdout)


def cmd_evaluate(cfg: RunConfig) -> None:
    _require(cfg, "model", "input")
    model, extra, pre = _load_bundle(cfg)
    raw = _load(cfg, cfg.input, pre.kinds)
    raw, _ = drop_unlabeled(raw)
    if extra["task"] == Task.MULTICLASS.value:
        raw = normalize_type_column(raw)
    prepared, _ = pre.transform(raw)
    td = make_task(prepared, extra["task"], extra["feature_columns"])
    voting = cfg.voting

    class _Voter:
        def predict_codes(self, X):
            return model.predict_codes(X, voting)

    s = evaluate_model(_Voter(), td, cfg.averaging)
    row = MetricRow(Path(cfg.input).stem, model.spec.name, Task(extra["task"]), Averaging(cfg.averaging),
                    s.accuracy, s.precision, s.recall, s.f_measure, n_test=len(td.y))
    _write_text(format_report(Report([row]), cfg.emit), cfg.out)


def cmd_compare(cfg: RunConfig) -> None:
    _require(cfg, "inputs")
    specs: list[EnsembleSpec] = []
    try:
        for name in _csv_list(cfg.models):
            if name.lower() not in SINGLE_MODELS:
                raise ValueError(f"unknown single model {name!r}; use one of {', '.join(SINGLE_MODELS)}")
            specs.append(single(SINGLE_MODELS[name.lower()], name=name.lower()))
        specs += [preset(p) for p in _csv_list(cfg.presets)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not specs:
        raise UsageError("compare needs at least one model or preset")
    overrides = cfg.model_overrides()
    specs = [s.with_params(overrides) for s in expand_voting(specs, cfg.voting or "hard")]
    datasets = [(Path(p).stem, _load(cfg, p)) for p in cfg.inputs]
    datasets = [(n, drop_unlabeled(d)[0]) for n, d in datasets]
    report = compare(datasets, specs, SplitSpec(cfg.test_fraction, cfg.seed, cfg.label_col), cfg.task,
                     cfg.averaging, cfg.seed, cfg.scale)
    _write_text(format_report(report, cfg.emit), cfg.out)


def cmd_ensemble_error(cfg: RunConfig) -> None:
    _require(cfg, "n", "epsilon")
    value = ensemble_error(cfg.n, cfg.epsilon, cfg.threshold)
    _write_text(f"{value:.9f}\n", cfg.out)


COMMANDS = {
    "prepare": cmd_prepare,
    "merge": cmd_merge,
    "stats": cmd_stats,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "ensemble-error": cmd_ensemble_error,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not ns.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        flags = vars(ns).copy()
        command = flags.pop("command")
        verbose = flags.pop("verbose", 0)
        config_file = flags.pop("config", None)
        save_config = flags.pop("save_config", None)
        logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s: %(message)s",
                            stream=sys.stderr)
        cfg = RunConfig.resolve(command, config_file, flags)
        cfg.validate()
        if save_config:
            Path(save_config).write_text(cfg.to_json(), encoding="utf-8")
        COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"iotvote: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IotVoteError, OSError) as exc:
        print(f"iotvote: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"iotvote: invalid value: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"iotvote: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
