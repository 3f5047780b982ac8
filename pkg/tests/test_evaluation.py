import logging
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotvote.datamodel import ATTACK_LABELS, Dataset, FeatureKind, LabelSet, ModelKind, Schema, preset, single
from iotvote.errors import DomainError, TaskError
from iotvote.evaluation import (
    ConfusionMatrix,
    Report,
    compare,
    confusion,
    expand_voting,
    format_report,
    make_binary_task,
    make_multiclass_task,
    metrics,
)
from iotvote.ingest import SplitSpec

N, C = FeatureKind.NUMERIC, FeatureKind.CATEGORICAL
AB = LabelSet(("A", "B"))
FAST = {ModelKind.RANDOM_FOREST: {"n_trees": 8}}
PRESETS = [preset(n).with_params(FAST) for n in ("dt-rf-knn-nb", "dt-rf-nb", "dt-rf-knn")]


def cm(counts, labels=None):
    counts = np.array(counts, dtype=np.int64)
    return ConfusionMatrix(labels or LabelSet(tuple(range(len(counts)))), counts)


def synthetic(seed=0, n=200, leak=False, types=False):
    rng = np.random.default_rng(seed)
    label = rng.integers(0, 2, n)
    cols = {"f0": (rng.normal(size=n) + 1.5 * label).tolist(), "f1": rng.normal(size=n).tolist(),
            "state": rng.choice(["ON", "OFF"], n).tolist()}
    schema = [("f0", N), ("f1", N), ("state", C)]
    if leak:
        cols["leak"] = label.astype(float).tolist()
        schema.append(("leak", N))
    cols["label"] = label.tolist()
    schema.append(("label", N))
    if types:
        attacks = np.array(ATTACK_LABELS[1:4])
        cols["type"] = np.where(label == 0, "normal", attacks[rng.integers(0, 3, n)]).tolist()
        schema.append(("type", C))
    return Dataset.from_columns(Schema(tuple(schema)), cols)


class TestConfusion:
    def test_counting(self):
        m = confusion(["A", "A", "B"], ["A", "B", "B"], AB)
        assert m.counts.tolist() == [[1, 1], [0, 1]]

    def test_perfect(self):
        m = confusion(["A", "B", "B"], ["A", "B", "B"], AB)
        assert m.counts.tolist() == [[1, 0], [0, 2]]

    def test_empty(self):
        assert confusion([], [], AB).counts.tolist() == [[0, 0], [0, 0]]

    def test_unknown_label(self):
        with pytest.raises(DomainError):
            confusion(["A"], ["C"], AB)


class TestMetrics:
    def test_diagonal(self):
        s = metrics(cm([[50, 0], [0, 50]]))
        assert (s.accuracy, s.precision, s.recall, s.f_measure) == (1.0, 1.0, 1.0, 1.0)

    def test_hand_computed(self):
        s = metrics(cm([[1, 1], [0, 1]]))
        assert s.accuracy == float(Fraction(2, 3))
        # precision A = 1, B = 1/2; supports 2 and 1
        assert s.precision == float(Fraction(5, 6))
        assert s.recall == float(Fraction(2, 3))
        f_a, f_b = Fraction(2, 3), Fraction(2, 3)  # 2pr/(p+r) with (1, 1/2) and (1/2, 1)
        assert s.f_measure == float((2 * f_a + f_b) / 3)

    def test_macro(self):
        s = metrics(cm([[1, 1], [0, 1]]), "macro")
        assert s.precision == 0.75 and s.recall == 0.75

    def test_zero_division(self, caplog):
        with caplog.at_level(logging.WARNING):
            s = metrics(cm([[3, 0], [2, 0]]))
        assert s.zero_division == 1
        # precision A = 3/5 (weight 3/5), B = 0
        assert s.precision == float(Fraction(9, 25))
        assert "never predicted" in caplog.text

    def test_empty_matrix(self):
        with pytest.raises(DomainError):
            metrics(cm([[0, 0], [0, 0]]))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 6).flatmap(lambda k: st.lists(st.lists(st.integers(0, 50), min_size=k, max_size=k),
                                                        min_size=k, max_size=k)))
    def test_accuracy_is_weighted_recall(self, counts):
        if not sum(map(sum, counts)):
            counts[0][0] = 1
        s = metrics(cm(counts))
        assert s.accuracy == s.recall
        for v in (s.precision, s.recall, s.f_measure):
            assert 0.0 <= v <= 1.0


class TestTasks:
    def test_binary(self):
        t = make_binary_task(synthetic(leak=False).take(range(10)).with_column(
            "state", N, [0.0] * 10))
        assert t.labels.labels == (0, 1)
        assert t.X.shape == (10, 3)

    def test_multiclass(self):
        from iotvote.ingest import Preprocessor
        _, d, _ = Preprocessor.fit(synthetic(types=True))
        t = make_multiclass_task(d)
        assert len(t.labels) == 8
        assert set(t.y) <= {0, 1, 2, 3}

    def test_multiclass_needs_type(self):
        from iotvote.ingest import Preprocessor
        _, d, _ = Preprocessor.fit(synthetic())
        with pytest.raises(TaskError):
            make_multiclass_task(d)


class TestCompare:
    def test_grid(self):
        report = compare([("a", synthetic(1)), ("b", synthetic(2))], PRESETS)
        assert len(report.rows) == 6
        assert report.datasets() == ["a", "b"]
        assert report.models() == ["dt-rf-knn-nb", "dt-rf-nb", "dt-rf-knn"]
        assert all(r.ok for r in report.rows)

    def test_leak_feature(self):
        models = PRESETS + [single(k, FAST.get(k)) for k in ModelKind]
        report = compare([("leak", synthetic(3, leak=True))], models)
        for row in report.rows:
            assert row.accuracy >= 0.99, row

    def test_deterministic_bytes(self):
        data = [("a", synthetic(4, types=True))]
        outs = {format_report(compare(data, PRESETS, task="multiclass"), emit) for emit in ["csv"] * 2}
        assert len(outs) == 1

    def test_multiclass(self):
        report = compare([("m", synthetic(5, types=True))], PRESETS[:1], task="multiclass", averaging="macro")
        assert report.rows[0].ok and report.rows[0].task.value == "multiclass"

    def test_failed_cell_is_recorded(self):
        bad = single(ModelKind.KNN, {"k": 10_000})
        report = compare([("a", synthetic(6))], [bad, PRESETS[1]])
        assert not report.rows[0].ok and "ParameterError" in report.rows[0].error
        assert report.rows[1].ok
        assert "ERR" in format_report(report)

    def test_unusable_dataset(self):
        report = compare([("a", synthetic(7))], PRESETS[:2], task="multiclass")
        assert [r.ok for r in report.rows] == [False, False]

    def test_split_respected(self):
        report = compare([("a", synthetic(8, n=100))], PRESETS[:1], SplitSpec(0.3, 1))
        assert report.rows[0].n_test == 30

    def test_expand_both(self):
        names = [s.name for s in expand_voting(PRESETS[:1] + [single("nb")], "both")]
        assert names == ["dt-rf-knn-nb", "dt-rf-knn-nb[soft]", "gnb"]


class TestEmitters:
    def _report(self):
        return compare([("a", synthetic(9))], PRESETS[1:])

    def test_markdown_shape(self):
        text = format_report(self._report(), "markdown")
        lines = text.splitlines()
        assert lines[0] == "| Dataset | Metric | dt-rf-nb | dt-rf-knn |"
        assert [ln.split("|")[2].strip() for ln in lines[2:6]] == ["Accuracy", "Precision", "Recall", "F-measure"]

    def test_csv_full_precision(self):
        report = self._report()
        text = format_report(report, "csv")
        first = text.splitlines()[1].split(",")
        assert float(first[4]) == report.rows[0].accuracy

    def test_table(self):
        assert format_report(self._report()).splitlines()[0].startswith("Dataset")

    def test_unknown(self):
        with pytest.raises(ValueError):
            format_report(Report(), "html")
