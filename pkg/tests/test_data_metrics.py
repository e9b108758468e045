import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmow import data_metrics as dm
from cmow.errors import DataError, StructuralError


class TestBinning:
    def test_sts_b_bin_count(self):
        spec = dm.TaskSpec(name="sts", arity="pair", label_kind="binned-regression",
                           lo=0.0, hi=5.0, width=0.2, metrics=("pearson", "spearman"), selection="avg")
        assert spec.n_classes == 25

    def test_boundaries(self):
        assert dm.bin_score(0.0, 0, 5, 0.2) == 0
        assert dm.bin_score(5.0, 0, 5, 0.2) == 24
        assert dm.bin_score(0.19, 0, 5, 0.2) == 0
        assert dm.bin_score(0.2, 0, 5, 0.2) == 1

    def test_out_of_range(self):
        with pytest.raises(DataError):
            dm.bin_score(5.1, 0, 5, 0.2)
        with pytest.raises(DataError):
            dm.bin_score(-0.1, 0, 5, 0.2)

    def test_debin_midpoints(self):
        assert dm.debin(0, 0, 5, 0.2) == pytest.approx(0.1)
        assert dm.debin(24, 0, 5, 0.2) == pytest.approx(4.9)

    def test_round_trip_error_bound(self):
        rng = np.random.default_rng(0)
        scores = rng.uniform(0, 5, size=1000)
        for s in scores:
            back = dm.debin(dm.bin_score(s, 0, 5, 0.2), 0, 5, 0.2)
            assert abs(back - s) <= 0.1 + 1e-12

    def test_non_integer_bin_count_rejected(self):
        with pytest.raises(StructuralError):
            dm.TaskSpec(name="x", label_kind="binned-regression", lo=0, hi=1, width=0.3)


class TestClassificationMetrics:
    def test_perfect_predictions(self):
        preds = golds = np.array([0, 1, 1, 0, 1])
        assert dm.metric_accuracy(preds, golds) == 1.0
        assert dm.metric_f1(preds, golds) == 1.0
        assert dm.metric_matthews(preds, golds) == 1.0

    def test_matthews_formula_evaluation(self):
        # confusion TP=1, TN=2, FP=1, FN=0
        preds = np.array([1, 1, 0, 0])
        golds = np.array([1, 0, 0, 0])
        want = (1 * 2 - 1 * 0) / math.sqrt(2 * 1 * 3 * 2)
        assert dm.metric_matthews(preds, golds) == pytest.approx(want)
        assert dm.metric_matthews(preds, golds) == pytest.approx(0.5773502691896258)

    def test_matthews_zero_marginal_convention(self):
        preds = np.ones(6, dtype=int)
        golds = np.array([0, 1, 0, 1, 1, 0])
        assert dm.metric_matthews(preds, golds) == 0.0

    def test_f1_no_positive_predictions(self):
        assert dm.metric_f1(np.zeros(4, int), np.array([1, 1, 0, 0])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(StructuralError):
            dm.metric_accuracy(np.zeros(3), np.zeros(4))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        preds = rng.integers(0, 2, size=50)
        golds = rng.integers(0, 2, size=50)
        perm = rng.permutation(50)
        for fn in (dm.metric_accuracy, dm.metric_f1, dm.metric_matthews):
            assert fn(preds, golds) == pytest.approx(fn(preds[perm], golds[perm]))


def brute_force_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def brute_force_ranks(x):
    out = [0.0] * len(x)
    for i, v in enumerate(x):
        less = sum(1 for u in x if u < v)
        equal = sum(1 for u in x if u == v)
        out[i] = less + (equal + 1) / 2.0
    return out


class TestCorrelationMetrics:
    def test_identical_vectors(self):
        x = np.array([1.0, 2.0, 5.0, 3.0])
        assert dm.metric_pearson(x, x) == pytest.approx(1.0)
        assert dm.metric_spearman(x, x) == pytest.approx(1.0)

    def test_negated(self):
        x = np.array([1.0, 2.0, 5.0, 3.0])
        assert dm.metric_pearson(x, -x) == pytest.approx(-1.0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=100)
        y = 0.5 * x + rng.normal(size=100)
        assert dm.metric_pearson(x, y) == pytest.approx(brute_force_pearson(x.tolist(), y.tolist()), abs=1e-10)
        want = brute_force_pearson(brute_force_ranks(x.tolist()), brute_force_ranks(y.tolist()))
        assert dm.metric_spearman(x, y) == pytest.approx(want, abs=1e-10)

    def test_ties_use_average_ranks(self):
        x = np.array([1.0, 1.0, 2.0])
        assert dm.average_ranks(x).tolist() == [1.5, 1.5, 3.0]

    def test_monotone_transform_spearman_is_one(self):
        rng = np.random.default_rng(3)
        g = rng.normal(size=40)
        assert dm.metric_spearman(np.exp(g) + 3, g) == pytest.approx(1.0)

    def test_constant_vector_rejected(self):
        with pytest.raises(DataError):
            dm.metric_pearson(np.ones(5), np.arange(5.0))


class TestEvaluatePredictions:
    def test_binned_regression_uses_raw_scores(self):
        spec = dm.TaskSpec(name="sts", arity="pair", label_kind="binned-regression",
                           metrics=("pearson", "spearman"), selection="avg")
        rows = [dm.ExampleRow(id=i, a="x", b="y", label=dm.bin_score(s, 0, 5, 0.2), score=s)
                for i, s in enumerate([0.3, 1.7, 2.2, 4.9, 3.3, 0.1])]
        preds = [r.label for r in rows]  # perfectly binned predictions
        metrics = dm.evaluate_predictions(spec, preds, rows)
        assert metrics["spearman"] > 0.99
        assert metrics["pearson"] > 0.99

    def test_selection_value_avg(self):
        spec = dm.TaskSpec(name="t", metrics=("accuracy", "f1"), selection="avg")
        assert dm.selection_value(spec, {"accuracy": 0.8, "f1": 0.6}) == pytest.approx(0.7)


class TestReaders:
    def test_pair_task_rows(self, tmp_path):
        p = tmp_path / "t.tsv"
        p.write_text("s1\ts2\tgold\nhello there\tworld\t1\nfoo\tbar\t0\nbaz\tqux\t1\n", encoding="utf-8")
        spec = dm.TaskSpec(name="t", arity="pair", n_classes=2)
        rows = dm.read_task_tsv(p, spec, {"a": "s1", "b": "s2", "label": "gold"})
        assert len(rows) == 3
        assert all(r.b is not None for r in rows)
        assert [r.id for r in rows] == [0, 1, 2]

    def test_missing_label_strict_fatal(self, tmp_path):
        p = tmp_path / "t.tsv"
        p.write_text("s1\tlabel\nhello\t1\nworld\t\n", encoding="utf-8")
        spec = dm.TaskSpec(name="t", arity="single")
        with pytest.raises(DataError, match="t.tsv:3"):
            dm.read_task_tsv(p, spec, {"a": "s1", "label": "label"})

    def test_lenient_mode_skips_with_line_number(self, tmp_path, caplog):
        import logging

        p = tmp_path / "t.tsv"
        p.write_text("s1\tlabel\nhello\t1\nworld\tnope\nagain\t0\n", encoding="utf-8")
        spec = dm.TaskSpec(name="t", arity="single")
        with caplog.at_level(logging.WARNING, logger="cmow"):
            rows = dm.read_task_tsv(p, spec, {"a": "s1", "label": "label"}, strict=False)
        assert [r.id for r in rows] == [0, 2]
        assert any(":3:" in r.message for r in caplog.records)

    def test_binned_on_load(self, tmp_path):
        p = tmp_path / "t.tsv"
        p.write_text("s1\ts2\tscore\na\tb\t2.5\nc\td\t0.0\ne\tf\t5.0\n", encoding="utf-8")
        spec = dm.TaskSpec(name="sts", arity="pair", label_kind="binned-regression",
                           metrics=("pearson",), selection="pearson")
        rows = dm.read_task_tsv(p, spec, {"a": "s1", "b": "s2", "label": "score"})
        assert [r.label for r in rows] == [dm.bin_score(2.5, 0, 5, 0.2), 0, 24]
        assert rows[0].score == 2.5

    def test_corpus_reader_skips_blank_lines_keeps_ids(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("first\n\nsecond\n   \nthird\n", encoding="utf-8")
        out = list(dm.read_corpus(p))
        assert out == [(0, "first"), (2, "second"), (4, "third")]


@given(st.lists(st.integers(min_value=-1000, max_value=1000), min_size=2, max_size=60))
@settings(max_examples=60, deadline=None)
def test_property_spearman_of_monotone_transform(golds):
    golds = np.asarray(golds, dtype=np.float64)
    if np.unique(golds).size < 2:
        return
    transformed = np.exp(golds / 500.0)  # strictly monotone
    assert dm.metric_spearman(transformed, golds) == pytest.approx(1.0)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=100, deadline=None)
def test_property_mcc_bounds(seed):
    rng = np.random.default_rng(seed)
    preds = rng.integers(0, 2, size=30)
    golds = rng.integers(0, 2, size=30)
    mcc = dm.metric_matthews(preds, golds)
    assert -1.0 - 1e-12 <= mcc <= 1.0 + 1e-12
