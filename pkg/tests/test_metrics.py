import math

import numpy as np
import pytest

from streakcnn.metrics import (ConfusionMatrix, UndefinedROCError, build_report, concordance_auc,
                               confusion, degenerate_metrics, f1, fnr, fpr, histogram_csv, mcc,
                               precision, probability_histogram, recall, roc, roc_csv)

FIG4 = ConfusionMatrix(tp=170, fp=5, tn=175, fn=3)


def fig4_scores():
    """Scores whose 0.5-threshold confusion reproduces the validation counts."""
    labels = np.array([1] * 173 + [0] * 180)
    scores = np.array([0.9] * 170 + [0.1] * 3 + [0.2] * 175 + [0.7] * 5)
    return scores, labels


class TestConfusion:
    def test_perfect(self):
        cm = confusion([1.0, 1.0, 0.0], [1, 1, 0])
        assert cm.fp == cm.fn == 0 and cm.total == 3

    def test_single_class(self):
        cm = confusion([0.2, 0.9], [1, 1])
        assert cm.tn == cm.fp == 0

    def test_threshold_inclusive(self):
        assert confusion([0.5], [1]).tp == 1

    def test_reproduces_fig4_counts(self):
        s, y = fig4_scores()
        assert confusion(s, y) == FIG4

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            confusion([0.2], [1, 0])
        with pytest.raises(ValueError):
            confusion([1.2], [1])
        with pytest.raises(ValueError):
            confusion([0.2], [1], positive_class="galaxy")


class TestRates:
    def test_fig4_star_positive(self):
        assert precision(FIG4) == pytest.approx(170 / 175)
        assert fpr(FIG4) == pytest.approx(0.0278, abs=1e-4)
        assert fnr(FIG4) == pytest.approx(0.0173, abs=1e-4)
        assert mcc(FIG4) == pytest.approx(0.9547, abs=5e-4)

    def test_fig4_artefact_positive(self):
        s, y = fig4_scores()
        cm = confusion(s, y, positive_class="artefact")
        assert cm == FIG4.swapped()
        assert precision(cm) == pytest.approx(0.983, abs=1e-3)
        assert recall(cm) == pytest.approx(0.972, abs=1e-3)

    def test_swap_keeps_mcc(self):
        assert mcc(FIG4.swapped()) == pytest.approx(mcc(FIG4), abs=1e-15)
        assert FIG4.swapped().swapped() == FIG4

    def test_perfect_counts(self):
        cm = ConfusionMatrix(10, 0, 7, 0)
        assert precision(cm) == recall(cm) == f1(cm) == mcc(cm) == 1.0

    def test_zero_denominators(self):
        cm = ConfusionMatrix(0, 0, 5, 0)
        assert precision(cm) == recall(cm) == mcc(cm) == 0.0
        assert "precision" in degenerate_metrics(cm)
        report = build_report([0.1] * 5, [0] * 5)
        assert "zero_denominator:precision" in report.warnings and "undefined_roc" in report.warnings

    @pytest.mark.parametrize("seed", range(20))
    def test_f1_harmonic_bound(self, seed):
        rng = np.random.default_rng(seed)
        cm = ConfusionMatrix(*(int(v) for v in rng.integers(1, 50, size=4)))
        p, r = precision(cm), recall(cm)
        assert f1(cm) <= (p + r) / 2 + 1e-15
        assert f1(cm) == pytest.approx(2 * p * r / (p + r))
        assert -1 <= mcc(cm) <= 1

    def test_f1_equality_iff_equal(self):
        cm = ConfusionMatrix(8, 2, 0, 2)
        assert f1(cm) == pytest.approx((precision(cm) + recall(cm)) / 2)


class TestROC:
    def test_separated(self):
        assert roc([0.9, 0.8, 0.1], [1, 1, 0])[1] == 1.0

    def test_all_ties(self):
        assert roc([0.4] * 6, [1, 0, 1, 0, 0, 1])[1] == 0.5

    def test_single_class(self):
        with pytest.raises(UndefinedROCError):
            roc([0.3, 0.6], [0, 0])

    def test_endpoints(self):
        points, _ = roc([0.3, 0.6, 0.6, 0.9], [0, 1, 0, 1])
        assert points[0] == (0.0, 0.0, math.inf)
        assert points[-1] == (1.0, 1.0, -math.inf)

    def test_concordance_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 201))
            y = rng.integers(0, 2, size=n)
            y[0], y[1] = 0, 1
            s = np.round(rng.random(n), int(rng.integers(1, 4)))  # force ties
            assert abs(roc(s, y)[1] - concordance_auc(s, y)) <= 1e-12

    def test_monotone_sweep(self, rng):
        s, y = rng.random(300), rng.integers(0, 2, size=300)
        points, _ = roc(s, y)
        fprs = [p[0] for p in points]
        tprs = [p[1] for p in points]
        assert fprs == sorted(fprs) and tprs == sorted(tprs)

    def test_csv(self):
        text = roc_csv(roc([0.2, 0.8], [0, 1])[0])
        assert text.splitlines()[0] == "fpr,tpr,threshold"
        assert text.splitlines()[1] == "0,0,inf"


class TestHistogram:
    def test_empty(self):
        assert probability_histogram([]) == [0] * 10

    def test_closure(self):
        assert probability_histogram([1.0])[9] == 1
        assert probability_histogram([0.0])[0] == 1
        assert probability_histogram([0.1])[1] == 1

    def test_total(self, rng):
        s = rng.random(777)
        assert sum(probability_histogram(s)) == 777

    def test_csv(self):
        lines = histogram_csv(probability_histogram([0.05, 0.95, 1.0])).splitlines()
        assert lines[1] == "0.00,0.10,1" and lines[-1] == "0.90,1.00,2"


def test_report_text_keys():
    s, y = fig4_scores()
    text = build_report(s, y).to_text()
    keys = [line.split("=")[0] for line in text.splitlines()]
    for k in ("precision", "recall", "f1", "mcc", "fpr", "fnr", "auc"):
        assert k in keys
    assert "fpr=0.027778" in text
