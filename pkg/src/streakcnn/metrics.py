"""Binary classification metrics for star (1) / artefact (0) scores.

Scores are the model's probability that a source is a star. ``positive_class``
chooses which class counts as "positive" for the confusion matrix; precision
and recall read differently under the two choices, so it is always explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POSITIVE_CLASSES = ("star", "artefact")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    positive_class: str = "star"

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionMatrix":
        """Same predictions counted with the other class as positive."""
        other = "artefact" if self.positive_class == "star" else "star"
        return ConfusionMatrix(self.tn, self.fn, self.tp, self.fp, other)


def _scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if s.size and (np.isnan(s).any() or s.min() < 0.0 or s.max() > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (artefact) or 1 (star)")
    return s, y.astype(np.int64)


def confusion(scores, labels, threshold: float = 0.5, positive_class: str = "star") -> ConfusionMatrix:
    """Tally predictions; ``score >= threshold`` predicts star."""
    if positive_class not in POSITIVE_CLASSES:
        raise ValueError(f"positive_class must be one of {POSITIVE_CLASSES}")
    s, y = _scores_labels(scores, labels)
    pred_star = s >= threshold
    star = y == 1
    cm = ConfusionMatrix(
        tp=int(np.sum(pred_star & star)),
        fp=int(np.sum(pred_star & ~star)),
        tn=int(np.sum(~pred_star & ~star)),
        fn=int(np.sum(~pred_star & star)),
    )
    return cm if positive_class == "star" else cm.swapped()


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return _ratio(2.0 * p * r, p + r)


def mcc(cm: ConfusionMatrix) -> float:
    den = math.sqrt(float(cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn))
    return _ratio(float(cm.tp) * cm.tn - float(cm.fp) * cm.fn, den)


def fpr(cm: ConfusionMatrix) -> float:
    return _ratio(cm.fp, cm.fp + cm.tn)


def fnr(cm: ConfusionMatrix) -> float:
    return _ratio(cm.fn, cm.fn + cm.tp)


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.total)


def degenerate_metrics(cm: ConfusionMatrix) -> list[str]:
    """Names of metrics whose denominator is zero (reported as 0)."""
    zero = {
        "precision": cm.tp + cm.fp == 0,
        "recall": cm.tp + cm.fn == 0,
        "fpr": cm.fp + cm.tn == 0,
        "fnr": cm.fn + cm.tp == 0,
        "accuracy": cm.total == 0,
    }
    zero["f1"] = precision(cm) + recall(cm) == 0
    zero["mcc"] = 0 in (cm.tp + cm.fp, cm.tp + cm.fn, cm.tn + cm.fp, cm.tn + cm.fn)
    return [name for name, bad in zero.items() if bad]


class UndefinedROCError(ValueError):
    pass


def roc(scores, labels) -> tuple[list[tuple[float, float, float]], float]:
    """ROC points ``(fpr, tpr, threshold)`` for star-positive scores, and the
    trapezoidal AUC.

    Thresholds run from +inf through every distinct score (descending) to
    -inf; a point counts ``score >= threshold`` as positive.
    """
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedROCError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(1 - y_sorted)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    tpr = np.concatenate([[0.0], tps[ends] / n_pos, [1.0]])
    fpr_ = np.concatenate([[0.0], fps[ends] / n_neg, [1.0]])
    thresholds = np.concatenate([[math.inf], s_sorted[ends], [-math.inf]])
    auc = float(np.sum((fpr_[1:] - fpr_[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    points = [(float(a), float(b), float(t)) for a, b, t in zip(fpr_, tpr, thresholds)]
    return points, auc


def concordance_auc(scores, labels) -> float:
    """Pairwise probability that a star outscores an artefact, ties counting half."""
    s, y = _scores_labels(scores, labels)
    pos, neg = s[y == 1], s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise UndefinedROCError("concordance needs both classes present")
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def probability_histogram(scores, bin_width: float = 0.1) -> list[int]:
    """Counts over bins ``[0, w), [w, 2w), ..., [1 - w, 1]``."""
    nbins = round(1.0 / bin_width)
    if not math.isclose(nbins * bin_width, 1.0):
        raise ValueError(f"bin width {bin_width} does not divide [0, 1]")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    edges = np.arange(nbins + 1) / nbins
    idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, nbins - 1)
    return np.bincount(idx, minlength=nbins).tolist()


@dataclass
class MetricsReport:
    confusion: ConfusionMatrix
    threshold: float
    precision: float
    recall: float
    f1: float
    mcc: float
    fpr: float
    fnr: float
    accuracy: float
    auc: float
    roc_points: list = field(default_factory=list)
    histogram: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_text(self, prefix: str = "") -> str:
        cm = self.confusion
        rows = [
            ("positive_class", cm.positive_class),
            ("threshold", repr(self.threshold)),
            ("n", cm.total), ("tp", cm.tp), ("fp", cm.fp), ("tn", cm.tn), ("fn", cm.fn),
        ]
        rows += [(k, f"{getattr(self, k):.6f}") for k in
                 ("precision", "recall", "f1", "mcc", "fpr", "fnr", "accuracy", "auc")]
        rows.append(("warnings", ",".join(self.warnings) or "none"))
        return "".join(f"{prefix}{k}={v}\n" for k, v in rows)


def build_report(scores, labels, threshold: float = 0.5, positive_class: str = "star") -> MetricsReport:
    cm = confusion(scores, labels, threshold, positive_class)
    warnings = [f"zero_denominator:{name}" for name in degenerate_metrics(cm)]
    try:
        points, auc = roc(scores, labels)
    except UndefinedROCError:
        points, auc = [], 0.0
        warnings.append("undefined_roc")
    return MetricsReport(
        confusion=cm, threshold=threshold,
        precision=precision(cm), recall=recall(cm), f1=f1(cm), mcc=mcc(cm),
        fpr=fpr(cm), fnr=fnr(cm), accuracy=accuracy(cm), auc=auc,
        roc_points=points, histogram=probability_histogram(scores), warnings=warnings,
    )


def roc_csv(points: Sequence[tuple[float, float, float]]) -> str:
    lines = ["fpr,tpr,threshold"]
    lines += [f"{a:.10g},{b:.10g},{t:.10g}" for a, b, t in points]
    return "\n".join(lines) + "\n"


def histogram_csv(counts: Sequence[int]) -> str:
    n = len(counts)
    lines = ["bin_low,bin_high,count"]
    lines += [f"{k / n:.2f},{(k + 1) / n:.2f},{c}" for k, c in enumerate(counts)]
    return "\n".join(lines) + "\n"
