"""Threshold-free evaluation metrics for binary scores.

A row is predicted positive when ``score >= threshold``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class UndefinedMetricError(ValueError):
    """The metric has no value for this label configuration."""


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self):
        predicted = self.tp + self.fp
        return self.tp / predicted if predicted else 0.0

    @property
    def recall(self):
        actual = self.tp + self.fn
        return self.tp / actual if actual else 0.0

    @property
    def fpr(self):
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else 0.0


@dataclass
class Curve:
    """Curve points with the threshold that produced each one."""

    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray


def _as_arrays(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValueError(f"length mismatch: {scores.size} scores, {labels.size} labels")
    return scores, labels


def confusion_at(scores, labels, threshold):
    scores, labels = _as_arrays(scores, labels)
    pred = scores >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    return Confusion(tp=tp, fp=fp, fn=fn, tn=labels.size - tp - fp - fn)


def _cumulative_counts(scores, labels):
    """TP and FP counts at each distinct score, thresholds descending."""
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    lab = labels[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(lab)[last]
    fp = np.cumsum(~lab)[last]
    return s[last], tp, fp


def roc_curve(scores, labels):
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC needs both classes")
    thr, tp, fp = _cumulative_counts(scores, labels)
    return Curve(
        x=np.r_[0.0, fp / n_neg],
        y=np.r_[0.0, tp / n_pos],
        thresholds=np.r_[np.inf, thr],
    )


def roc_auc(scores, labels):
    """Trapezoidal ROC area; equal to the Mann-Whitney statistic with ties as 1/2."""
    c = roc_curve(scores, labels)
    return float(np.sum(np.diff(c.x) * (c.y[1:] + c.y[:-1]) / 2.0))


def pr_curve(scores, labels):
    """(recall, precision) per distinct threshold, anchored at (0, 1)."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR curve needs at least one positive")
    thr, tp, fp = _cumulative_counts(scores, labels)
    return Curve(
        x=np.r_[0.0, tp / n_pos],
        y=np.r_[1.0, tp / (tp + fp)],
        thresholds=np.r_[np.inf, thr],
    )


def pr_auc(scores, labels):
    """Step-wise average precision ``sum (R_n - R_{n-1}) P_n``."""
    c = pr_curve(scores, labels)
    return float(np.sum(np.diff(c.x) * c.y[1:]))


def baseline_pr_auc(labels):
    """PR-AUC of an uninformative scorer: the positive fraction.

    >>> round(baseline_pr_auc([1] * 425 + [0] * 3855), 4)
    0.0993
    """
    labels = np.asarray(labels).ravel().astype(bool)
    if labels.size == 0:
        raise ValueError("baseline PR-AUC of an empty label set")
    return float(labels.mean())


def f_beta(confusion, beta=2.0):
    if beta <= 0:
        raise ValueError("beta must be positive")
    p = confusion.precision
    r = confusion.recall
    b2 = beta * beta
    denom = b2 * p + r
    return (1.0 + b2) * p * r / denom if denom > 0 else 0.0


def f_beta_curve(scores, labels, beta=2.0):
    """F-beta at every candidate threshold (distinct scores plus 0 and 1), ascending."""
    scores, labels = _as_arrays(scores, labels)
    thresholds = np.union1d(scores, [0.0, 1.0])
    n_pos = int(labels.sum())
    srt_pos = np.sort(scores[labels])
    srt_neg = np.sort(scores[~labels])
    tp = (n_pos - np.searchsorted(srt_pos, thresholds, side="left")).astype(np.float64)
    fp = (srt_neg.size - np.searchsorted(srt_neg, thresholds, side="left")).astype(np.float64)
    precision = np.divide(tp, tp + fp, out=np.zeros_like(tp), where=(tp + fp) > 0)
    recall = tp / n_pos if n_pos else np.zeros_like(tp)
    b2 = beta * beta
    denom = b2 * precision + recall
    f = np.divide((1.0 + b2) * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return thresholds, f


def f2_max(scores, labels):
    """Best F2 over all thresholds; the smallest threshold wins ties.

    Returns ``(threshold, value)``.
    """
    thresholds, f = f_beta_curve(scores, labels, 2.0)
    k = int(np.argmax(f))
    return float(thresholds[k]), float(f[k])


def cohens_kappa(labels_a, labels_b):
    """Chance-corrected agreement of two binary labelings.

    Two identical constant labelings give 1.0 (expected agreement is 1).
    """
    a = np.asarray(labels_a).ravel().astype(bool)
    b = np.asarray(labels_b).ravel().astype(bool)
    if a.shape != b.shape:
        raise ValueError("labelings differ in length")
    if a.size == 0:
        raise ValueError("kappa of empty labelings")
    p_o = float(np.mean(a == b))
    pa = float(a.mean())
    pb = float(b.mean())
    p_e = pa * pb + (1.0 - pa) * (1.0 - pb)
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def kappa_sweep(scores_a, scores_b, n_thresholds=200):
    """Kappa between two scorers thresholded at the same equidistant points in [0, 1].

    Points whose kappa is undefined carry ``nan``.
    """
    a = np.asarray(scores_a, dtype=np.float64).ravel()
    b = np.asarray(scores_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("score vectors differ in length")
    out = []
    for t in np.linspace(0.0, 1.0, n_thresholds):
        try:
            k = cohens_kappa(a >= t, b >= t)
        except ValueError:
            k = math.nan
        out.append((float(t), k))
    return out


def mean_std(values):
    """Arithmetic mean and sample (n - 1) standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    std = float(v.std(ddof=1)) if v.size > 1 else math.nan
    return float(v.mean()), std


METRIC_NAMES = ("pr_auc", "roc_auc", "f2_max")


@dataclass
class FoldMetrics:
    pr_auc: float
    roc_auc: float
    f2_max: float
    f2_threshold: float


def evaluate_scores(scores, labels):
    threshold, value = f2_max(scores, labels)
    return FoldMetrics(pr_auc=pr_auc(scores, labels), roc_auc=roc_auc(scores, labels),
                       f2_max=value, f2_threshold=threshold)


@dataclass
class MetricSummary:
    """Per-fold metrics with their mean and sample standard deviation."""

    folds: list = field(default_factory=list)

    def values(self, name):
        return [getattr(f, name) for f in self.folds]

    def mean(self, name):
        return mean_std(self.values(name))[0]

    def std(self, name):
        return mean_std(self.values(name))[1]

    def rows(self, label=""):
        """Summary-table rows: one per fold and a final ``mean`` row carrying the stds."""
        out = []
        for i, f in enumerate(self.folds):
            row = {"config": label, "fold": str(i)}
            for name in METRIC_NAMES + ("f2_threshold",):
                row[name] = getattr(f, name)
            for name in METRIC_NAMES:
                row[name + "_std"] = ""
            out.append(row)
        agg = {"config": label, "fold": "mean"}
        for name in METRIC_NAMES + ("f2_threshold",):
            agg[name] = self.mean(name)
        for name in METRIC_NAMES:
            agg[name + "_std"] = self.std(name)
        out.append(agg)
        return out


SUMMARY_HEADER = ("config", "fold", "pr_auc", "pr_auc_std", "roc_auc", "roc_auc_std", "f2_max",
                  "f2_max_std", "f2_threshold")
CURVE_HEADER = ("threshold", "x", "y")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for t, x, y in zip(curve.thresholds, curve.x, curve.y):
            w.writerow([_fmt(t), _fmt(x), _fmt(y)])


def write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in SUMMARY_HEADER])
