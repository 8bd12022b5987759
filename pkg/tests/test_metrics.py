import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from notewatch import metrics
from notewatch.metrics import Confusion
from oracles import (brute_f2_max, brute_pr_auc, brute_roc_auc, mann_whitney_auc,
                     naive_confusion, naive_kappa, random_instance)

PREVALENCE = 425 / 4280


@st.composite
def scored_labels(draw, min_size=2, max_size=40):
    n = draw(st.integers(min_size, max_size))
    scores = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=n, max_size=n))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if len(set(labels)) < 2:
        labels[0], labels[-1] = 0, 1
    return scores, labels


# --- confusion -----------------------------------------------------------------


def test_confusion_examples():
    assert metrics.confusion_at([0.9, 0.1], [1, 0], 0.5) == Confusion(tp=1, fp=0, fn=0, tn=1)
    c = metrics.confusion_at([0.3, 0.2, 0.8, 0.0], [0, 1, 0, 0], 0.0)
    assert c.fp == 3 and c.fn == 0


def test_confusion_matches_loop_on_random_instance():
    rng = np.random.default_rng(3)
    scores = rng.random(100)
    labels = rng.integers(0, 2, 100)
    for t in (0.0, 0.25, 0.5, float(scores[7]), 1.0):
        c = metrics.confusion_at(scores, labels, t)
        assert (c.tp, c.fp, c.fn, c.tn) == naive_confusion(scores, labels, t)


def test_threshold_is_inclusive():
    assert metrics.confusion_at([0.5], [1], 0.5).tp == 1


def test_length_mismatch_raises():
    with pytest.raises(ValueError):
        metrics.confusion_at([0.1, 0.2], [1], 0.5)


# --- ROC / PR ------------------------------------------------------------------


def test_perfect_separation():
    s, y = [0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]
    assert metrics.roc_auc(s, y) == 1.0
    assert metrics.pr_auc(s, y) == 1.0
    assert metrics.f2_max(s, y)[1] == 1.0


def test_random_scores_sit_at_the_baselines():
    rng = np.random.default_rng(11)
    labels = rng.random(10_000) < 0.10
    scores = rng.random(10_000)
    assert abs(metrics.roc_auc(scores, labels) - 0.5) < 0.02
    assert abs(metrics.pr_auc(scores, labels) - labels.mean()) < 0.02


def test_curves_are_anchored():
    s, y = [0.9, 0.4, 0.4, 0.1], [1, 0, 1, 0]
    roc = metrics.roc_curve(s, y)
    assert (roc.x[0], roc.y[0]) == (0.0, 0.0) and (roc.x[-1], roc.y[-1]) == (1.0, 1.0)
    pr = metrics.pr_curve(s, y)
    assert (pr.x[0], pr.y[0]) == (0.0, 1.0) and pr.x[-1] == 1.0
    assert np.isinf(roc.thresholds[0])


def test_single_class_is_undefined():
    with pytest.raises(metrics.UndefinedMetricError):
        metrics.roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(metrics.UndefinedMetricError):
        metrics.pr_auc([0.1, 0.2], [0, 0])


@pytest.mark.parametrize("seed", range(50))
def test_aucs_match_brute_force(seed):
    scores, labels = random_instance(np.random.default_rng(seed))
    assert abs(metrics.roc_auc(scores, labels) - brute_roc_auc(scores, labels)) < 1e-9
    assert abs(metrics.roc_auc(scores, labels) - mann_whitney_auc(scores, labels)) < 1e-9
    assert abs(metrics.pr_auc(scores, labels) - brute_pr_auc(scores, labels)) < 1e-9


@settings(max_examples=150, deadline=None)
@given(scored_labels())
def test_monotone_transform_invariance(data):
    scores, labels = data
    s = np.asarray(scores)
    # strictly increasing remap of the distinct values, exact in floating point
    distinct = np.unique(s)
    targets = np.cumsum(np.linspace(0.5, 3.0, distinct.size)) - 40.0
    transformed = targets[np.searchsorted(distinct, s)]
    assert metrics.roc_auc(transformed, labels) == metrics.roc_auc(s, labels)
    assert metrics.pr_auc(transformed, labels) == metrics.pr_auc(s, labels)


@settings(max_examples=150, deadline=None)
@given(st.permutations(range(30)), st.lists(st.integers(0, 1), min_size=30, max_size=30))
def test_roc_auc_complement(order, labels):
    if len(set(labels)) < 2:
        labels[0], labels[1] = 0, 1
    scores = np.asarray(order, dtype=float) / 30  # tie-free
    auc = metrics.roc_auc(scores, labels)
    assert abs(auc + metrics.roc_auc(scores, 1 - np.asarray(labels)) - 1.0) < 1e-12
    assert abs(auc + metrics.roc_auc(-scores, labels) - 1.0) < 1e-12


@settings(max_examples=100, deadline=None)
@given(scored_labels())
def test_recall_equals_tpr(data):
    scores, labels = data
    for t in sorted(set(scores)):
        c = metrics.confusion_at(scores, labels, t)
        assert c.recall == c.tp / (c.tp + c.fn)
    roc = metrics.roc_curve(scores, labels)
    pr = metrics.pr_curve(scores, labels)
    np.testing.assert_array_equal(roc.y, pr.x)


# --- baseline, F-beta, F2-max --------------------------------------------------


def test_baseline_pr_auc():
    assert round(metrics.baseline_pr_auc([1] * 425 + [0] * 3855), 4) == 0.0993
    assert metrics.baseline_pr_auc([1, 1, 1]) == 1.0
    assert metrics.baseline_pr_auc([0, 0]) == 0.0
    with pytest.raises(ValueError):
        metrics.baseline_pr_auc([])


@pytest.mark.parametrize("x", [0.1, 0.37, 0.9])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 3.0])
def test_f_beta_of_equal_precision_and_recall(x, beta):
    # tp/(tp+fp) = tp/(tp+fn) = x with tp = 100x
    tp = round(100 * x)
    c = Confusion(tp=tp, fp=100 - tp, fn=100 - tp, tn=0)
    assert metrics.f_beta(c, beta) == pytest.approx(x, abs=1e-12)


def test_f_beta_examples():
    # precision 0.6, recall 0.3
    c = Confusion(tp=3, fp=2, fn=7, tn=0)
    assert metrics.f_beta(c, 2) == pytest.approx(0.3333, abs=5e-5)
    always = Confusion(tp=425, fp=3855, fn=0, tn=0)
    assert metrics.f_beta(always, 2) == pytest.approx(5 * PREVALENCE / (4 * PREVALENCE + 1))
    assert metrics.f_beta(always, 2) == pytest.approx(0.3554, abs=5e-5)
    assert metrics.f_beta(Confusion(0, 0, 5, 5)) == 0.0
    with pytest.raises(ValueError):
        metrics.f_beta(always, 0)


def test_f2_max_on_uninformative_scores_is_always_positive():
    labels = [1] * 425 + [0] * 3855
    threshold, value = metrics.f2_max(np.full(4280, 0.5), labels)
    assert threshold == 0.0
    assert value == pytest.approx(0.3554, abs=5e-4)


def test_f2_max_prefers_smallest_threshold_on_ties():
    # thresholds 0 and 0.2 both predict everything positive
    threshold, _ = metrics.f2_max([0.2, 0.2, 0.2], [1, 0, 1])
    assert threshold == 0.0


@pytest.mark.parametrize("seed", range(50))
def test_f2_max_matches_brute_force(seed):
    scores, labels = random_instance(np.random.default_rng(1000 + seed))
    t, v = metrics.f2_max(scores, labels)
    bt, bv = brute_f2_max(scores, labels)
    assert abs(v - bv) < 1e-9
    tp, fp, fn, _ = naive_confusion(scores, labels, t)
    assert abs(metrics.f_beta(Confusion(tp, fp, fn, 0)) - bv) < 1e-9


@settings(max_examples=150, deadline=None)
@given(scored_labels())
def test_f2_max_dominates_always_positive(data):
    scores, labels = data
    all_pos = metrics.f_beta(metrics.confusion_at(scores, labels, 0.0))
    assert metrics.f2_max(scores, labels)[1] >= all_pos - 1e-15


# --- kappa ---------------------------------------------------------------------


def test_kappa_examples():
    assert metrics.cohens_kappa([1, 0, 1], [1, 0, 1]) == 1.0
    assert metrics.cohens_kappa([1, 1, 0, 0], [1, 0, 1, 0]) == 0.0
    assert metrics.cohens_kappa([1, 1], [1, 1]) == 1.0
    # constant but unequal raters: p_o = 0 = p_e
    assert metrics.cohens_kappa([1, 1], [0, 0]) == 0.0


def test_kappa_of_independent_raters_is_near_zero():
    rng = np.random.default_rng(5)
    a, b = rng.integers(0, 2, 10_000), rng.integers(0, 2, 10_000)
    assert abs(metrics.cohens_kappa(a, b)) < 0.05


def test_kappa_rejects_bad_input():
    with pytest.raises(ValueError):
        metrics.cohens_kappa([1], [1, 0])
    with pytest.raises(ValueError):
        metrics.cohens_kappa([], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_kappa_symmetric_and_matches_oracle(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    k = metrics.cohens_kappa(a, b)
    assert k == metrics.cohens_kappa(b, a)
    assert abs(k - naive_kappa(a, b)) < 1e-9


def test_kappa_sweep():
    rng = np.random.default_rng(2)
    s = rng.random(300)
    sweep = metrics.kappa_sweep(s, s)
    assert len(sweep) == 200
    assert sweep[0][0] == 0.0 and sweep[-1][0] == 1.0
    assert all(k == 1.0 for _, k in sweep)
    other = metrics.kappa_sweep(s, rng.random(300))
    assert other[0][1] == 1.0  # threshold 0: both raters all-positive


# --- summaries and CSV ---------------------------------------------------------


def test_mean_std_uses_sample_formula():
    mean, std = metrics.mean_std([0.2, 0.4, 0.6, 0.8, 1.0])
    assert mean == pytest.approx(0.6, abs=1e-15)
    # squared deviations 0.16+0.04+0+0.04+0.16 = 0.4, over n-1 = 4
    assert std == pytest.approx(math.sqrt(0.1), abs=1e-15)
    assert math.isnan(metrics.mean_std([1.0])[1])


def test_summary_rows_and_csv(tmp_path):
    folds = [metrics.FoldMetrics(pr_auc=0.1 * k, roc_auc=0.5 + 0.05 * k, f2_max=0.3,
                                 f2_threshold=0.2) for k in range(1, 6)]
    summary = metrics.MetricSummary(folds)
    rows = summary.rows("cfg")
    assert len(rows) == 6
    assert abs(summary.mean("pr_auc") - np.mean([0.1 * k for k in range(1, 6)])) < 1e-12
    path = tmp_path / "summary.csv"
    metrics.write_summary_csv(path, rows)
    with open(path) as fh:
        read = list(csv.reader(fh))
    assert tuple(read[0]) == metrics.SUMMARY_HEADER
    assert [r[1] for r in read[1:]] == ["0", "1", "2", "3", "4", "mean"]
    assert float(read[-1][2]) == summary.mean("pr_auc")


def test_curve_csv(tmp_path):
    curve = metrics.pr_curve([0.9, 0.1, 0.5], [1, 0, 1])
    path = tmp_path / "c.csv"
    metrics.write_curve_csv(path, curve)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == metrics.CURVE_HEADER
    assert len(rows) == 1 + len(curve.x)
