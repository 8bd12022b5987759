"""Patient-grouped nested cross-validation and run reports."""

import csv
import logging
import math
import os
import warnings
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone
from sklearn.model_selection import ParameterGrid
from sklearn.pipeline import Pipeline

from . import metrics
from .classifiers.forest import BalancedRandomForestClassifier, feature_importances
from .classifiers.preprocessing import Standardizer
from .classifiers.svm import BalancedSVC
from .embeddings import ParagraphVectorConfig, infer_vectors, train_pv
from .textnorm import default_resources, normalize_tokens
from .topics import infer_topics_many, train_lda
from .vocab import build_vocab

logger = logging.getLogger(__name__)

FOREST_GRID = {"criterion": ["gini", "entropy"], "max_features": [5, 8, "sqrt"],
               "min_samples_leaf": [3, 5, 10]}
SVM_GRID = {"svc__C": [0.1, 1.0, 10.0], "svc__gamma": [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]}
REPRESENTATIONS = ("lda", "embeddings", "both", "none")
SELECTION_METRICS = {"pr_auc": metrics.pr_auc, "roc_auc": metrics.roc_auc}


@dataclass
class PipelineConfig:
    """What to featurize, which classifier to tune, and how to split."""

    representation: str = "embeddings"
    use_structured: bool = True
    classifier: str = "forest"
    grid: dict | None = None
    selection_metric: str = "pr_auc"
    n_folds: int = 5
    inner_folds: int = 5
    seed: int = 0
    n_estimators: int = 500
    n_topics: int = 25
    lda_iterations: int = 1000
    vector_size: int = 300
    window: int = 2
    min_count: int = 20
    min_doc_len: int = 10
    pv_epochs: int = 20
    representation_per_fold: bool = False
    n_jobs: int = 1

    def validate(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}")
        if self.representation == "none" and not self.use_structured:
            raise ValueError("no features: representation 'none' without structured variables")
        if self.classifier not in ("forest", "svm"):
            raise ValueError("classifier must be 'forest' or 'svm'")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(f"selection metric must be one of {sorted(SELECTION_METRICS)}")
        if self.n_folds < 2 or self.inner_folds < 2:
            raise ValueError("need at least 2 folds")
        if self.grid is not None and len(ParameterGrid(self.grid)) == 0:
            raise ValueError("empty grid")

    def param_grid(self):
        if self.grid is not None:
            return list(ParameterGrid(self.grid))
        return list(ParameterGrid(FOREST_GRID if self.classifier == "forest" else SVM_GRID))

    def estimator(self):
        if self.classifier == "forest":
            return BalancedRandomForestClassifier(n_estimators=self.n_estimators,
                                                  random_state=self.seed)
        return Pipeline([("scale", Standardizer()), ("svc", BalancedSVC(random_state=self.seed))])

    def pv_config(self):
        return ParagraphVectorConfig(vector_size=self.vector_size, window=self.window,
                                     min_count=self.min_count, min_doc_len=self.min_doc_len,
                                     epochs=self.pv_epochs, seed=self.seed)


# ---------------------------------------------------------------------------
# folds


@dataclass
class FoldPlan:
    """Outer fold per patient, with each outer fold's inner split of its training patients."""

    outer: dict
    inner: list

    def outer_fold_of(self, patient_ids):
        return np.array([self.outer[p] for p in patient_ids])


def assign_groups(patient_ids, k, seed):
    """Shuffle distinct patients with ``seed`` and deal them round-robin into ``k`` folds."""
    patients = sorted(set(patient_ids))
    if len(patients) < k:
        raise ValueError(f"{len(patients)} patients cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(patients))
    return {patients[j]: i % k for i, j in enumerate(order)}


class PatientGroupKFold:
    """Splitter whose folds never share a patient.

    Usable wherever scikit-learn expects a CV object: ``split(X, y, groups)``.
    """

    def __init__(self, n_splits=5, random_state=0):
        self.n_splits = n_splits
        self.random_state = random_state

    def get_n_splits(self, X=None, y=None, groups=None):
        return self.n_splits

    def split(self, X, y=None, groups=None):
        if groups is None:
            raise ValueError("PatientGroupKFold needs groups")
        groups = np.asarray(groups)
        fold_of = assign_groups(groups.tolist(), self.n_splits, self.random_state)
        folds = np.array([fold_of[g] for g in groups.tolist()])
        for k in range(self.n_splits):
            yield np.flatnonzero(folds != k), np.flatnonzero(folds == k)


def _inner_seed(seed, outer_fold):
    return int(seed) * 7919 + 1 + outer_fold


def make_folds(records_or_patients, k=5, seed=0, inner_k=5):
    """Outer and inner patient-grouped fold plan for a dataset."""
    patients = [getattr(r, "patient_id", r) for r in records_or_patients]
    outer = assign_groups(patients, k, seed)
    inner = []
    for f in range(k):
        train_patients = sorted({p for p in patients if outer[p] != f})
        inner.append(assign_groups(train_patients, inner_k, _inner_seed(seed, f))
                     if len(train_patients) >= inner_k else {})
    return FoldPlan(outer=outer, inner=inner)


# ---------------------------------------------------------------------------
# features


@dataclass
class FeatureMatrix:
    X: np.ndarray
    names: list
    labels: np.ndarray
    patient_ids: list
    period_ids: list

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if self.X.shape != (len(self.labels), len(self.names)):
            raise ValueError("feature matrix shape does not match labels/names")
        if not np.isfinite(self.X).all():
            raise ValueError("feature matrix contains NaN or Inf")


def _hours(delta):
    return delta.total_seconds() / 3600.0


def structured_features(records, genders=None):
    """Numeric structured columns; gender is one-hot over the observed categories."""
    genders = sorted({r.structured.gender for r in records}) if genders is None else genders
    names = ["age_admission", "num_words", "note_count", "first_note_offset_h",
             "last_note_offset_h", "n_meds_prescribed", "n_meds_administered", "has_diagnosis",
             "admission_start_hour"] + [f"gender_{g}" for g in genders]
    rows = []
    for r in records:
        s = r.structured
        first = _hours(s.first_note_ts - r.start) if s.first_note_ts and r.start else 0.0
        last = _hours(s.last_note_ts - r.start) if s.last_note_ts and r.start else 0.0
        rows.append([s.age_admission, s.num_words, r.note_count, first, last,
                     s.n_meds_prescribed, s.n_meds_administered, float(s.has_diagnosis),
                     s.admission_start_hour] + [float(s.gender == g) for g in genders])
    return np.array(rows, dtype=np.float64).reshape(len(records), len(names)), names


def normalize_documents(texts, resources=None):
    resources = resources or default_resources()
    return [normalize_tokens(t, resources) for t in texts]


@dataclass
class Representations:
    """Representation models trained on one corpus (shared vocabulary)."""

    vocabulary: object
    lda: object = None
    pv: object = None


def train_representations(corpus_tokens, config):
    vocab = build_vocab(corpus_tokens, config.min_count, config.min_doc_len)
    reps = Representations(vocabulary=vocab)
    docs = [t for t in corpus_tokens if len(t) >= config.min_doc_len]
    if config.representation in ("lda", "both"):
        bows = [vocab.encode(t) for t in docs]
        reps.lda = train_lda(bows, vocab, config.n_topics, iterations=config.lda_iterations,
                             seed=config.seed)
    if config.representation in ("embeddings", "both"):
        reps.pv = train_pv(docs, config.pv_config(), vocabulary=vocab)
    return reps


def representation_features(reps, row_tokens, config):
    blocks, names = [], []
    if reps.lda is not None:
        w, flagged = infer_topics_many(reps.lda, [reps.vocabulary.encode(t) for t in row_tokens],
                                       seed=config.seed)
        if flagged.any():
            logger.warning("%d rows had no in-vocabulary tokens for LDA", int(flagged.sum()))
        blocks.append(w)
        names += [f"topic_{k:02d}" for k in range(w.shape[1])]
    if reps.pv is not None:
        v, flagged = infer_vectors(reps.pv, row_tokens, seed=config.seed)
        if flagged.any():
            logger.warning("%d rows had no in-vocabulary tokens for embeddings", int(flagged.sum()))
        blocks.append(v)
        names += [f"emb_{k:03d}" for k in range(v.shape[1])]
    return blocks, names


def featurize(records, config, corpus_tokens=None, row_tokens=None, reps=None):
    """Feature matrix for ``records``.

    Unless trained ``reps`` are passed, representations are trained on
    ``corpus_tokens`` (default: the records' own period notes) without
    labels.  Topic and embedding vectors are then re-inferred for every row.
    """
    config.validate()
    if row_tokens is None:
        row_tokens = normalize_documents([r.period_note for r in records])
    blocks, names = [], []
    if config.representation != "none":
        if reps is None:
            reps = train_representations(
                row_tokens if corpus_tokens is None else corpus_tokens, config)
        blocks, names = representation_features(reps, row_tokens, config)
    if config.use_structured:
        s, s_names = structured_features(records)
        blocks.append(s)
        names = names + s_names
    X = np.hstack(blocks) if blocks else np.zeros((len(records), 0))
    return FeatureMatrix(X=X, names=names, labels=np.array([r.label for r in records], dtype=int),
                         patient_ids=[r.patient_id for r in records],
                         period_ids=[r.period_id for r in records])


# ---------------------------------------------------------------------------
# nested cross-validation


@dataclass
class FoldResult:
    fold: int
    params: dict
    inner_scores: list
    test_index: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    metrics: metrics.FoldMetrics
    top_features: list | None = None


@dataclass
class CVRun:
    config: PipelineConfig
    plan: FoldPlan
    folds: list
    period_ids: list
    patient_ids: list
    feature_names: list

    @property
    def summary(self):
        return metrics.MetricSummary([f.metrics for f in self.folds])


def _fit_score(estimator, params, X, y, train, test, metric):
    if np.unique(y[train]).size < 2 or y[test].sum() == 0 or y[test].sum() == len(test):
        return math.nan
    model = clone(estimator).set_params(**params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model.fit(X[train], y[train])
    return SELECTION_METRICS[metric](model.predict_proba(X[test])[:, 1], y[test])


def _select(estimator, grid, X, y, groups, inner_map, metric, n_jobs):
    fold_of = np.array([inner_map[g] for g in groups])
    k = int(fold_of.max()) + 1
    splits = [(np.flatnonzero(fold_of != i), np.flatnonzero(fold_of == i)) for i in range(k)]
    tasks = [(c, tr, te) for c in range(len(grid)) for tr, te in splits]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_fit_score)(estimator, grid[c], X, y, tr, te, metric) for c, tr, te in tasks)
    per_cell = np.array(results, dtype=np.float64).reshape(len(grid), k)
    n_skipped = int(np.isnan(per_cell).sum())
    if n_skipped:
        logger.warning("%d inner evaluation(s) skipped: a split lacked one class", n_skipped)
    means = np.array([np.nanmean(row) if np.isfinite(row).any() else math.nan
                      for row in per_cell])
    if not np.isfinite(means).any():
        raise RuntimeError("every inner grid evaluation was skipped")
    best = int(np.nanargmax(means))
    return best, means


def _top_features(model, names, n=10):
    try:
        report = feature_importances(model, names)
    except TypeError:
        return None
    return report.ranked(n)


def nested_cv_features(fm, config, plan=None, features_for_fold=None):
    """Nested CV on a fixed feature matrix.

    ``features_for_fold(k)`` may supply a per-outer-fold matrix (strict
    representation mode); otherwise ``fm.X`` is used for every fold.
    """
    config.validate()
    plan = plan or make_folds(fm.patient_ids, config.n_folds, config.seed, config.inner_folds)
    grid = config.param_grid()
    estimator = config.estimator()
    y = fm.labels
    groups = np.array(fm.patient_ids)
    outer = plan.outer_fold_of(fm.patient_ids)
    folds = []
    for k in range(config.n_folds):
        train = np.flatnonzero(outer != k)
        test = np.flatnonzero(outer == k)
        if set(groups[train]) & set(groups[test]):
            raise AssertionError("a patient appears in both train and test")
        X = fm.X if features_for_fold is None else features_for_fold(k).X
        best, means = _select(estimator, grid, X[train], y[train], groups[train].tolist(),
                              plan.inner[k], config.selection_metric, config.n_jobs)
        model = clone(estimator).set_params(**grid[best])
        model.fit(X[train], y[train])
        scores = model.predict_proba(X[test])[:, 1]
        folds.append(FoldResult(
            fold=k, params=grid[best], inner_scores=means.tolist(), test_index=test,
            scores=scores, labels=y[test], metrics=metrics.evaluate_scores(scores, y[test]),
            top_features=_top_features(model, fm.names),
        ))
        logger.info("outer fold %d: %s pr_auc=%.3f", k, grid[best], folds[-1].metrics.pr_auc)
    return CVRun(config=config, plan=plan, folds=folds, period_ids=list(fm.period_ids),
                 patient_ids=list(fm.patient_ids), feature_names=list(fm.names))


def nested_cv(records, config, corpus_tokens=None):
    """Featurize ``records`` and run nested CV.

    With ``config.representation_per_fold`` the representation models are
    retrained for each outer fold on that fold's training rows only.
    """
    row_tokens = normalize_documents([r.period_note for r in records])
    if not config.representation_per_fold:
        fm = featurize(records, config, corpus_tokens, row_tokens)
        return nested_cv_features(fm, config)
    plan = make_folds(records, config.n_folds, config.seed, config.inner_folds)
    outer = plan.outer_fold_of([r.patient_id for r in records])
    cache = {}

    def features_for_fold(k):
        if k not in cache:
            cache.clear()
            train_tokens = [row_tokens[i] for i in np.flatnonzero(outer != k)]
            cache[k] = featurize(records, config, train_tokens, row_tokens)
        return cache[k]

    return nested_cv_features(features_for_fold(0), config, plan, features_for_fold)


# ---------------------------------------------------------------------------
# comparisons and audits


@dataclass
class KappaReport:
    per_fold: list
    thresholds: list
    mean: float
    std: float
    sweep: list = field(default_factory=list)


def _aligned_scores(run):
    scores = np.empty(len(run.period_ids))
    fold = np.empty(len(run.period_ids), dtype=int)
    for f in run.folds:
        scores[f.test_index] = f.scores
        fold[f.test_index] = f.fold
    return scores, fold


def compare_classifiers(run_a, run_b, n_thresholds=200):
    """Cohen's kappa between two runs' labels at their own per-fold F2-max thresholds."""
    if run_a.period_ids != run_b.period_ids or run_a.plan.outer != run_b.plan.outer:
        raise ValueError("runs use different datasets or fold plans")
    per_fold, thresholds = [], []
    for fa, fb in zip(run_a.folds, run_b.folds):
        ta, _ = metrics.f2_max(fa.scores, fa.labels)
        tb, _ = metrics.f2_max(fb.scores, fb.labels)
        per_fold.append(metrics.cohens_kappa(fa.scores >= ta, fb.scores >= tb))
        thresholds.append((ta, tb))
    sa, _ = _aligned_scores(run_a)
    sb, _ = _aligned_scores(run_b)
    mean, std = metrics.mean_std(per_fold)
    return KappaReport(per_fold=per_fold, thresholds=thresholds, mean=mean, std=std,
                       sweep=metrics.kappa_sweep(sa, sb, n_thresholds))


@dataclass
class ImportanceAudit:
    per_fold: list
    most_repeated: list
    highest_total: list


def importance_audit(run, top=10):
    """Aggregate each outer fold's top features by repetition and by total importance."""
    if run.config.classifier != "forest" or any(f.top_features is None for f in run.folds):
        raise TypeError("feature importances are only available for forest runs")
    count = Counter()
    total = defaultdict(float)
    for f in run.folds:
        for name, imp in f.top_features[:top]:
            count[name] += 1
            total[name] += imp
    repeated = sorted(count, key=lambda n: (-count[n], -total[n], n))[:top]
    heaviest = sorted(total, key=lambda n: (-total[n], n))[:top]
    return ImportanceAudit(
        per_fold=[f.top_features[:top] for f in run.folds],
        most_repeated=[(n, count[n]) for n in repeated],
        highest_total=[(n, total[n]) for n in heaviest],
    )


def shuffled_label_pr_auc(run, seed=0):
    """Outer-test PR-AUC per fold after permuting the test labels (leak detector)."""
    rng = np.random.default_rng(seed)
    return [metrics.pr_auc(f.scores, rng.permutation(f.labels)) for f in run.folds]


def assert_grouping(run):
    """Raise if any patient is in both the training and test rows of an outer fold."""
    patients = np.array(run.patient_ids)
    for f in run.folds:
        test = set(patients[f.test_index])
        train = set(np.delete(patients, f.test_index))
        if test & train:
            raise AssertionError(f"fold {f.fold}: {len(test & train)} patients leak")


# ---------------------------------------------------------------------------
# output files


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def config_label(config):
    parts = [config.representation]
    if config.use_structured:
        parts.append("struct")
    return "+".join(parts) + f"/{config.classifier}"


def write_run(run, out_dir, label=None):
    """Summary, per-fold scores, selected parameters, curves and (forests) importances."""
    os.makedirs(out_dir, exist_ok=True)
    label = label or config_label(run.config)
    metrics.write_summary_csv(os.path.join(out_dir, "summary.csv"), run.summary.rows(label))
    rows = []
    for f in run.folds:
        for i, s, lab in zip(f.test_index, f.scores, f.labels):
            rows.append((f.fold, run.period_ids[i], run.patient_ids[i], int(lab), s))
    _write_rows(os.path.join(out_dir, "fold_scores.csv"),
                ("fold", "period_id", "patient_id", "label", "score"), rows)
    _write_rows(os.path.join(out_dir, "selected_params.csv"), ("fold", "params", "inner_mean"),
                [(f.fold, sorted(f.params.items()), max(x for x in f.inner_scores
                                                        if not math.isnan(x)))
                 for f in run.folds])
    for f in run.folds:
        metrics.write_curve_csv(os.path.join(out_dir, f"pr_curve_fold{f.fold}.csv"),
                                metrics.pr_curve(f.scores, f.labels))
        metrics.write_curve_csv(os.path.join(out_dir, f"roc_curve_fold{f.fold}.csv"),
                                metrics.roc_curve(f.scores, f.labels))
    if all(f.top_features is not None for f in run.folds):
        audit = importance_audit(run)
        _write_rows(os.path.join(out_dir, "importance_per_fold.csv"),
                    ("fold", "rank", "feature", "importance"),
                    [(k, r, n, v) for k, lst in enumerate(audit.per_fold)
                     for r, (n, v) in enumerate(lst, 1)])
        _write_rows(os.path.join(out_dir, "importance_summary.csv"),
                    ("list", "rank", "feature", "value"),
                    [("most_repeated", r, n, c) for r, (n, c) in enumerate(audit.most_repeated, 1)]
                    + [("highest_total", r, n, v)
                       for r, (n, v) in enumerate(audit.highest_total, 1)])


def write_kappa(report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    _write_rows(os.path.join(out_dir, "kappa_sweep.csv"), ("threshold", "kappa"), report.sweep)
    _write_rows(os.path.join(out_dir, "kappa_folds.csv"),
                ("fold", "threshold_a", "threshold_b", "kappa"),
                [(k, ta, tb, kap) for k, ((ta, tb), kap)
                 in enumerate(zip(report.thresholds, report.per_fold))]
                + [("mean", "", "", report.mean), ("std", "", "", report.std)])


@dataclass
class ScoredFold:
    fold: int
    test_index: np.ndarray
    scores: np.ndarray
    labels: np.ndarray


@dataclass
class ScoredRun:
    """Outer-test scores read back from ``fold_scores.csv``; enough for comparisons."""

    period_ids: list
    patient_ids: list
    plan: FoldPlan
    folds: list


def load_scored_run(out_dir):
    with open(os.path.join(out_dir, "fold_scores.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: r["period_id"])
    period_ids = [r["period_id"] for r in rows]
    patient_ids = [r["patient_id"] for r in rows]
    fold = np.array([int(r["fold"]) for r in rows])
    scores = np.array([float(r["score"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows])
    outer = {p: int(f) for p, f in zip(patient_ids, fold)}
    folds = []
    for k in sorted(set(fold.tolist())):
        idx = np.flatnonzero(fold == k)
        folds.append(ScoredFold(fold=k, test_index=idx, scores=scores[idx], labels=labels[idx]))
    return ScoredRun(period_ids=period_ids, patient_ids=patient_ids,
                     plan=FoldPlan(outer=outer, inner=[]), folds=folds)
