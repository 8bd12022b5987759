import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from . import _tree
from .preprocessing import resolve_class_weight

logger = logging.getLogger(__name__)

_CRITERIA = {"gini": _tree.GINI, "entropy": _tree.ENTROPY}


def resolve_max_features(max_features, n_features):
    """Number of columns tried per split.

    ``"sqrt"``/``"auto"`` mean ``floor(sqrt(n_features))``; floats are
    floored; values above ``n_features`` are clamped with a warning.
    """
    if max_features in ("sqrt", "auto"):
        m = int(math.floor(math.sqrt(n_features)))
    elif max_features is None:
        m = n_features
    else:
        m = int(math.floor(max_features))
    if m > n_features:
        logger.warning("max_features=%s clamped to n_features=%d", max_features, n_features)
        m = n_features
    return max(1, m)


@dataclass
class ImportanceReport:
    names: list
    importances: np.ndarray

    def ranked(self, top=None):
        order = sorted(range(len(self.names)), key=lambda i: (-self.importances[i], self.names[i]))
        pairs = [(self.names[i], float(self.importances[i])) for i in order]
        return pairs if top is None else pairs[:top]


class BalancedRandomForestClassifier(ClassifierMixin, BaseEstimator):
    """Random forest of weighted CART trees for binary labels.

    Each tree ``t`` uses the random stream ``random_state + t`` for its
    bootstrap sample and feature draws, so results do not depend on the
    order trees are built in.

    Parameters
    ----------
    n_estimators : int
    criterion : {"gini", "entropy"}
    min_samples_leaf : int
        Minimum distinct in-bag samples per leaf.
    max_features : int, float, "sqrt", "auto" or None
    class_weight : "balanced", dict or None
    voting : {"hard", "soft"}
        ``"hard"`` averages 0/1 tree votes (a tree votes positive when its
        leaf's weighted positive fraction exceeds 0.5); ``"soft"`` averages
        the leaf fractions.
    bootstrap : bool
    random_state : int
    """

    def __init__(self, n_estimators=500, criterion="gini", min_samples_leaf=1,
                 max_features="sqrt", class_weight="balanced", voting="hard", bootstrap=True,
                 random_state=0):
        self.n_estimators = n_estimators
        self.criterion = criterion
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.class_weight = class_weight
        self.voting = voting
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, ensure_all_finite=True)
        check_classification_targets(y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError("BalancedRandomForestClassifier needs exactly two classes")
        if self.n_estimators < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_estimators and min_samples_leaf must be >= 1")
        if self.criterion not in _CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.voting not in ("hard", "soft"):
            raise ValueError(f"unknown voting {self.voting!r}")
        y_enc = y_enc.astype(np.int64)
        cw = resolve_class_weight(self.class_weight, y_enc)
        self.max_features_ = resolve_max_features(self.max_features, X.shape[1])
        Xt = np.ascontiguousarray(X.T)
        sorted_idx = np.ascontiguousarray(np.argsort(Xt, axis=1, kind="stable"))
        parts = []
        importances = np.zeros(X.shape[1])
        n_nonempty = 0
        for t in range(self.n_estimators):
            tree = _tree.build_tree(
                Xt, sorted_idx, y_enc, cw, self.max_features_, self.min_samples_leaf,
                _CRITERIA[self.criterion], (int(self.random_state) + t) % 2**32, self.bootstrap,
            )
            parts.append(tree[:8])
            total = tree[8].sum()
            if total > 0:
                importances += tree[8] / total
                n_nonempty += 1
        self.tree_sizes_ = np.array([len(p[0]) for p in parts], dtype=np.int64)
        self.roots_ = np.concatenate([[0], np.cumsum(self.tree_sizes_)[:-1]]).astype(np.int64)
        names = ("feature", "threshold", "left", "right", "value", "impurity", "n_node_samples",
                 "weighted_n_node_samples")
        self.nodes_ = {name: np.concatenate([p[i] for p in parts]) for i, name in enumerate(names)}
        if n_nonempty:
            importances /= n_nonempty
            importances /= importances.sum()
        else:
            importances[:] = 1.0 / X.shape[1]
        self.feature_importances_ = importances
        self.class_weight_ = cw
        return self

    def leaf_values(self, X):
        """Weighted positive fraction of the leaf reached in every tree."""
        check_is_fitted(self, "nodes_")
        X = validate_data(self, X, dtype=np.float64, reset=False, ensure_all_finite=True)
        out = np.empty((X.shape[0], len(self.roots_)))
        nd = self.nodes_
        _tree.predict_leaf_values(
            X, nd["feature"], nd["threshold"], nd["left"], nd["right"], nd["value"],
            self.roots_, out,
        )
        return out

    def predict_proba(self, X):
        leaves = self.leaf_values(X)
        if self.voting == "hard":
            pos = (leaves > 0.5).sum(axis=1) / leaves.shape[1]
        else:
            pos = leaves.mean(axis=1)
        return np.column_stack([1.0 - pos, pos])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] >= 0.5).astype(int)]

    def importance_report(self, feature_names=None):
        check_is_fitted(self, "feature_importances_")
        if feature_names is None:
            feature_names = getattr(self, "feature_names_in_", None)
        if feature_names is None:
            feature_names = [f"x{i}" for i in range(self.n_features_in_)]
        return ImportanceReport(list(feature_names), self.feature_importances_.copy())


def feature_importances(model, feature_names=None):
    """Mean-decrease-in-impurity report; forests only."""
    if not isinstance(model, BalancedRandomForestClassifier):
        inner = getattr(model, "steps", None)
        if inner and isinstance(inner[-1][1], BalancedRandomForestClassifier):
            return inner[-1][1].importance_report(feature_names)
        raise TypeError(f"feature importances are not available for {type(model).__name__}")
    return model.importance_report(feature_names)
