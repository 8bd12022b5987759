"""Class-weighted random forest and RBF SVM with probability outputs."""

from sklearn.pipeline import Pipeline

from .forest import BalancedRandomForestClassifier, ImportanceReport, feature_importances
from .preprocessing import Standardizer, class_weights, fit_standardization, standardize
from .serialize import load_classifier, save_classifier
from .svm import BalancedSVC

__all__ = [
    "BalancedRandomForestClassifier", "BalancedSVC", "ImportanceReport", "Standardizer",
    "class_weights", "feature_importances", "fit_standardization", "load_classifier",
    "predict_proba", "save_classifier", "standardize", "train_forest", "train_svm",
]


def train_forest(X, y, **params):
    return BalancedRandomForestClassifier(**params).fit(X, y)


def train_svm(X, y, **params):
    """Fit ``Standardizer -> BalancedSVC``; the SVM only ever sees z-scored columns."""
    return Pipeline([("scale", Standardizer()), ("svc", BalancedSVC(**params))]).fit(X, y)


def predict_proba(model, X):
    """Positive-class score per row."""
    return model.predict_proba(X)[:, 1]
