import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

logger = logging.getLogger(__name__)


def class_weights(labels):
    """Balanced class weights ``N / (2 * N_c)`` for binary labels.

    >>> class_weights([1, 0, 0, 0])
    {0: 0.6666666666666666, 1: 2.0}
    """
    labels = np.asarray(labels).astype(int)
    n = labels.shape[0]
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("balanced class weights need both classes present")
    return {0: n / (2.0 * n_neg), 1: n / (2.0 * n_pos)}


def resolve_class_weight(class_weight, y):
    """Weight vector indexed by class label (0, 1)."""
    if class_weight is None:
        return np.ones(2)
    if class_weight == "balanced":
        w = class_weights(y)
    else:
        w = class_weight
    return np.array([float(w[0]), float(w[1])])


@dataclass
class StandardizationParams:
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray


def fit_standardization(train_X):
    train_X = np.asarray(train_X, dtype=np.float64)
    if not np.isfinite(train_X).all():
        raise ValueError("standardization input contains NaN or Inf")
    mean = train_X.mean(axis=0)
    sd = train_X.std(axis=0)
    constant = sd == 0
    if constant.any():
        logger.warning("%d zero-variance column(s) left unscaled", int(constant.sum()))
    return StandardizationParams(mean=mean, scale=np.where(constant, 1.0, sd), constant=constant)


def standardize(train_X, apply_X):
    """Z-score ``apply_X`` with statistics of ``train_X`` only."""
    params = fit_standardization(train_X)
    return params, (np.asarray(apply_X, dtype=np.float64) - params.mean) / params.scale


class Standardizer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Per-column z-scoring; zero-variance columns are only centered."""

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        self.params_ = fit_standardization(X)
        self.mean_ = self.params_.mean
        self.scale_ = self.params_.scale
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.mean_) / self.scale_
