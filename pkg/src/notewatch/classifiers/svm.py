"""Soft-margin RBF support vector classifier solved by SMO, with Platt scaling."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .preprocessing import resolve_class_weight

logger = logging.getLogger(__name__)

_TAU = 1e-12


def rbf_kernel(A, B, gamma):
    """``exp(-gamma * ||a - b||^2)`` for every row pair."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    """Solve ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a_i <= C_i``, ``y'a = 0``.

    ``Q_ij = y_i y_j K_ij``.  Working pairs are chosen by maximal KKT
    violation.  Returns ``(alpha, gradient, n_iter, converged)``.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    converged = False
    while it < max_iter:
        i = -1
        j = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            v = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < C[t]) or (y[t] < 0 and alpha[t] > 0):
                if v > g_max:
                    g_max = v
                    i = t
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C[t]):
                if v < g_min:
                    g_min = v
                    j = t
        if i < 0 or j < 0 or g_max - g_min < tol:
            converged = True
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0.0:
            eta = _TAU
        step = (g_max - g_min) / eta
        # a_i moves by y_i*step, a_j by -y_j*step; both must stay in their boxes
        cap_i = C[i] - alpha[i] if y[i] > 0 else alpha[i]
        cap_j = alpha[j] if y[j] > 0 else C[j] - alpha[j]
        if step > cap_i:
            step = cap_i
        if step > cap_j:
            step = cap_j
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the bounds to keep the box exact
        if alpha[i] < 0.0:
            alpha[i] = 0.0
        elif alpha[i] > C[i]:
            alpha[i] = C[i]
        if alpha[j] < 0.0:
            alpha[j] = 0.0
        elif alpha[j] > C[j]:
            alpha[j] = C[j]
        if step == cap_i:
            alpha[i] = C[i] if y[i] > 0 else 0.0
        if step == cap_j:
            alpha[j] = 0.0 if y[j] > 0 else C[j]
        for t in range(n):
            G[t] += y[t] * step * (K[t, i] - K[t, j])
        it += 1
    return alpha, G, it, converged


def _bias(alpha, G, y, C):
    """Offset ``b`` of ``f(x) = sum a_i y_i K(x_i, x) + b``.

    Mean of ``-y_i G_i`` over free support vectors; midpoint of the feasible
    interval when none are free.
    """
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0.0
    free = ~(at_upper | at_lower)
    if free.any():
        return -float(yG[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return -0.5 * float(ub + lb)


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    n_iter: int
    converged: bool


def solve_dual(K, y_pm, C_i, tol=1e-3, max_iter=1_000_000):
    """Run SMO on a precomputed kernel with labels in {-1, +1}."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    y_pm = np.asarray(y_pm, dtype=np.float64)
    C_i = np.asarray(C_i, dtype=np.float64)
    alpha, G, n_iter, converged = _smo(K, y_pm, C_i, float(tol), int(max_iter))
    if not converged:
        logger.warning("SMO stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    objective = 0.5 * float(alpha @ (G - 1.0))
    return DualSolution(alpha, _bias(alpha, G, y_pm, C_i), objective, int(n_iter), bool(converged))


def fit_platt(decision, labels, max_iter=100, min_step=1e-10, sigma=1e-12, eps=1e-5):
    """Sigmoid ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by regularized Newton.

    Uses smoothed targets ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)`` and a
    backtracking line search on the cross-entropy.
    """
    f = np.asarray(decision, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    prior1 = float(labels.sum())
    prior0 = float(labels.size - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(labels, hi, lo)

    def loss(A, B):
        fApB = f * A + B
        return float(np.sum(np.where(fApB >= 0, t * fApB + np.log1p(np.exp(-np.abs(fApB))),
                                     (t - 1.0) * fApB + np.log1p(np.exp(-np.abs(fApB))))))

    A = 0.0
    B = math.log((prior0 + 1.0) / (prior1 + 1.0))
    fval = loss(A, B)
    for _ in range(max_iter):
        fApB = f * A + B
        e = np.exp(-np.abs(fApB))
        p = np.where(fApB >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA = A + step * dA
            nB = B + step * dB
            nf = loss(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            logger.warning("Platt line search failed")
            break
    return A, B


def platt_probability(decision, A, B):
    z = np.asarray(decision, dtype=np.float64) * A + B
    # 1 / (1 + exp(z)) evaluated without overflow
    return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))


class BalancedSVC(ClassifierMixin, BaseEstimator):
    """RBF-kernel SVM with per-sample box ``C * w_y`` and Platt probabilities.

    Probabilities come from a sigmoid fit on decision values of an internal
    stratified ``calibration_folds``-fold split (shuffled with
    ``random_state``).  The final decision function is trained on all rows.
    """

    def __init__(self, C=1.0, gamma=1e-3, class_weight="balanced", tol=1e-3,
                 max_iter=1_000_000, calibration_folds=3, random_state=0):
        self.C = C
        self.gamma = gamma
        self.class_weight = class_weight
        self.tol = tol
        self.max_iter = max_iter
        self.calibration_folds = calibration_folds
        self.random_state = random_state

    def _solve(self, X, y_enc, cw):
        y_pm = np.where(y_enc == 1, 1.0, -1.0)
        C_i = self.C * cw[y_enc]
        K = rbf_kernel(X, X, self.gamma)
        return solve_dual(K, y_pm, C_i, self.tol, self.max_iter), y_pm

    def _decision(self, X_train, coef, bias, X):
        sv = coef != 0
        if not sv.any():
            return np.full(X.shape[0], bias)
        return rbf_kernel(X, X_train[sv], self.gamma) @ coef[sv] + bias

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, ensure_all_finite=True)
        check_classification_targets(y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError("BalancedSVC needs exactly two classes")
        if self.C <= 0 or self.gamma <= 0:
            raise ValueError("C and gamma must be positive")
        cw = resolve_class_weight(self.class_weight, y_enc)
        self.class_weight_ = cw

        sol, y_pm = self._solve(X, y_enc, cw)
        sv = sol.alpha > 0
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (sol.alpha * y_pm)[sv]
        self.alpha_ = sol.alpha
        self.intercept_ = sol.bias
        self.objective_ = sol.objective
        self.n_iter_ = sol.n_iter
        self.converged_ = sol.converged

        self.probA_, self.probB_ = fit_platt(self._held_out_decisions(X, y_enc, cw), y_enc == 1)
        return self

    def _held_out_decisions(self, X, y_enc, cw):
        out = np.empty(X.shape[0])
        n_splits = min(self.calibration_folds, int(np.bincount(y_enc).min()))
        if n_splits < 2:
            # too few minority rows to hold any out: calibrate in-sample
            return self._decision(self.support_vectors_, self.dual_coef_, self.intercept_, X)
        folds = StratifiedKFold(n_splits, shuffle=True, random_state=self.random_state)
        for train, test in folds.split(X, y_enc):
            if np.unique(y_enc[train]).size < 2:
                out[test] = 1.0 if y_enc[train][0] == 1 else -1.0
                continue
            sol, y_pm = self._solve(X[train], y_enc[train], cw)
            out[test] = self._decision(X[train], sol.alpha * y_pm, sol.bias, X[test])
        return out

    def decision_function(self, X):
        check_is_fitted(self, "dual_coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False, ensure_all_finite=True)
        return self._decision(self.support_vectors_, self.dual_coef_, self.intercept_, X)

    def predict_proba(self, X):
        p = platt_probability(self.decision_function(X), self.probA_, self.probB_)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
