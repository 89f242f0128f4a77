"""Weighted soft-margin linear SVM with deterministic training.

The primal problem is

    min_w  0.5 ||w||^2 + C * sum_i s_i * max(0, 1 - y_i (w . x_i + b))

with per-instance weights s_i composed from class balancing and gender
down-weighting. The bias is an augmented constant feature, so the dual is
box-constrained (0 <= alpha_i <= C * s_i) and is solved by coordinate
descent in a fixed visiting order; identical inputs give bit-identical
models regardless of run or thread count.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import (
    DegenerateDataError,
    MissingTargetGenderError,
    SingleClassError,
)
from .validation import check_matrix, stable_digest

GRID_COSTS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)

MODE_GLOBAL = "global"
MODE_GENDER_EXCLUSIVE = "gender_exclusive"
MODE_GENDER_SOFT = "gender_soft"


@dataclass(frozen=True)
class TuningGrid:
    costs: tuple = GRID_COSTS

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        object.__setattr__(self, "costs", costs)
        if not costs or any(b >= a for a, b in zip(costs, costs[1:])):
            raise ValueError("costs must be strictly descending")


@dataclass(frozen=True)
class WeightingPolicy:
    """How training instances are weighted by group membership."""

    mode: str = MODE_GLOBAL
    lam: float = 1.0
    target_gender: str = None

    def __post_init__(self):
        if self.mode not in (MODE_GLOBAL, MODE_GENDER_EXCLUSIVE, MODE_GENDER_SOFT):
            raise ValueError(f"unknown weighting mode {self.mode!r}")
        if self.mode != MODE_GLOBAL and self.target_gender is None:
            raise MissingTargetGenderError(f"mode {self.mode} requires target_gender")
        if self.mode == MODE_GENDER_EXCLUSIVE and self.lam != 0.0:
            raise ValueError("gender_exclusive implies lambda = 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "lambda": self.lam,
                "target_gender": self.target_gender}


def class_balance_weights(labels) -> np.ndarray:
    """weight_i = N / (2 * N_class(label_i)); weighted class masses are equal."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise SingleClassError(f"only one class present: {classes.tolist()}")
    if classes.size > 2:
        raise SingleClassError(f"expected binary labels, got {classes.tolist()}")
    n = labels.size
    lookup = {c: n / (2.0 * cnt) for c, cnt in zip(classes, counts)}
    return np.array([lookup[lab] for lab in labels], dtype=np.float64)


def gender_instance_weights(genders, policy: WeightingPolicy) -> np.ndarray:
    """1.0 for in-group rows, lambda for out-of-group; all 1.0 when global."""
    genders = np.asarray(genders, dtype=object)
    if policy.mode == MODE_GLOBAL:
        return np.ones(genders.size, dtype=np.float64)
    lam = 0.0 if policy.mode == MODE_GENDER_EXCLUSIVE else policy.lam
    return np.where(genders == policy.target_gender, 1.0, lam)


def compose_instance_weights(labels, genders, policy: WeightingPolicy) -> np.ndarray:
    """Class balance times gender weight.

    For gender-exclusive training the class balance is computed on the
    in-group rows only, which makes the model identical to training on the
    in-group subset. For soft down-weighting (and global mode) the balance
    is computed over all training rows.
    """
    labels = np.asarray(labels)
    gw = gender_instance_weights(genders, policy)
    if policy.mode == MODE_GENDER_EXCLUSIVE:
        mask = gw > 0.0
        if not mask.any():
            raise DegenerateDataError(f"no rows for gender {policy.target_gender!r}")
        balance = np.zeros(labels.size, dtype=np.float64)
        balance[mask] = class_balance_weights(labels[mask])
        return balance * gw
    return class_balance_weights(labels) * gw


@njit(cache=True, nogil=True)
def _dual_cd(Xa, yy, ub, tol, max_epochs):  # pragma: no cover - compiled
    n, d = Xa.shape
    w = np.zeros(d)
    alpha = np.zeros(n)
    qii = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += Xa[i, j] * Xa[i, j]
        qii[i] = s
    hist = np.empty(max_epochs)
    epochs = 0
    gap = np.inf
    converged = False
    for ep in range(max_epochs):
        for i in range(n):
            if ub[i] <= 0.0 or qii[i] <= 0.0:
                continue
            g = 0.0
            for j in range(d):
                g += w[j] * Xa[i, j]
            g = yy[i] * g - 1.0
            a_new = alpha[i] - g / qii[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > ub[i]:
                a_new = ub[i]
            delta = a_new - alpha[i]
            if delta != 0.0:
                scale = delta * yy[i]
                for j in range(d):
                    w[j] += scale * Xa[i, j]
                alpha[i] = a_new
        wsq = 0.0
        for j in range(d):
            wsq += w[j] * w[j]
        dual = alpha.sum() - 0.5 * wsq
        hist[ep] = dual
        primal = 0.5 * wsq
        for i in range(n):
            if ub[i] <= 0.0:
                continue
            m = 0.0
            for j in range(d):
                m += w[j] * Xa[i, j]
            h = 1.0 - yy[i] * m
            if h > 0.0:
                primal += ub[i] * h
        gap = primal - dual
        epochs = ep + 1
        if gap < tol * (1.0 + abs(primal)):
            converged = True
            break
    return w, alpha, epochs, gap, hist[:epochs], converged


class WeightedLinearSVC(BaseEstimator, ClassifierMixin):
    """Linear SVM trained by deterministic dual coordinate descent.

    Ties at the decision boundary (margin exactly 0) predict the positive
    class; in the screening context that is the high-risk label.
    """

    def __init__(self, C: float = 1.0, tol: float = 1e-6, max_epochs: int = 10_000):
        self.C = C
        self.tol = tol
        self.max_epochs = max_epochs

    def fit(self, X, y, sample_weight=None):
        X = check_matrix(X, name="X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise DegenerateDataError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        classes = np.unique(y)
        if classes.size != 2:
            raise SingleClassError(f"need exactly 2 classes, got {classes.tolist()}")
        self.classes_ = classes
        yy = np.where(y == classes[1], 1.0, -1.0)

        if sample_weight is None:
            sample_weight = np.ones(X.shape[0], dtype=np.float64)
        s = np.asarray(sample_weight, dtype=np.float64)
        if s.shape[0] != X.shape[0]:
            raise DegenerateDataError("sample_weight length mismatch")
        if np.any(s < 0.0) or not np.all(np.isfinite(s)):
            raise DegenerateDataError("sample weights must be finite and >= 0")
        for sign in (1.0, -1.0):
            if not np.any((yy == sign) & (s > 0.0)):
                raise DegenerateDataError(
                    f"no positive-weight instance for class {sign:+.0f}"
                )

        Xa = np.ascontiguousarray(np.concatenate([X, np.ones((X.shape[0], 1))], axis=1))
        ub = np.ascontiguousarray(self.C * s)
        w, alpha, epochs, gap, hist, converged = _dual_cd(
            Xa, np.ascontiguousarray(yy), ub, self.tol, self.max_epochs
        )
        self.coef_ = w[:-1].copy()
        self.intercept_ = float(w[-1])
        self.dual_coef_ = alpha
        self.n_epochs_ = int(epochs)
        self.duality_gap_ = float(gap)
        self.dual_objective_path_ = hist
        self.converged_ = bool(converged)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        X = check_matrix(X, n_features=self.n_features_in_, name="X")
        return X @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        margin = self.decision_function(X)
        return np.where(margin >= 0.0, self.classes_[1], self.classes_[0])

    def primal_objective(self, X, y, sample_weight=None) -> float:
        X = check_matrix(X, n_features=self.n_features_in_, name="X")
        yy = np.where(np.asarray(y) == self.classes_[1], 1.0, -1.0)
        s = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, float)
        hinge = np.maximum(0.0, 1.0 - yy * self.decision_function(X))
        return float(0.5 * (self.coef_ @ self.coef_ + self.intercept_ ** 2)
                     + self.C * np.sum(s * hinge))

    def digest(self) -> str:
        return stable_digest("svc", self.coef_, self.intercept_, self.C)

    def to_dict(self, policy=None, meta=None) -> dict:
        return {
            "weights": self.coef_.tolist(),
            "bias": self.intercept_,
            "cost": self.C,
            "policy": policy.to_dict() if policy is not None else None,
            "meta": dict(meta) if meta else {},
        }
