"""Candidate propensity-score learners with a uniform fit/predict contract.

Four candidate kinds are provided: plain logistic regression, ridge-penalized
logistic regression, kernel-regularized least squares (KRLS) with a Gaussian
kernel, and gradient-boosted shallow trees on logistic loss. All predictions
are probabilities clipped to [EPS, 1 - EPS].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels
from .errors import NumericError, ParameterError

# positivity floor for every predicted propensity
EPS = 1e-3

LEARNER_KINDS = ("logistic", "ridge_logistic", "krls", "tree_ensemble")

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ParameterError(f"unknown learner kind {self.kind!r}")
        for key, val in self.hyperparameters.items():
            if isinstance(val, (int, float)) and val < 0:
                raise ParameterError(f"hyperparameter {key} must be nonnegative")

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.hyperparameters.items()))))


@dataclass(frozen=True)
class FittedLearner:
    kind: str
    params: dict
    n_features: int
    eps: float = EPS
    degenerate: bool = False


def rule_of_thumb_hyperparameters(kind: str, X, y) -> dict:
    """Default hyperparameters as pure functions of the problem dimensions.

    ridge_logistic: penalty lambda = N / 100.
    krls: Gaussian kernel bandwidth sigma^2 = number of columns (features are
    standardized internally), ridge lambda = 1.0.
    tree_ensemble: 200 trees of depth 2 with learning rate 0.1.
    """
    X = np.atleast_2d(X)
    n, k = X.shape
    if kind == "logistic":
        return {}
    if kind == "ridge_logistic":
        return {"penalty": n / 100.0}
    if kind == "krls":
        return {"bandwidth": float(k), "penalty": 1.0}
    if kind == "tree_ensemble":
        return {"n_trees": 200, "depth": 2, "learning_rate": 0.1, "min_leaf": 10}
    raise ParameterError(f"unknown learner kind {kind!r}")


def default_specs() -> list:
    """The default candidate set, hyperparameters resolved at fit time."""
    return [LearnerSpec(kind) for kind in LEARNER_KINDS]


def _check_inputs(X, y):
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ParameterError("X and y length mismatch")
    if X.shape[0] < 2:
        raise ParameterError("need at least 2 rows to fit")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite values in learner input")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ParameterError("targets must be 0/1")
    return X, y


def _irls(X1, y, penalty=0.0):
    """Iteratively reweighted least squares for (optionally ridge) logistic.

    X1 includes the intercept column first; the intercept is never penalized.
    Stops at max-gradient 1e-8 or 100 iterations.
    """
    n, k = X1.shape
    pen = np.zeros(k)
    pen[1:] = penalty
    beta = np.zeros(k)
    for _ in range(IRLS_MAX_ITER):
        p = _kernels._sigmoid(X1 @ beta)
        grad = X1.T @ (y - p) - 2.0 * pen * beta
        if np.max(np.abs(grad)) <= IRLS_TOL:
            break
        w = np.clip(p * (1.0 - p), 1e-10, None)
        hess = (X1 * w[:, None]).T @ X1 + 2.0 * np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # halve the step until the penalized log-likelihood stops degrading
        ll0 = _penalized_loglik(X1, y, beta, pen)
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            if _penalized_loglik(X1, y, cand, pen) >= ll0 - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
    return beta


def _penalized_loglik(X1, y, beta, pen):
    z = X1 @ beta
    # log(1 + e^z) computed stably
    ll = np.sum(y * z - np.logaddexp(0.0, z))
    return ll - np.sum(pen * beta * beta)


def fit(spec: LearnerSpec, X, y, seed: int = 0) -> FittedLearner:
    """Fit one candidate learner; deterministic given (spec, X, y, seed).

    A single-class target yields a degenerate fit that predicts the
    clipped base rate everywhere (flagged, not fatal).
    """
    X, y = _check_inputs(X, y)
    n, k = X.shape
    hp = dict(rule_of_thumb_hyperparameters(spec.kind, X, y))
    hp.update(spec.hyperparameters)

    if y.min() == y.max():
        rate = float(np.clip(y.mean(), EPS, 1.0 - EPS))
        return FittedLearner(spec.kind, {"base_rate": rate}, k, degenerate=True)

    if spec.kind == "logistic":
        X1 = np.hstack([np.ones((n, 1)), X])
        beta = _irls(X1, y)
        return FittedLearner(spec.kind, {"beta": beta}, k)

    if spec.kind == "ridge_logistic":
        X1 = np.hstack([np.ones((n, 1)), X])
        beta = _irls(X1, y, penalty=float(hp["penalty"]))
        return FittedLearner(spec.kind, {"beta": beta, "penalty": hp["penalty"]}, k)

    if spec.kind == "krls":
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        z = (X - mu) / sd
        bw = float(hp["bandwidth"])
        lam = float(hp["penalty"])
        kern = np.exp(-cdist(z, z, "sqeuclidean") / bw)
        alpha = np.linalg.solve(kern + lam * np.eye(n), y)
        return FittedLearner(
            spec.kind,
            {"alpha": alpha, "train_z": z, "mu": mu, "sd": sd, "bandwidth": bw},
            k,
        )

    if spec.kind == "tree_ensemble":
        model = _kernels.fit_boost(
            X,
            y,
            n_trees=int(hp["n_trees"]),
            depth=int(hp["depth"]),
            learning_rate=float(hp["learning_rate"]),
            min_leaf=int(hp["min_leaf"]),
        )
        return FittedLearner(spec.kind, {"model": model}, k)

    raise ParameterError(f"unknown learner kind {spec.kind!r}")


def predict(fl: FittedLearner, X) -> np.ndarray:
    """Predicted probabilities in [EPS, 1 - EPS]; deterministic."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    if X.shape[1] != fl.n_features:
        raise ParameterError(
            f"shape error: expected {fl.n_features} columns, got {X.shape[1]}"
        )
    p = predict_raw(fl, X)
    return np.clip(p, fl.eps, 1.0 - fl.eps)


def predict_raw(fl: FittedLearner, X) -> np.ndarray:
    """Unclipped model output (used by the score-equation diagnostics)."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    if fl.degenerate:
        return np.full(X.shape[0], fl.params["base_rate"])
    if fl.kind in ("logistic", "ridge_logistic"):
        X1 = np.hstack([np.ones((X.shape[0], 1)), X])
        return _kernels._sigmoid(X1 @ fl.params["beta"])
    if fl.kind == "krls":
        z = (X - fl.params["mu"]) / fl.params["sd"]
        kern = np.exp(-cdist(z, fl.params["train_z"], "sqeuclidean") / fl.params["bandwidth"])
        return kern @ fl.params["alpha"]
    if fl.kind == "tree_ensemble":
        return _kernels.predict_boost(fl.params["model"], X)
    raise ParameterError(f"unknown learner kind {fl.kind!r}")
