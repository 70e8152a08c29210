"""RIE point estimators, influence-value variance, Wald intervals, and
multiple-imputation pooling.

All estimators survey-weight with normalized weights, so every result is
invariant to uniform rescaling of the weights. The IPW counterfactual
mean self-normalizes the indicator/propensity ratio (Hajek form), which
also makes the estimate invariant to adding a constant to the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import norm

from . import learners
from .data import (
    Dataset,
    Intervention,
    binding_share,
    design_matrix,
    nonintervened_indicator,
)
from .errors import NumericError, ParameterError, PositivityError, SupportError, UsageError

METHODS = ("ensemble_ipw", "naive_ipw", "ols", "matching")


@dataclass(frozen=True)
class RIEEstimate:
    psi: float
    se: float
    ci_low: float
    ci_high: float
    alpha: float
    binding_share: float
    method: str
    n: int = 0
    flags: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method tag {self.method!r}")


@dataclass(frozen=True)
class InfluenceValues:
    d: np.ndarray


def _z(alpha: float) -> float:
    return float(norm.ppf(1.0 - alpha / 2.0))


def _weighted_se(d: np.ndarray, w_norm: np.ndarray) -> float:
    """sqrt(weighted sample variance of d / N_eff), N_eff = (sum w)^2 / sum w^2.

    With normalized weights this reduces to sqrt(var(d, ddof=1) / N) under
    equal weighting.
    """
    dbar = float(np.sum(w_norm * d))
    sw2 = float(np.sum(w_norm * w_norm))
    denom = 1.0 - sw2
    if denom <= 0.0:
        return 0.0
    var = float(np.sum(w_norm * (d - dbar) ** 2)) / denom
    return float(np.sqrt(max(var, 0.0) * sw2))


def ipw_point_and_influence(y, ind, ghat, w_norm):
    """Core IPW computation on raw arrays.

    Counterfactual mean = weighted mean of y under self-normalized
    ind/ghat ratio weights; influence value d_i = (r_i - 1) y_i with
    r_i the normalized ratio, so that the weighted mean of d is exactly
    the point estimate.
    """
    ratio = ind / ghat
    mean_ratio = float(np.sum(w_norm * ratio))
    if mean_ratio <= 0.0:
        raise NumericError("no units carry the non-intervened treatment value")
    r = ratio / mean_ratio
    d = (r - 1.0) * y
    psi = float(np.sum(w_norm * d))
    se = _weighted_se(d, w_norm)
    return psi, se, d


def rie_ipw(ds: Dataset, iv: Intervention, ghat, alpha: float = 0.05,
            method: str = "ensemble_ipw", flags: tuple = ()):
    """Inverse-propensity weighted RIE with Wald confidence interval.

    Returns (RIEEstimate, InfluenceValues). `ghat` must lie inside the
    clipped positivity range [EPS, 1 - EPS].
    """
    ghat = np.asarray(ghat, dtype=float)
    if ghat.shape[0] != ds.n:
        raise ParameterError("ghat length does not match dataset")
    # lower bound is the positivity floor; exact 1.0 is harmless (a sure
    # non-intervened unit contributes with weight 1)
    tol = 1e-12
    if np.any(ghat < learners.EPS - tol) or np.any(ghat > 1.0 + tol):
        raise PositivityError(
            f"propensity estimates outside [{learners.EPS}, 1]"
        )
    ind = nonintervened_indicator(ds, iv)
    w = ds.normalized_weights()
    psi, se, d = ipw_point_and_influence(ds.outcome, ind, ghat, w)
    z = _z(alpha)
    est = RIEEstimate(
        psi, se, psi - z * se, psi + z * se, alpha,
        binding_share(ds, iv), method, ds.n, tuple(flags),
    )
    return est, InfluenceValues(d)


def rie_naive_ipw(ds: Dataset, iv: Intervention, alpha: float = 0.05, seed: int = 0):
    """IPW with propensity scores from a plain logistic regression."""
    X, _ = design_matrix(ds, iv.treatment_index)
    ind = nonintervened_indicator(ds, iv)
    fl = learners.fit(learners.LearnerSpec("logistic"), X, ind, seed=seed)
    ghat = learners.predict(fl, X)
    flags = ("degenerate_propensity_fit",) if fl.degenerate else ()
    est, _ = rie_ipw(ds, iv, ghat, alpha, method="naive_ipw", flags=flags)
    return est


def _counterfactual_shift(ds: Dataset, iv: Intervention) -> np.ndarray:
    """Per-unit change in the treatment column the intervention would impose."""
    a = ds.treatments[:, iv.treatment_index]
    if iv.kind == "floor":
        return np.maximum(iv.target - a, 0.0)
    return iv.target - a


def rie_ols(ds: Dataset, iv: Intervention, alpha: float = 0.05) -> RIEEstimate:
    """Weighted least squares comparison estimator.

    Regresses Y on (A_j, covariates, other treatments) with intercept and
    survey weights; the counterfactual mean shifts each binding unit's
    prediction by beta_j times its imposed treatment change, which equals
    the coefficient route for binary set interventions. The standard
    error is the heteroskedasticity-robust coefficient SE scaled by the
    mean imposed shift.
    """
    Xd, _ = design_matrix(ds, iv.treatment_index)
    a = ds.treatments[:, iv.treatment_index]
    n = ds.n
    X = np.hstack([np.ones((n, 1)), a[:, None], Xd])
    w = ds.normalized_weights()
    y = ds.outcome
    xtw = X.T * w
    gram = xtw @ X
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericError("rank-deficient design in weighted least squares")
    beta = np.linalg.solve(gram, xtw @ y)
    resid = y - X @ beta
    # HC0-style sandwich with normalized survey weights
    meat = (xtw * resid) @ (xtw * resid).T
    bread = np.linalg.inv(gram)
    vcov = bread @ meat @ bread
    se_beta = float(np.sqrt(max(vcov[1, 1], 0.0)))

    shift = _counterfactual_shift(ds, iv)
    mean_shift = float(np.sum(w * shift))
    psi = float(beta[1] * mean_shift)
    se = se_beta * abs(mean_shift)
    z = _z(alpha)
    return RIEEstimate(
        psi, se, psi - z * se, psi + z * se, alpha,
        binding_share(ds, iv), "ols", n,
    )


def rie_matching(ds: Dataset, iv: Intervention, alpha: float = 0.05,
                 exact_columns=None) -> RIEEstimate:
    """Mahalanobis nearest-neighbor matching with replacement.

    Each binding unit borrows the outcome of its nearest non-intervened
    donor under Mahalanobis distance on the conditioning columns
    (full-sample covariance, ridge-stabilized); ties go to the lowest
    donor row index. The SE uses the same influence machinery on the
    per-unit counterfactual changes and is a documented approximation
    (flag `approximate_se`): it ignores donor reuse.
    """
    X, names = design_matrix(ds, iv.treatment_index)
    ind = nonintervened_indicator(ds, iv)
    donors = np.flatnonzero(ind == 1.0)
    binding = np.flatnonzero(ind == 0.0)
    w = ds.normalized_weights()
    y = ds.outcome

    cf = y.copy()
    if binding.size:
        if donors.size == 0:
            raise SupportError("no donor units with the non-intervened value")
        cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
        cov = cov + 1e-8 * np.diag(np.diag(cov)) + 1e-12 * np.eye(cov.shape[0])
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NumericError("singular covariance in Mahalanobis matching")
        zx = np.linalg.solve(chol, X.T).T

        if exact_columns:
            exact_idx = []
            for c in exact_columns:
                if c not in names:
                    raise ParameterError(f"exact-matching column {c!r} not in design")
                exact_idx.append(names.index(c))
            keys = [tuple(X[i, exact_idx]) for i in range(ds.n)]
            donor_cells: dict = {}
            for i in donors:
                donor_cells.setdefault(keys[i], []).append(i)
            for i in binding:
                cell = donor_cells.get(keys[i])
                if not cell:
                    raise SupportError(f"no donors in exact-matching cell {keys[i]}")
                pool = np.asarray(cell)
                dist = cdist(zx[i:i + 1], zx[pool])[0]
                cf[i] = y[pool[np.argmin(dist)]]
        else:
            dist = cdist(zx[binding], zx[donors])
            cf[binding] = y[donors[np.argmin(dist, axis=1)]]

    delta = cf - y
    psi = float(np.sum(w * delta))
    se = _weighted_se(delta, w)
    z = _z(alpha)
    return RIEEstimate(
        psi, se, psi - z * se, psi + z * se, alpha,
        binding_share(ds, iv), "matching", ds.n, ("approximate_se",),
    )


def combine_imputations(estimates, alpha: float = 0.05) -> RIEEstimate:
    """Pool estimates across imputation-completed datasets (Rubin's rules)."""
    estimates = list(estimates)
    m = len(estimates)
    if m < 2:
        raise UsageError("need at least 2 imputation estimates to pool")
    methods = {e.method for e in estimates}
    if len(methods) != 1:
        raise UsageError(f"cannot pool mixed method tags: {sorted(methods)}")
    psis = np.array([e.psi for e in estimates])
    ses = np.array([e.se for e in estimates])
    psi = float(psis.mean())
    within = float(np.mean(ses**2))
    between = float(np.var(psis, ddof=1))
    total = within + (1.0 + 1.0 / m) * between
    se = float(np.sqrt(total))
    z = _z(alpha)
    flags = tuple(sorted(set().union(*(e.flags for e in estimates))))
    return RIEEstimate(
        psi, se, psi - z * se, psi + z * se, alpha,
        float(np.mean([e.binding_share for e in estimates])),
        methods.pop(), int(np.mean([e.n for e in estimates])), flags,
    )
