"""V-fold cross-validation, CV risk, simplex stacking weights, and the
ensemble propensity predictor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from . import learners
from .data import Dataset, Intervention, design_matrix, nonintervened_indicator
from .errors import ParameterError, RetrospectError

DEFAULT_FOLDS = 10


@dataclass(frozen=True)
class FoldPlan:
    v: int
    assignment: np.ndarray  # length-N ints in [0, v)
    seed: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int32)
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)
        counts = np.bincount(a, minlength=self.v)
        if np.any(counts == 0):
            raise ParameterError("every fold must be nonempty")
        if counts.max() - counts.min() > 1:
            raise ParameterError("fold sizes must differ by at most 1")


@dataclass(frozen=True)
class EnsembleFit:
    cv_predictions: np.ndarray  # N x C held-out predictions
    cv_risk: np.ndarray  # length C
    weights: np.ndarray  # length C, on the simplex
    full_fits: tuple  # C FittedLearner
    fold_plan: FoldPlan
    specs: tuple


def make_folds(n: int, v: int = DEFAULT_FOLDS, seed: int = 0, stratify=None) -> FoldPlan:
    """Uniformly random balanced partition into v folds, deterministic by seed.

    With `stratify` (a label vector), the balanced assignment is done
    within each label class; off by default.
    """
    if v < 2:
        raise ParameterError("need at least 2 folds")
    if v > n:
        raise ParameterError(f"cannot make {v} folds from {n} units")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int32)
    if stratify is None:
        groups = [np.arange(n)]
    else:
        labels = np.asarray(stratify)
        groups = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    offset = 0
    for idx in groups:
        perm = idx[rng.permutation(idx.shape[0])]
        # continue the fold cycle across groups so overall sizes stay balanced
        assignment[perm] = (np.arange(offset, offset + perm.shape[0])) % v
        offset += perm.shape[0]
    return FoldPlan(v, assignment, seed)


def _task_seed(seed: int, c: int, v: int) -> int:
    return int(np.random.SeedSequence([seed, c, v]).generate_state(1)[0])


def cv_predictions(X, ind, specs, plan: FoldPlan, seed: int = 0, n_jobs: int = 1):
    """Held-out predictions: entry (i, c) is candidate c fitted without fold v(i).

    Candidate-by-fold fits are independent; with n_jobs > 1 they run in
    parallel and are reassembled in fixed order, so the result does not
    depend on scheduling.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ind = np.asarray(ind, dtype=float)
    n = X.shape[0]
    if plan.assignment.shape[0] != n:
        raise ParameterError("fold plan length does not match X")
    tasks = [(c, v) for c in range(len(specs)) for v in range(plan.v)]

    def one(c, v):
        train = plan.assignment != v
        test = ~train
        try:
            fl = learners.fit(specs[c], X[train], ind[train], seed=_task_seed(seed, c, v))
            return learners.predict(fl, X[test])
        except RetrospectError as exc:
            raise type(exc)(f"candidate {c} ({specs[c].kind}), fold {v}: {exc}") from exc

    if n_jobs != 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(one)(c, v) for c, v in tasks)
    else:
        results = [one(c, v) for c, v in tasks]
    out = np.empty((n, len(specs)))
    for (c, v), pred in zip(tasks, results):
        out[plan.assignment == v, c] = pred
    return out


def cv_risk(cvp, ind) -> np.ndarray:
    """Per-candidate mean squared held-out prediction error."""
    cvp = np.atleast_2d(np.asarray(cvp, dtype=float))
    ind = np.asarray(ind, dtype=float)
    if cvp.shape[0] != ind.shape[0]:
        raise ParameterError("dimension mismatch between cv predictions and target")
    resid = ind[:, None] - cvp
    return np.mean(resid * resid, axis=0)


def _project_simplex(w):
    """Euclidean projection onto {w >= 0, sum w = 1}."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    rho = np.flatnonzero(u + (1.0 - css) / np.arange(1, w.shape[0] + 1) > 0)[-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(w - theta, 0.0)


def solve_simplex_weights(cvp, ind, refine_iters: int = 2000) -> np.ndarray:
    """Simplex-constrained least squares stacking weights.

    Non-negative least squares (active set) normalized to sum one, then a
    projected-gradient refinement pass on the simplex. Exactly tied
    candidates (identical held-out prediction columns) share their total
    weight equally.
    """
    cvp = np.atleast_2d(np.asarray(cvp, dtype=float))
    ind = np.asarray(ind, dtype=float)
    n, c = cvp.shape
    if c == 1:
        return np.ones(1)
    w, _ = nnls(cvp, ind)
    if w.sum() <= 0:
        w = np.full(c, 1.0 / c)
    else:
        w = w / w.sum()

    # projected gradient on f(w) = ||ind - cvp w||^2 / n over the simplex
    gram = cvp.T @ cvp / n
    rhs = cvp.T @ ind / n
    lip = 2.0 * np.linalg.eigvalsh(gram)[-1]
    step = 1.0 / max(lip, 1e-12)
    for _ in range(refine_iters):
        grad = 2.0 * (gram @ w - rhs)
        w_new = _project_simplex(w - step * grad)
        if np.max(np.abs(w_new - w)) < 1e-12:
            w = w_new
            break
        w = w_new

    # equal split among exact-tie candidates
    groups: dict = {}
    for j in range(c):
        key = cvp[:, j].tobytes()
        groups.setdefault(key, []).append(j)
    for idx in groups.values():
        if len(idx) > 1:
            w[idx] = w[idx].sum() / len(idx)
    return w


def ensemble_predict(fit: EnsembleFit, X) -> np.ndarray:
    """Weighted combination of the full-data candidate fits, clipped."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(X.shape[0])
    for w, fl in zip(fit.weights, fit.full_fits):
        if w != 0.0:
            out += w * learners.predict(fl, X)
    return np.clip(out, learners.EPS, 1.0 - learners.EPS)


def fit_superlearner(
    ds: Dataset,
    j: int,
    iv: Intervention,
    specs=None,
    v: int = DEFAULT_FOLDS,
    seed: int = 0,
    n_jobs: int = 1,
) -> EnsembleFit:
    """Full stacking pipeline for the propensity of the non-intervened value."""
    if specs is None:
        specs = learners.default_specs()
    X, _ = design_matrix(ds, j)
    ind = nonintervened_indicator(ds, iv)
    plan = make_folds(ds.n, v, seed)
    cvp = cv_predictions(X, ind, specs, plan, seed=seed, n_jobs=n_jobs)
    risks = cv_risk(cvp, ind)
    weights = solve_simplex_weights(cvp, ind)
    full = tuple(
        learners.fit(spec, X, ind, seed=_task_seed(seed, c, plan.v))
        for c, spec in enumerate(specs)
    )
    return EnsembleFit(cvp, risks, weights, full, plan, tuple(specs))


def weight_report_rows(fit: EnsembleFit, intervention_label: str):
    """Rows for the weights CSV: intervention, candidate, cv_risk, weight."""
    return [
        {
            "intervention": intervention_label,
            "candidate": spec.kind,
            "cv_risk": float(risk),
            "weight": float(w),
        }
        for spec, risk, w in zip(fit.specs, fit.cv_risk, fit.weights)
    ]
