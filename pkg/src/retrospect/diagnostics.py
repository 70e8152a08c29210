"""Balance placebo tests, positivity checks, and propensity histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Intervention, nonintervened_indicator
from .errors import ParameterError
from .estimators import _z, ipw_point_and_influence


@dataclass(frozen=True)
class BalanceRow:
    covariate: str
    smd: float
    ci_low: float
    ci_high: float
    adjusted: bool
    skipped: bool = False


@dataclass(frozen=True)
class PositivityReport:
    floor: float
    minimum: float
    maximum: float
    n_below: int
    violating_rows: tuple
    passed: bool


def balance_table(ds: Dataset, iv: Intervention, ghat=None, alpha: float = 0.05):
    """Pseudo-RIE balance rows, one per covariate, in SD units.

    Unadjusted rows use a constant propensity equal to the weighted share
    of non-intervened units, which reduces the pseudo-RIE to the raw
    subgroup-vs-population mean difference. When `ghat` is supplied,
    adjusted rows apply the same IPW machinery with it. Zero-variance
    covariates are flagged and skipped rather than propagating NaN.
    """
    ind = nonintervened_indicator(ds, iv)
    w = ds.normalized_weights()
    p_const = float(np.sum(w * ind))
    z = _z(alpha)
    rows = []
    variants = [("unadjusted", np.full(ds.n, max(p_const, 1e-12)))]
    if ghat is not None:
        variants.append(("adjusted", np.asarray(ghat, dtype=float)))
    for name_idx, name in enumerate(ds.covariate_names):
        x = ds.covariates[:, name_idx]
        mu = float(np.sum(w * x))
        sd = float(np.sqrt(np.sum(w * (x - mu) ** 2)))
        # tolerance is relative to the column magnitude: an exactly constant
        # column can leave sd at rounding-noise level rather than 0
        if sd <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            for label, _ in variants:
                rows.append(BalanceRow(name, 0.0, 0.0, 0.0, label == "adjusted", skipped=True))
            continue
        for label, g in variants:
            psi, se, _ = ipw_point_and_influence(x, ind, g, w)
            smd = psi / sd
            half = z * se / sd
            rows.append(BalanceRow(name, smd, smd - half, smd + half, label == "adjusted"))
    return rows


def positivity_report(ghat, ind, b: float) -> PositivityReport:
    """Scan non-intervened units' propensities against the floor b."""
    ghat = np.asarray(ghat, dtype=float)
    ind = np.asarray(ind, dtype=float)
    sel = np.flatnonzero(ind == 1.0)
    if sel.size == 0:
        return PositivityReport(b, float("nan"), float("nan"), 0, (), False)
    vals = ghat[sel]
    below = sel[vals < b]
    return PositivityReport(
        floor=b,
        minimum=float(vals.min()),
        maximum=float(vals.max()),
        n_below=int(below.size),
        violating_rows=tuple(int(i) for i in below),
        passed=below.size == 0,
    )


def pscore_histogram(ghat, ind, bins: int):
    """Equal-width histogram on [0, 1] of non-intervened units' propensities.

    Returns (counts, edges); counts sum to the number of indicator-1 units.
    """
    if bins < 1:
        raise ParameterError("need at least one bin")
    ghat = np.asarray(ghat, dtype=float)
    ind = np.asarray(ind, dtype=float)
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(ghat[ind == 1.0], bins=edges)
    return counts, edges
