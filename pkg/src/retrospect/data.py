"""Data model: immutable micro-data tables, interventions, and covariate prep."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError, ParameterError, SchemaError

INTERVENTION_KINDS = ("set_binary", "floor", "fixed")


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar table of covariates, treatments and an outcome.

    Arrays are stored read-only so a Dataset can be shared freely across
    workers. `survey_weight` defaults to all ones (simple random sample).
    """

    covariates: np.ndarray
    covariate_names: tuple
    treatments: np.ndarray
    treatment_names: tuple
    outcome: np.ndarray
    survey_weight: np.ndarray = None
    cluster_id: np.ndarray = None
    stratum_id: np.ndarray = None

    def __post_init__(self):
        cov = _as_readonly(np.atleast_2d(self.covariates))
        trt = _as_readonly(np.atleast_2d(self.treatments))
        y = _as_readonly(np.asarray(self.outcome))
        n = y.shape[0]
        if n < 1:
            raise DataError("dataset is empty")
        if cov.shape[0] != n or trt.shape[0] != n:
            raise DataError(
                f"column length mismatch: outcome {n}, covariates {cov.shape[0]}, "
                f"treatments {trt.shape[0]}"
            )
        if cov.shape[1] != len(self.covariate_names):
            raise SchemaError("covariate_names does not match covariate matrix width")
        if trt.shape[1] != len(self.treatment_names):
            raise SchemaError("treatment_names does not match treatment matrix width")
        if self.survey_weight is None:
            w = np.ones(n)
        else:
            w = np.asarray(self.survey_weight, dtype=float)
        if w.shape[0] != n:
            raise DataError("survey_weight length mismatch")
        if not np.all(w > 0):
            raise DataError("survey weights must be strictly positive")
        for name, arr in (("covariates", cov), ("treatments", trt), ("outcome", y)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {name}")
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "treatments", trt)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "survey_weight", _as_readonly(w))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "treatment_names", tuple(self.treatment_names))

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treatments(self) -> int:
        return self.treatments.shape[1]

    def normalized_weights(self) -> np.ndarray:
        w = self.survey_weight
        return w / w.sum()


@dataclass(frozen=True)
class Intervention:
    """A hypothetical population manipulation of one treatment column.

    kind "set_binary" / "fixed": every unit's treatment is set to `target`.
    kind "floor": units below `target` are raised to it; units at or above
    it are unchanged.
    """

    treatment_index: int
    kind: str
    target: float
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in INTERVENTION_KINDS:
            raise ParameterError(
                f"unknown intervention kind {self.kind!r}; expected one of {INTERVENTION_KINDS}"
            )
        if self.kind == "set_binary" and self.target not in (0.0, 1.0, 0, 1):
            raise ParameterError("set_binary intervention target must be 0 or 1")

    def label(self, ds: Dataset = None) -> str:
        if self.name:
            return self.name
        col = (
            ds.treatment_names[self.treatment_index]
            if ds is not None
            else f"a{self.treatment_index}"
        )
        return f"{self.kind}:{col}={self.target:g}"


def intervention_from_config(cfg: dict, treatment_names) -> Intervention:
    """Build an Intervention from a parsed config mapping.

    Expected keys: `treatment` (column name or integer index), `kind`
    (one of set_binary / floor / fixed), `target` (number).
    """
    missing = {"treatment", "kind", "target"} - set(cfg)
    if missing:
        raise SchemaError(f"intervention config missing keys: {sorted(missing)}")
    trt = cfg["treatment"]
    names = list(treatment_names)
    if isinstance(trt, int):
        j = trt
        if not 0 <= j < len(names):
            raise SchemaError(f"treatment index {j} out of range")
    else:
        if trt not in names:
            raise SchemaError(f"treatment column {trt!r} not in schema")
        j = names.index(trt)
    try:
        target = float(cfg["target"])
    except (TypeError, ValueError):
        raise SchemaError(f"intervention target {cfg['target']!r} is not numeric")
    return Intervention(j, str(cfg["kind"]), target, name=str(cfg.get("name", "")))


def load_csv(path, schema: dict) -> Dataset:
    """Load a strict-numeric CSV into a Dataset.

    `schema` maps roles to column names: `outcome` (one name),
    `treatments` and `covariates` (lists), plus optional `survey_weight`,
    `cluster_id`, `stratum_id`. Every referenced column must exist, and
    every referenced cell must parse as a number; blank or malformed
    cells raise a DataError naming the offending row and column.
    """
    outcome_col = schema.get("outcome")
    treatment_cols = list(schema.get("treatments", []))
    covariate_cols = list(schema.get("covariates", []))
    if not outcome_col or not treatment_cols or not covariate_cols:
        raise SchemaError(
            "schema must name one outcome column, >=1 treatment and >=1 covariate column"
        )
    optional = {
        k: schema[k]
        for k in ("survey_weight", "cluster_id", "stratum_id")
        if schema.get(k)
    }

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        needed = [outcome_col] + treatment_cols + covariate_cols + list(optional.values())
        for col in needed:
            if col not in header:
                raise SchemaError(f"{path}: column {col!r} not found in header")
        numeric_cols = [c for c in needed if c not in
                        (optional.get("cluster_id"), optional.get("stratum_id"))]
        idx = {c: header.index(c) for c in needed}
        rows = {c: [] for c in needed}
        for rownum, row in enumerate(reader):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}")
            for col in needed:
                cell = row[idx[col]].strip()
                if col in numeric_cols:
                    if cell == "":
                        raise DataError(f"{path}: missing value at row {rownum}, column {col!r}")
                    try:
                        rows[col].append(float(cell))
                    except ValueError:
                        raise DataError(
                            f"{path}: non-numeric value {cell!r} at row {rownum}, column {col!r}"
                        )
                else:
                    rows[col].append(cell)
    if not rows[outcome_col]:
        raise DataError(f"{path}: no data rows")

    def stack(cols):
        return np.column_stack([np.asarray(rows[c], dtype=float) for c in cols])

    weight_col = optional.get("survey_weight")
    return Dataset(
        covariates=stack(covariate_cols),
        covariate_names=tuple(covariate_cols),
        treatments=stack(treatment_cols),
        treatment_names=tuple(treatment_cols),
        outcome=np.asarray(rows[outcome_col], dtype=float),
        survey_weight=np.asarray(rows[weight_col], dtype=float) if weight_col else None,
        cluster_id=np.asarray(rows[optional["cluster_id"]]) if "cluster_id" in optional else None,
        stratum_id=np.asarray(rows[optional["stratum_id"]]) if "stratum_id" in optional else None,
    )


def nonintervened_indicator(ds: Dataset, iv: Intervention) -> np.ndarray:
    """0/1 vector: 1 where the intervention would leave the unit unchanged."""
    j = iv.treatment_index
    if not 0 <= j < ds.n_treatments:
        raise ParameterError(f"treatment index {j} out of range [0, {ds.n_treatments})")
    a = ds.treatments[:, j]
    if iv.kind == "floor":
        ind = a >= iv.target
    else:
        if iv.kind == "set_binary" and not np.all(np.isin(a, (0.0, 1.0))):
            raise ParameterError(
                f"set_binary intervention on non-binary column "
                f"{ds.treatment_names[j]!r}"
            )
        ind = a == iv.target
    return ind.astype(float)


def binding_share(ds: Dataset, iv: Intervention) -> float:
    """Survey-weighted share of units the intervention would change."""
    ind = nonintervened_indicator(ds, iv)
    w = ds.normalized_weights()
    return float(np.sum(w * (1.0 - ind)))


def icw_index(ds: Dataset, columns) -> np.ndarray:
    """Inverse-covariance weighted index of a set of covariate columns.

    Each column is standardized to mean 0 / SD 1 first, the weights are
    the row sums of the inverse of the standardized columns' sample
    covariance matrix, and the weighted average is re-standardized.
    """
    columns = list(columns)
    if not columns:
        raise ParameterError("icw_index needs at least one column")
    for c in columns:
        if c not in ds.covariate_names:
            raise SchemaError(f"unknown covariate column {c!r}")
    cols_idx = [ds.covariate_names.index(c) for c in columns]
    x = ds.covariates[:, cols_idx]
    sd = x.std(axis=0, ddof=1) if ds.n > 1 else x.std(axis=0)
    if np.any(sd <= 0):
        bad = [columns[i] for i in np.flatnonzero(sd <= 0)]
        raise NumericError(f"zero-variance columns in icw_index: {bad}")
    z = (x - x.mean(axis=0)) / sd
    if len(columns) == 1:
        return z[:, 0]
    cov = np.cov(z, rowvar=False, ddof=1)
    # reciprocal condition check; a hard singularity should name the culprits
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] <= 1e-12 * max(eigvals[-1], 1.0):
        loadings = np.abs(eigvecs[:, 0])
        involved = [columns[i] for i in np.flatnonzero(loadings > 0.1)]
        raise NumericError(f"singular covariance in icw_index; collinear set: {involved}")
    weights = np.linalg.solve(cov, np.ones(len(columns)))
    index = z @ (weights / weights.sum())
    return (index - index.mean()) / index.std(ddof=1)


def design_matrix(ds: Dataset, j: int):
    """Conditioning matrix for treatment j: covariates then other treatments.

    Returns (X, names); column order is deterministic (covariates in
    schema order, then remaining treatments in index order) so fits are
    reproducible given a seed.
    """
    if not 0 <= j < ds.n_treatments:
        raise ParameterError(f"treatment index {j} out of range [0, {ds.n_treatments})")
    others = [k for k in range(ds.n_treatments) if k != j]
    blocks = [ds.covariates]
    names = list(ds.covariate_names)
    if others:
        blocks.append(ds.treatments[:, others])
        names.extend(ds.treatment_names[k] for k in others)
    return np.hstack(blocks), tuple(names)
