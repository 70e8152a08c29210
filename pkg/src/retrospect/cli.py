"""Command-line front-end: estimate / simulate / combine / balance.

Each command is driven by a YAML config file; flags override config keys
and the effective merged config is echoed into the output directory.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
error.
"""

from __future__ import annotations

import csv
import os
import sys
from pathlib import Path

import click
import yaml

from . import diagnostics, simulation, superlearner
from .data import intervention_from_config, load_csv
from .errors import (
    DataError,
    NumericError,
    ParameterError,
    RetrospectError,
    SchemaError,
    UsageError,
)
from .estimators import (
    RIEEstimate,
    combine_imputations,
    rie_ipw,
    rie_matching,
    rie_naive_ipw,
    rie_ols,
)

_EXIT_CONFIG = 2
_EXIT_DATA = 3
_EXIT_NUMERIC = 4


def _exit_code(exc: RetrospectError) -> int:
    if isinstance(exc, NumericError):
        return _EXIT_NUMERIC
    if isinstance(exc, DataError):
        return _EXIT_DATA
    return _EXIT_CONFIG


def _fail(exc: Exception, code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        _fail(exc, _EXIT_CONFIG)
    if not isinstance(cfg, dict):
        _fail(ValueError(f"{path}: config must be a mapping"), _EXIT_CONFIG)
    return cfg


def _default_threads() -> int:
    env = os.environ.get("RETROSPECT_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _echo_config(cfg: dict, outdir: Path):
    with open(outdir / "config_used.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


ESTIMATE_FIELDS = [
    "method", "intervention", "psi", "se", "ci_low", "ci_high",
    "binding_share", "n", "flags",
]


def _estimate_row(method, label, est: RIEEstimate) -> dict:
    return {
        "method": method,
        "intervention": label,
        "psi": est.psi,
        "se": est.se,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "binding_share": est.binding_share,
        "n": est.n,
        "flags": ";".join(est.flags),
    }


@click.group()
def main():
    """Retrospective intervention effect estimation."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=False))
@click.option("--seed", type=int, default=None, help="override config seed")
@click.option("--out", "out_override", default=None, help="override output directory")
@click.option("--threads", type=int, default=None, help="worker pool size")
def estimate(config_path, seed, out_override, threads):
    """Estimate RIEs for every configured intervention and method."""
    cfg = _load_config(config_path)
    if seed is not None:
        cfg["seed"] = seed
    if out_override is not None:
        cfg["output_dir"] = out_override
    try:
        _run_estimate(cfg, threads or int(cfg.get("threads", 0)) or _default_threads())
    except RetrospectError as exc:
        _fail(exc, _exit_code(exc))


def _run_estimate(cfg: dict, threads: int):
    for key in ("data", "schema", "interventions", "output_dir"):
        if key not in cfg:
            raise SchemaError(f"config missing key {key!r}")
    if "seed" not in cfg:
        raise SchemaError("config must set an explicit seed")
    seed = int(cfg["seed"])
    alpha = float(cfg.get("alpha", 0.05))
    folds = int(cfg.get("folds", superlearner.DEFAULT_FOLDS))
    methods = list(cfg.get("methods", ["ensemble_ipw", "naive_ipw", "ols", "matching"]))
    ds = load_csv(cfg["data"], cfg["schema"])

    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, outdir)

    est_rows, weight_rows, bal_pre, bal_post, hist_rows = [], [], [], [], []
    positivity_lines = []
    for iv_cfg in cfg["interventions"]:
        iv = intervention_from_config(iv_cfg, ds.treatment_names)
        label = iv.label(ds)
        # the ensemble is always fitted: weights.csv, balance_post.csv and
        # the propensity diagnostics are part of the output contract
        fit = superlearner.fit_superlearner(
            ds, iv.treatment_index, iv, v=folds, seed=seed, n_jobs=threads
        )
        from .data import design_matrix, nonintervened_indicator

        X, _ = design_matrix(ds, iv.treatment_index)
        ghat = superlearner.ensemble_predict(fit, X)
        weight_rows.extend(superlearner.weight_report_rows(fit, label))
        ind = nonintervened_indicator(ds, iv)
        rep = diagnostics.positivity_report(ghat, ind, b=float(cfg.get("positivity_floor", 0.01)))
        positivity_lines.append(
            f"{label}: min={rep.minimum:.6g} max={rep.maximum:.6g} "
            f"below_floor={rep.n_below} floor={rep.floor:g} "
            f"{'PASS' if rep.passed else 'FAIL rows=' + str(list(rep.violating_rows))}"
        )
        counts, edges = diagnostics.pscore_histogram(ghat, ind, bins=int(cfg.get("bins", 20)))
        for lo, hi, cnt in zip(edges[:-1], edges[1:], counts):
            hist_rows.append(
                {"intervention": label, "bin_low": lo, "bin_high": hi, "count": int(cnt)}
            )
        for row in diagnostics.balance_table(ds, iv, ghat=None, alpha=alpha):
            bal_pre.append(_balance_row(label, row))
        for row in diagnostics.balance_table(ds, iv, ghat=ghat, alpha=alpha):
            if row.adjusted:
                bal_post.append(_balance_row(label, row))

        for method in methods:
            if method == "ensemble_ipw":
                est, _ = rie_ipw(ds, iv, ghat, alpha)
            elif method == "naive_ipw":
                est = rie_naive_ipw(ds, iv, alpha, seed=seed)
            elif method == "ols":
                est = rie_ols(ds, iv, alpha)
            elif method == "matching":
                est = rie_matching(ds, iv, alpha, exact_columns=cfg.get("exact_columns"))
            else:
                raise SchemaError(f"unknown method {method!r}")
            est_rows.append(_estimate_row(method, label, est))

    _write_csv(outdir / "estimates.csv", ESTIMATE_FIELDS, est_rows)
    _write_csv(outdir / "weights.csv", ["intervention", "candidate", "cv_risk", "weight"], weight_rows)
    bal_fields = ["intervention", "covariate", "smd", "ci_low", "ci_high", "skipped"]
    _write_csv(outdir / "balance_pre.csv", bal_fields, bal_pre)
    _write_csv(outdir / "balance_post.csv", bal_fields, bal_post)
    _write_csv(outdir / "pscore_hist.csv", ["intervention", "bin_low", "bin_high", "count"], hist_rows)
    with open(outdir / "positivity.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(positivity_lines) + "\n")


def _balance_row(label, row) -> dict:
    return {
        "intervention": label,
        "covariate": row.covariate,
        "smd": row.smd,
        "ci_low": row.ci_low,
        "ci_high": row.ci_high,
        "skipped": int(row.skipped),
    }


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--n", type=int, default=None)
@click.option("--runs", type=int, default=None)
@click.option("--noise", multiple=True, type=int, help="noise levels (repeatable)")
@click.option("--seed", type=int, default=None)
@click.option("--fast", is_flag=True, help="reduced candidate set for smoke tests")
@click.option("--threads", type=int, default=None)
@click.option("--out", default="simstudy.csv", show_default=True)
@click.option("--raw", default=None, help="also write per-run estimates to this file")
def simulate(config_path, n, runs, noise, seed, fast, threads, out, raw):
    """Run the Monte Carlo benchmark and write standardized metrics."""
    cfg = _load_config(config_path) if config_path else {}
    if n is not None:
        cfg["n"] = n
    if runs is not None:
        cfg["runs"] = runs
    if noise:
        cfg["noise"] = list(noise)
    if seed is not None:
        cfg["seed"] = seed
    if fast:
        cfg["fast"] = True
    levels = cfg.get("noise", [0, 5, 10])
    try:
        sim_cfg = simulation.SimConfig(
            n=int(cfg.get("n", 500)),
            n_runs=int(cfg.get("runs", 250)),
            seed=int(cfg.get("seed", 0)),
            methods=tuple(cfg.get("methods", simulation.SIM_METHODS)),
            fast=bool(cfg.get("fast", False)),
            n_jobs=threads or int(cfg.get("threads", 0)) or _default_threads(),
        )
        results = simulation.run_sweep(sim_cfg, levels)
    except (ValueError, ParameterError) as exc:
        _fail(exc, _EXIT_CONFIG)
    except RetrospectError as exc:
        _fail(exc, _exit_code(exc))

    rows = []
    all_failed = []
    for lvl, res in results.items():
        for method, met in res.metrics.items():
            if met.n_failed >= met.n_runs:
                all_failed.append((method, lvl))
            rows.append(
                {"method": method, "noise_dims": lvl,
                 "bias": met.bias, "se": met.se, "rmse": met.rmse}
            )
    _write_csv(out, ["method", "noise_dims", "bias", "se", "rmse"], rows)
    if raw:
        raw_rows = [
            {"method": m, "noise_dims": lvl, "run": r,
             "estimate": est, "truth": res.truths[r]}
            for lvl, res in results.items()
            for m, arr in res.estimates.items()
            for r, est in enumerate(arr)
        ]
        _write_csv(raw, ["method", "noise_dims", "run", "estimate", "truth"], raw_rows)
    if all_failed:
        _fail(RuntimeError(f"methods failed on every run: {all_failed}"), _EXIT_NUMERIC)


@main.command()
@click.argument("paths", nargs=-1, type=click.Path(exists=True))
@click.option("--out", default="pooled.csv", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
def combine(paths, out, alpha):
    """Pool estimate files from imputation-completed datasets (Rubin's rules)."""
    if len(paths) < 2:
        _fail(UsageError("need at least 2 estimate files to pool"), _EXIT_CONFIG)
    tables = []
    for p in paths:
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ESTIMATE_FIELDS:
                _fail(SchemaError(f"{p}: unexpected columns {reader.fieldnames}"), _EXIT_CONFIG)
            tables.append({(r["method"], r["intervention"]): r for r in reader})
    keys = list(tables[0])
    for p, t in zip(paths[1:], tables[1:]):
        if set(t) != set(keys):
            _fail(SchemaError(f"{p}: (method, intervention) keys differ"), _EXIT_CONFIG)
    rows = []
    for key in keys:
        ests = []
        for t in tables:
            r = t[key]
            psi, se = float(r["psi"]), float(r["se"])
            ests.append(
                RIEEstimate(
                    psi, se, float(r["ci_low"]), float(r["ci_high"]), alpha,
                    float(r["binding_share"]), r["method"], int(float(r["n"])),
                    tuple(f for f in r["flags"].split(";") if f),
                )
            )
        try:
            pooled = combine_imputations(ests, alpha)
        except RetrospectError as exc:
            _fail(exc, _exit_code(exc))
        rows.append(_estimate_row(key[0], key[1], pooled))
    _write_csv(out, ESTIMATE_FIELDS, rows)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--adjusted/--no-adjusted", default=True,
              help="also fit the ensemble and write IPW-adjusted balance")
@click.option("--threads", type=int, default=None)
def balance(config_path, adjusted, threads):
    """Write balance placebo tables without running the estimators."""
    cfg = _load_config(config_path)
    cfg = dict(cfg)
    cfg["methods"] = ["ensemble_ipw"] if adjusted else []
    try:
        _run_balance(cfg, adjusted, threads or _default_threads())
    except RetrospectError as exc:
        _fail(exc, _exit_code(exc))


def _run_balance(cfg, adjusted, threads):
    for key in ("data", "schema", "interventions", "output_dir"):
        if key not in cfg:
            raise SchemaError(f"config missing key {key!r}")
    seed = int(cfg.get("seed", 0))
    alpha = float(cfg.get("alpha", 0.05))
    ds = load_csv(cfg["data"], cfg["schema"])
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, outdir)
    bal_pre, bal_post = [], []
    for iv_cfg in cfg["interventions"]:
        iv = intervention_from_config(iv_cfg, ds.treatment_names)
        label = iv.label(ds)
        for row in diagnostics.balance_table(ds, iv, ghat=None, alpha=alpha):
            bal_pre.append(_balance_row(label, row))
        if adjusted:
            from .data import design_matrix

            fit = superlearner.fit_superlearner(
                ds, iv.treatment_index, iv,
                v=int(cfg.get("folds", superlearner.DEFAULT_FOLDS)),
                seed=seed, n_jobs=threads,
            )
            X, _ = design_matrix(ds, iv.treatment_index)
            ghat = superlearner.ensemble_predict(fit, X)
            for row in diagnostics.balance_table(ds, iv, ghat=ghat, alpha=alpha):
                if row.adjusted:
                    bal_post.append(_balance_row(label, row))
    fields = ["intervention", "covariate", "smd", "ci_low", "ci_high", "skipped"]
    _write_csv(outdir / "balance_pre.csv", fields, bal_pre)
    if adjusted:
        _write_csv(outdir / "balance_post.csv", fields, bal_post)


if __name__ == "__main__":
    main()
