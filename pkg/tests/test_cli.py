import csv
import shutil

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from retrospect.cli import ESTIMATE_FIELDS, main


@pytest.fixture
def runner():
    return CliRunner()


def write_csv_data(path, n=80, seed=0):
    rng = np.random.default_rng(seed)
    w1 = rng.normal(size=n)
    w2 = rng.normal(size=n)
    a = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-w1))).astype(int)
    y = w1 + 2.0 * a + rng.normal(size=n)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "a", "w1", "w2"])
        for row in zip(y, a, w1, w2):
            writer.writerow(row)


def write_config(path, data_path, outdir, **overrides):
    cfg = {
        "data": str(data_path),
        "schema": {"outcome": "y", "treatments": ["a"], "covariates": ["w1", "w2"]},
        "interventions": [{"treatment": "a", "kind": "set_binary", "target": 0}],
        "output_dir": str(outdir),
        "seed": 11,
        "folds": 5,
        "threads": 1,
    }
    cfg.update(overrides)
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh)
    return cfg


OUTPUT_FILES = (
    "estimates.csv",
    "weights.csv",
    "balance_pre.csv",
    "balance_post.csv",
    "pscore_hist.csv",
    "positivity.txt",
    "config_used.yaml",
)


class TestEstimate:
    def test_happy_path_outputs(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(cfg_path, data, tmp_path / "out")
        result = runner.invoke(main, ["estimate", "--config", str(cfg_path)])
        assert result.exit_code == 0, result.output
        for name in OUTPUT_FILES:
            assert (tmp_path / "out" / name).exists()
        with open(tmp_path / "out" / "estimates.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        # default method set: one row per method per intervention
        assert len(rows) == 4
        assert list(rows[0]) == ESTIMATE_FIELDS
        assert {r["method"] for r in rows} == {
            "ensemble_ipw", "naive_ipw", "ols", "matching"
        }
        for r in rows:
            assert float(r["ci_low"]) <= float(r["psi"]) <= float(r["ci_high"])
            assert r["n"] == "80"

    def test_byte_identical_rerun(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(cfg_path, data, tmp_path / "out1")
        assert runner.invoke(main, ["estimate", "--config", str(cfg_path)]).exit_code == 0
        result = runner.invoke(
            main, ["estimate", "--config", str(cfg_path), "--out", str(tmp_path / "out2")]
        )
        assert result.exit_code == 0
        for name in ("estimates.csv", "weights.csv", "balance_post.csv"):
            b1 = (tmp_path / "out1" / name).read_bytes()
            b2 = (tmp_path / "out2" / name).read_bytes()
            assert b1 == b2, name

    def test_seed_override_changes_folds_not_contract(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(cfg_path, data, tmp_path / "out1")
        assert runner.invoke(main, ["estimate", "--config", str(cfg_path)]).exit_code == 0
        result = runner.invoke(
            main,
            ["estimate", "--config", str(cfg_path), "--seed", "99",
             "--out", str(tmp_path / "out2")],
        )
        assert result.exit_code == 0
        used = yaml.safe_load((tmp_path / "out2" / "config_used.yaml").read_text())
        assert used["seed"] == 99

    def test_missing_seed_is_config_error(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        cfg = write_config(cfg_path, data, tmp_path / "out")
        del cfg["seed"]
        with open(cfg_path, "w") as fh:
            yaml.safe_dump(cfg, fh)
        result = runner.invoke(main, ["estimate", "--config", str(cfg_path)])
        assert result.exit_code == 2

    def test_unknown_schema_column_is_config_error(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(
            cfg_path, data, tmp_path / "out",
            schema={"outcome": "y", "treatments": ["a"], "covariates": ["nope"]},
        )
        result = runner.invoke(main, ["estimate", "--config", str(cfg_path)])
        assert result.exit_code == 2

    def test_bad_cell_is_data_error(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("y,a,w1,w2\n1,0,x,0.2\n2,1,0.3,0.4\n" * 1)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(cfg_path, data, tmp_path / "out")
        result = runner.invoke(main, ["estimate", "--config", str(cfg_path)])
        assert result.exit_code == 3


class TestSimulate:
    def test_fast_smoke_columns(self, runner, tmp_path):
        out = tmp_path / "sim.csv"
        result = runner.invoke(
            main,
            ["simulate", "--fast", "--runs", "2", "--n", "60", "--noise", "0",
             "--seed", "1", "--threads", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            reader = csv.DictReader(fh)
            assert reader.fieldnames == ["method", "noise_dims", "bias", "se", "rmse"]
            rows = list(reader)
        assert len(rows) == 4
        for r in rows:
            assert np.isfinite(float(r["rmse"]))

    def test_raw_output(self, runner, tmp_path):
        out = tmp_path / "sim.csv"
        raw = tmp_path / "raw.csv"
        result = runner.invoke(
            main,
            ["simulate", "--fast", "--runs", "2", "--n", "60", "--noise", "0",
             "--seed", "1", "--threads", "1", "--out", str(out), "--raw", str(raw)],
        )
        assert result.exit_code == 0, result.output
        with open(raw, newline="") as fh:
            rows = list(csv.DictReader(fh))
        # 4 methods x 1 level x 2 runs
        assert len(rows) == 8

    def test_bad_n_is_config_error(self, runner, tmp_path):
        result = runner.invoke(
            main, ["simulate", "--n", "5", "--runs", "1", "--threads", "1",
                   "--out", str(tmp_path / "s.csv")]
        )
        assert result.exit_code == 2


class TestCombine:
    def _make_estimates(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(cfg_path, data, tmp_path / "out")
        assert runner.invoke(main, ["estimate", "--config", str(cfg_path)]).exit_code == 0
        return tmp_path / "out" / "estimates.csv"

    def test_identical_files_pool_to_within_se(self, runner, tmp_path):
        est = self._make_estimates(runner, tmp_path)
        copies = []
        for k in range(3):
            p = tmp_path / f"est{k}.csv"
            shutil.copy(est, p)
            copies.append(str(p))
        out = tmp_path / "pooled.csv"
        result = runner.invoke(main, ["combine", *copies, "--out", str(out)])
        assert result.exit_code == 0, result.output
        with open(est, newline="") as fh:
            orig = {(r["method"], r["intervention"]): r for r in csv.DictReader(fh)}
        with open(out, newline="") as fh:
            pooled = list(csv.DictReader(fh))
        assert list(pooled[0]) == ESTIMATE_FIELDS
        assert len(pooled) == len(orig)
        for r in pooled:
            o = orig[(r["method"], r["intervention"])]
            # identical imputations: between-variance is 0
            assert float(r["psi"]) == pytest.approx(float(o["psi"]), rel=1e-10)
            assert float(r["se"]) == pytest.approx(float(o["se"]), rel=1e-10)

    def test_single_file_rejected(self, runner, tmp_path):
        est = self._make_estimates(runner, tmp_path)
        result = runner.invoke(main, ["combine", str(est)])
        assert result.exit_code == 2

    def test_wrong_columns_rejected(self, runner, tmp_path):
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        p1.write_text("foo,bar\n1,2\n")
        p2.write_text("foo,bar\n1,2\n")
        result = runner.invoke(main, ["combine", str(p1), str(p2)])
        assert result.exit_code == 2


class TestBalance:
    def test_unadjusted_only(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        write_csv_data(data)
        cfg_path = tmp_path / "cfg.yaml"
        write_config(cfg_path, data, tmp_path / "out")
        result = runner.invoke(
            main, ["balance", "--config", str(cfg_path), "--no-adjusted"]
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "balance_pre.csv").exists()
        assert not (tmp_path / "out" / "balance_post.csv").exists()
        with open(tmp_path / "out" / "balance_pre.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["covariate"] for r in rows] == ["w1", "w2"]
