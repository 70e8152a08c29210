import numpy as np
import pytest
from scipy import integrate

from retrospect.simulation import (
    SimConfig,
    gen_data,
    run_study,
    run_sweep,
    true_rie,
)


class TestGenData:
    def test_treated_share_matches_integration_oracle(self):
        # oracle: E[Pr(A=1 | W1)] under W1 ~ N(0,1), quadrature over the
        # assignment link (sample mean of W1 enters; at n=10000 it is ~0)
        cfg = SimConfig(n=10000, seed=5, n_runs=1)
        ds, y0, y1 = gen_data(cfg, 0)
        a = ds.treatments[:, 0]

        def integrand(w):
            p = 1.0 / (1.0 + np.exp(-(-0.5 + 0.75 * w - 0.5 * w**2)))
            return p * np.exp(-w * w / 2.0) / np.sqrt(2.0 * np.pi)

        target, _ = integrate.quad(integrand, -10, 10)
        assert a.mean() == pytest.approx(target, abs=0.015)

    def test_outcome_equations_reconstruct(self):
        cfg = SimConfig(n=20000, seed=6, n_runs=1)
        ds, y0, y1 = gen_data(cfg, 0)
        w1 = ds.covariates[:, 0]
        a = ds.treatments[:, 0]
        assert np.array_equal(ds.outcome, a * y1 + (1.0 - a) * y0)
        wmin = w1.min()
        e0 = y0 - (w1 + 0.5 * (w1 - wmin) ** 2)
        e1 = y1 - (w1 + 0.75 * (w1 - wmin) ** 2 + 0.75 * (w1 - wmin) ** 3)
        assert abs(e0.mean()) < 0.15 and abs(e0.std() - 5.0) < 0.15
        assert abs(e1.mean()) < 0.3 and abs(e1.std() - 10.0) < 0.3

    def test_noise_columns_appended(self):
        cfg = SimConfig(n=50, noise_dims=3, seed=0)
        ds, _, _ = gen_data(cfg, 0)
        assert ds.covariate_names == ("w1", "noise1", "noise2", "noise3")
        assert ds.covariates.shape == (50, 4)

    def test_run_streams_independent(self):
        cfg = SimConfig(n=50, seed=1)
        d0, _, _ = gen_data(cfg, 0)
        d0_again, _, _ = gen_data(cfg, 0)
        d1, _, _ = gen_data(cfg, 1)
        assert np.array_equal(d0.outcome, d0_again.outcome)
        assert not np.array_equal(d0.outcome, d1.outcome)

    def test_confounder_identical_across_noise_levels(self):
        # adding noise covariates must not perturb the confounder or
        # treatment draw (separate hierarchical streams)
        a = gen_data(SimConfig(n=60, noise_dims=0, seed=2), 3)[0]
        b = gen_data(SimConfig(n=60, noise_dims=5, seed=2), 3)[0]
        assert np.array_equal(a.covariates[:, 0], b.covariates[:, 0])
        assert np.array_equal(a.treatments, b.treatments)


class TestTrueRie:
    def test_hand_value(self):
        a = [1.0, 0.0, 1.0]
        y0 = [1.0, 2.0, 3.0]
        y1 = [2.0, 0.0, 5.0]
        assert true_rie(a, y0, y1) == pytest.approx(-1.0)

    def test_untreated_contribute_zero(self):
        assert true_rie([0.0, 0.0], [5.0, 6.0], [9.0, 9.0]) == 0.0


class TestSimConfig:
    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n=5)

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="bogus"):
            SimConfig(methods=("ols", "bogus"))

    def test_zero_runs_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n_runs=0)


class TestRunStudy:
    def test_linear_dgp_ols_exact(self):
        # noise-free linear outcomes: OLS recovers the per-run truth exactly
        cfg = SimConfig(n=100, n_runs=10, seed=3, methods=("ols",), dgp="linear")
        res = run_study(cfg)
        m = res.metrics["ols"]
        assert abs(m.bias) < 1e-8
        assert m.rmse < 1e-8
        assert m.n_failed == 0

    def test_rmse_identity_and_standardization(self):
        cfg = SimConfig(
            n=120, n_runs=8, seed=4, methods=("ols", "naive_ipw"), fast=True
        )
        res = run_study(cfg)
        assert res.sd_true_rie > 0
        for m in res.metrics.values():
            assert m.rmse**2 == pytest.approx(m.bias**2 + m.se**2, rel=1e-10)

    def test_reproducible_and_schedule_independent(self):
        cfg = SimConfig(n=60, n_runs=4, seed=7, methods=("ols", "matching"))
        r1 = run_study(cfg)
        r2 = run_study(cfg)
        assert np.array_equal(r1.estimates["ols"], r2.estimates["ols"])
        assert np.array_equal(r1.truths, r2.truths)
        r3 = run_study(SimConfig(n=60, n_runs=4, seed=7, methods=("ols", "matching"), n_jobs=2))
        assert np.array_equal(r1.estimates["matching"], r3.estimates["matching"])

    def test_method_subset_leaves_data_unchanged(self):
        # estimates for a method do not depend on which others are run
        r_all = run_study(SimConfig(n=60, n_runs=3, seed=8, methods=("ols", "naive_ipw")))
        r_ols = run_study(SimConfig(n=60, n_runs=3, seed=8, methods=("ols",)))
        assert np.array_equal(r_all.estimates["ols"], r_ols.estimates["ols"])

    def test_ensemble_fast_smoke(self):
        cfg = SimConfig(n=80, n_runs=2, seed=9, methods=("ensemble_ipw",), fast=True)
        res = run_study(cfg)
        assert res.metrics["ensemble_ipw"].n_failed == 0
        assert np.all(np.isfinite(res.estimates["ensemble_ipw"]))


class TestRunSweep:
    def test_levels_keyed_and_configured(self):
        cfg = SimConfig(n=60, n_runs=2, seed=10, methods=("ols",))
        out = run_sweep(cfg, noise_levels=(0, 2))
        assert set(out) == {0, 2}
        assert out[2].config.noise_dims == 2
        assert out[0].config.noise_dims == 0
