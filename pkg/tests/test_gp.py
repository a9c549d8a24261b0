import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import gp_loglik_quadrature

from condcop.dependence import FisherSeries
from condcop.errors import ConfigError, DomainError, NumericError
from condcop.gp import (
    GPModelConfig,
    MHConfig,
    basis_matrix,
    fit_gp,
    integrated_loglik,
    predict_curve,
    sample_hyper,
    se_kernel,
)

FAST = MHConfig(n_iter=1200, burn_in=200, n_keep=200)


def _toy(rng, k=12, p=1):
    x = rng.uniform(0, 1, (k, p))
    w = 0.8 * np.sin(3 * x[:, 0]) + 0.1 * rng.standard_normal(k)
    return FisherSeries(x, w, rng.integers(20, 60, k))


class TestKernelAndBasis:
    def test_kernel_values(self):
        assert se_kernel(0.0, 2.0, 4.0) == pytest.approx(np.exp(-0.5))
        K = se_kernel(np.array([[0.0, 0.0], [1.0, 2.0]]), np.array([[0.0, 0.0]]), [1.0, 4.0])
        np.testing.assert_allclose(K[:, 0], [1.0, np.exp(-1.0)])

    def test_kernel_rejects_nonpositive_scale(self):
        with pytest.raises(DomainError):
            se_kernel(0.0, 1.0, 0.0)

    def test_basis_shapes(self):
        x = np.arange(5.0)
        assert basis_matrix(x, "zero").shape == (5, 0)
        np.testing.assert_array_equal(basis_matrix(x, "linear")[:, 1], x)
        assert basis_matrix(np.ones((5, 2)), "quadratic").shape == (5, 5)


class TestIntegratedLikelihood:
    @pytest.mark.parametrize("xi,lam", [(1.0, 1.0), (0.3, 5.0), (4.0, 0.2)])
    def test_matches_quadrature_without_trend(self, xi, lam):
        x, w, n = [0.0, 0.7, 2.0, 2.5], [0.3, -0.2, 0.6, 0.1], [12, 8, 30, 5]
        cfg = GPModelConfig(basis="zero", alpha=2.5, r=1.5)
        got = integrated_loglik(xi, lam, FisherSeries(x, w, n), cfg)
        ref = gp_loglik_quadrature(xi, lam, x, w, n, False, 2.5, 1.5)
        assert got == pytest.approx(ref, rel=1e-6)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_permutation_invariance(self, s):
        rng = np.random.default_rng(s)
        series = _toy(rng, k=7)
        perm = rng.permutation(7)
        shuffled = FisherSeries(series.x[perm], series.w[perm], series.n[perm])
        a = integrated_loglik(0.5, 1.3, series)
        assert integrated_loglik(0.5, 1.3, shuffled) == pytest.approx(a, rel=1e-10, abs=1e-10)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000), st.floats(-20, 20))
    def test_intercept_shift_invariance(self, s, c):
        series = _toy(np.random.default_rng(s), k=8)
        shifted = FisherSeries(series.x, series.w + c, series.n)
        for basis in ("linear", "quadratic"):
            cfg = GPModelConfig(basis=basis)
            a = integrated_loglik(0.2, 0.7, series, cfg)
            assert integrated_loglik(0.2, 0.7, shifted, cfg) == pytest.approx(a, rel=1e-8, abs=1e-8)

    def test_needs_more_levels_than_basis_columns(self):
        with pytest.raises(DomainError):
            integrated_loglik(1.0, 1.0, FisherSeries([0.0, 1.0], [0.1, 0.2], [5, 5]))


class TestConfig:
    def test_heteroscedastic_is_rejected(self):
        with pytest.raises(ConfigError, match="not implemented"):
            GPModelConfig(heteroscedastic=True)

    @pytest.mark.parametrize(
        "kwargs",
        [{"basis": "cubic"}, {"alpha": 0.0}, {"xi_bounds": (2.0, 1.0)}, {"level": 1.0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            GPModelConfig(**kwargs)

    def test_chain_lengths(self):
        with pytest.raises(ConfigError):
            MHConfig(n_iter=100, burn_in=100)
        with pytest.raises(ConfigError):
            MHConfig(n_iter=200, burn_in=100, n_keep=101)


class TestSampling:
    def test_draws_stay_inside_prior_support(self, rng):
        cfg = GPModelConfig(mh=FAST, xi_bounds=(0.01, 10.0), lambda_bounds=(0.1, 10.0))
        d = sample_hyper(_toy(rng), cfg, seed=1)
        assert d.xi.shape == (200, 1) and d.lam.shape == (200,)
        assert np.all((d.xi >= 0.01) & (d.xi <= 10.0))
        assert np.all((d.lam >= 0.1) & (d.lam <= 10.0))
        assert 0.01 <= d.acceptance_rate <= 1.0

    def test_low_acceptance_is_reported(self, rng):
        lo = 1e-3
        cfg = GPModelConfig(mh=FAST, xi_bounds=(lo, lo * (1 + 1e-9)), lambda_bounds=(lo, lo * (1 + 1e-9)))
        with pytest.raises(NumericError, match="acceptance"):
            sample_hyper(_toy(rng), cfg, seed=2)

    def test_seed_determinism(self, rng):
        series = _toy(rng)
        cfg = GPModelConfig(mh=FAST)
        grid = np.linspace(0, 1, 9)
        a = fit_gp(series, grid, cfg, seed=5)
        b = fit_gp(series, grid, cfg, seed=5)
        c = fit_gp(series, grid, cfg, seed=6)
        np.testing.assert_array_equal(a.fisher_mean, b.fisher_mean)
        np.testing.assert_array_equal(a.lower, b.lower)
        assert not np.array_equal(a.fisher_mean, c.fisher_mean)
        ss = np.random.SeedSequence(5)
        np.testing.assert_array_equal(fit_gp(series, grid, cfg, ss).mean, a.mean)

    def test_pipeline_ignores_level_order(self, rng):
        series = _toy(rng)
        perm = rng.permutation(series.k)
        shuffled = FisherSeries(series.x[perm], series.w[perm], series.n[perm])
        grid = np.linspace(0, 1, 5)
        cfg = GPModelConfig(mh=FAST)
        a = fit_gp(series, grid, cfg, seed=3)
        b = fit_gp(shuffled, grid, cfg, seed=3)
        np.testing.assert_allclose(a.fisher_mean, b.fisher_mean, atol=1e-10)


class TestPrediction:
    def test_bounds_bracket_mean_and_track_signal(self, rng):
        x = np.linspace(0, 1, 15)
        truth = 0.6 * x - 0.2
        series = FisherSeries(x, np.arctanh(truth) + 0.02 * rng.standard_normal(15), np.full(15, 400))
        curve = fit_gp(series, x, GPModelConfig(mh=FAST), seed=0)
        assert np.all(curve.lower <= curve.mean) and np.all(curve.mean <= curve.upper)
        assert np.all(np.abs(curve.mean) < 1)
        assert np.max(np.abs(curve.mean - truth)) < 0.05

    def test_flat_series(self):
        series = FisherSeries(np.linspace(0, 1, 6), np.zeros(6), np.full(6, 50))
        curve = fit_gp(series, [0.5], GPModelConfig(mh=FAST), seed=0)
        assert abs(curve.mean[0]) < 0.2

    def test_two_covariates(self, rng):
        series = _toy(rng, k=16, p=2)
        curve = fit_gp(series, rng.uniform(size=(4, 2)), GPModelConfig(mh=FAST), seed=0)
        assert curve.grid.shape == (4, 2) and np.all(np.isfinite(curve.mean))

    def test_grid_dimension_checked(self, rng):
        series = _toy(rng)
        cfg = GPModelConfig(mh=FAST)
        d = sample_hyper(series, cfg, seed=0)
        with pytest.raises(DomainError):
            predict_curve(series, d, np.zeros((3, 2)), cfg)
