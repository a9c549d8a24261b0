import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from condcop.dependence import (
    FisherSeries,
    GroupedSample,
    PooledSample,
    WeightScheme,
    conditional_pseudo_observations,
    conditional_rho_hat,
    conditional_tau_hat,
    default_bandwidth,
    empirical_conditional_copula,
    fisher_transform,
    inverse_fisher,
    kernel_eval,
    product_nw_weights,
    scheme_weights,
    smoothing_weights,
    unconditional_estimates,
)
from condcop.errors import (
    DataError,
    DegenerateWeightsError,
    DomainError,
    InsufficientDataError,
)

finite = st.floats(-50, 50, allow_nan=False)


class TestFisher:
    def test_phi_round_trip_over_wide_range(self):
        w = np.linspace(-30, 30, 6001)
        phi = inverse_fisher(w)
        assert np.all(np.abs(phi) <= 1.0)
        inside = np.abs(phi) < 1.0
        np.testing.assert_allclose(inverse_fisher(fisher_transform(phi[inside])), phi[inside], atol=1e-9, rtol=0)

    def test_w_round_trip_where_well_conditioned(self):
        # |dw/dphi| = 1/(1 - phi^2) amplifies rounding of phi; beyond |w| ~ 8
        # the double-precision phi no longer pins w to 1e-9
        w = np.linspace(-8, 8, 1601)
        np.testing.assert_allclose(fisher_transform(inverse_fisher(w)), w, atol=1e-9, rtol=0)

    def test_monotone_and_saturating(self):
        w = np.linspace(-30, 30, 601)
        assert np.all(np.diff(inverse_fisher(w)) >= 0)
        assert inverse_fisher(30.0) == 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            fisher_transform(1.0)
        with pytest.raises(DomainError):
            fisher_transform(np.nan)
        assert fisher_transform(0.0) == 0.0


class TestKernels:
    @pytest.mark.parametrize("kind", ["triweight", "gaussian"])
    def test_integrate_to_one(self, kind):
        val, _ = integrate.quad(lambda t: kernel_eval(kind, t), -np.inf, np.inf)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_triweight_support(self):
        assert kernel_eval("triweight", 1.0) == 0.0
        assert kernel_eval("triweight", 0.0) == pytest.approx(35 / 32)


class TestWeights:
    @given(arrays(float, st.integers(3, 30), elements=st.floats(-10, 10)), st.floats(-10, 10), st.sampled_from(["gaussian", "triweight"]))
    def test_nw_weights_form_a_simplex_point(self, X, x, kernel):
        scheme = WeightScheme("nw", kernel, 50.0)
        w = smoothing_weights(scheme, X, x)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    @given(arrays(float, st.integers(3, 30), elements=st.floats(-10, 10)), st.floats(-10, 10), st.floats(-100, 100))
    def test_nw_translation_equivariance(self, X, x, c):
        scheme = WeightScheme("nw", "gaussian", 2.0)
        np.testing.assert_allclose(smoothing_weights(scheme, X + c, x + c), smoothing_weights(scheme, X, x), atol=1e-9)

    def test_local_linear_reproduces_lines(self, rng):
        X = rng.uniform(0, 1, 200)
        for kernel in ("gaussian", "triweight"):
            w = smoothing_weights(WeightScheme("ll", kernel, 0.3), X, 0.37)
            assert w.sum() == pytest.approx(1.0, abs=1e-12)
            assert w @ X == pytest.approx(0.37, abs=1e-12)

    def test_local_linear_falls_back_to_nw_at_a_single_level(self):
        X = np.array([0.0, 0.0, 0.0, 5.0])
        w_ll = smoothing_weights(WeightScheme("ll", "triweight", 1.0), X, 0.0)
        np.testing.assert_allclose(w_ll, [1 / 3, 1 / 3, 1 / 3, 0.0])

    def test_no_mass_raises(self):
        with pytest.raises(DegenerateWeightsError):
            smoothing_weights(WeightScheme("nw", "triweight", 0.1), np.array([0.0, 1.0]), 0.5)

    def test_product_kernel_factorises(self, rng):
        X = rng.uniform(size=(50, 2))
        w = product_nw_weights("gaussian", X, [0.5, 0.5], [0.2, 0.3])
        k = kernel_eval("gaussian", (X[:, 0] - 0.5) / 0.2) * kernel_eval("gaussian", (X[:, 1] - 0.5) / 0.3)
        np.testing.assert_allclose(w, k / k.sum())

    def test_dispatch_rejects_multivariate_local_linear(self, rng):
        with pytest.raises(DomainError):
            scheme_weights(WeightScheme("ll"), rng.uniform(size=(10, 2)), [0.5, 0.5])

    def test_default_bandwidth(self):
        X = np.arange(32.0)
        assert default_bandwidth(X)[0] == pytest.approx(1.06 * X.std(ddof=1) * 32 ** -0.2)

    def test_scheme_validation(self):
        assert WeightScheme("Local-Linear").kind == "ll"
        with pytest.raises(DomainError):
            WeightScheme("spline")
        with pytest.raises(DomainError):
            WeightScheme("nw", "gaussian", -1.0)


class TestConditionalEstimators:
    @given(st.integers(2, 8).flatmap(lambda n: arrays(float, (n, 2), elements=st.floats(-100, 100), unique=True)))
    def test_tau_hat_equals_sample_tau_under_equal_weights(self, y):
        if len(np.unique(y[:, 0])) < len(y) or len(np.unique(y[:, 1])) < len(y):
            return
        n = len(y)
        sample = PooledSample(y[:, 0], y[:, 1], np.zeros(n))
        s = sum(np.sign(y[i, 0] - y[j, 0]) * np.sign(y[i, 1] - y[j, 1]) for i in range(n) for j in range(i + 1, n))
        brute = s / (n * (n - 1) / 2)
        assert conditional_tau_hat(sample, WeightScheme("nw", "gaussian", 1.0), 0.0) == pytest.approx(brute, abs=1e-12)

    def test_tau_hat_degenerate_weights(self):
        sample = PooledSample([0.1, 0.5], [0.2, 0.4], [0.0, 10.0])
        with pytest.raises(DegenerateWeightsError):
            conditional_tau_hat(sample, WeightScheme("nw", "triweight", 1.0), 0.0)

    def test_rho_hat_formula(self, rng):
        X = np.repeat(np.arange(4.0), 25)
        y = rng.uniform(size=(100, 2))
        sample = PooledSample(y[:, 0], y[:, 1], X)
        u = conditional_pseudo_observations(sample)
        scheme = WeightScheme("nw", "gaussian", 0.8)
        w = scheme_weights(scheme, X, 1.5)
        expected = np.clip(12 * np.sum(w * (1 - u[:, 0]) * (1 - u[:, 1])) - 3, -1, 1)
        assert conditional_rho_hat(sample, scheme, 1.5) == pytest.approx(expected)

    def test_pseudo_observations_within_levels(self):
        X = np.array([0, 0, 0, 1, 1, 1.0])
        y1 = np.array([5, 1, 3, 0.2, 0.1, 0.3])
        u = conditional_pseudo_observations(PooledSample(y1, y1, X))
        np.testing.assert_allclose(u[:, 0], [0.75, 0.25, 0.5, 0.5, 0.25, 0.75])

    def test_pseudo_observations_without_replication(self, rng):
        X = rng.uniform(size=60)
        y = rng.standard_normal((60, 2))
        u = conditional_pseudo_observations(PooledSample(y[:, 0], y[:, 1], X))
        assert np.all((u > 0) & (u < 1))

    def test_empirical_conditional_copula_limits(self, rng):
        X = rng.uniform(size=40)
        y = rng.standard_normal((40, 2))
        sample = PooledSample(y[:, 0], y[:, 1], X)
        scheme = WeightScheme("nw", "gaussian", 0.2)
        assert empirical_conditional_copula(sample, scheme, 0.5, np.inf, np.inf) == pytest.approx(1.0)
        assert empirical_conditional_copula(sample, scheme, 0.5, -np.inf, 0.0) == 0.0


class TestSamples:
    def test_grouped_sample_merges_duplicate_levels(self, rng):
        g = GroupedSample([1.0, 2.0, 1.0], [rng.uniform(size=(3, 2)), rng.uniform(size=(4, 2)), rng.uniform(size=(5, 2))])
        assert g.k == 2
        np.testing.assert_array_equal(g.counts, [8, 4])
        ps = g.pooled()
        assert ps.n == 12 and ps.X.shape == (12, 1)

    def test_grouped_sample_needs_one_sample_per_level(self):
        with pytest.raises(DataError):
            GroupedSample([1.0, 2.0], [np.zeros((3, 2))])

    def test_pooled_sample_validation(self):
        with pytest.raises(DataError):
            PooledSample([1, 2], [1, 2, 3], [0, 0])
        with pytest.raises(InsufficientDataError):
            PooledSample([1], [1], [0])


class TestFisherSeries:
    def test_perfect_dependence_is_clipped(self):
        s = np.column_stack([np.arange(10.0), np.arange(10.0)])
        series = unconditional_estimates(GroupedSample([0.0], [s]), "tau")
        assert series.w[0] == pytest.approx(np.arctanh(1 - 1 / 20))

    def test_constant_margin_maps_to_zero(self):
        s = np.column_stack([np.ones(6), np.arange(6.0)])
        assert unconditional_estimates(GroupedSample([0.0], [s]), "rho").w[0] == 0.0

    def test_validation(self):
        with pytest.raises(InsufficientDataError):
            FisherSeries([0.0, 1.0], [0.1, 0.2], [1, 5])
        with pytest.raises(DomainError):
            FisherSeries([0.0], [np.inf], [5])
        with pytest.raises(DataError):
            FisherSeries([0.0, 1.0], [0.1], [5, 5])
        with pytest.raises(DomainError):
            FisherSeries([0.0], [0.1], [5], "beta")

    def test_sorted(self):
        s = FisherSeries([[2.0], [0.0], [1.0]], [0.2, 0.0, 0.1], [5, 6, 7]).sorted()
        np.testing.assert_array_equal(s.x[:, 0], [0, 1, 2])
        np.testing.assert_array_equal(s.n, [6, 7, 5])
