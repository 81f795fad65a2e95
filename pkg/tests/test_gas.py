"""Clearance distribution family: normalization, moments, sampling."""

import math

import numpy as np
import pytest

from trafficgas import gas, specfun

BETA_GRID = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]


class TestParameters:
    def test_decay_rate_reference_value(self):
        assert gas.make_gas(1.0).B == pytest.approx(2.3160602794142786, rel=1e-15)

    def test_decay_rate_zero_beta(self):
        # B = beta + (3 - exp(-sqrt(beta)))/2 -> 1 at beta = 0
        assert gas.make_gas(0.0).B == 1.0

    def test_invalid_beta(self):
        with pytest.raises(ValueError):
            gas.make_gas(-0.5)
        with pytest.raises(ValueError):
            gas.make_gas(math.nan)


class TestClearancePdf:
    @pytest.mark.parametrize("beta", BETA_GRID)
    def test_normalization(self, beta):
        params = gas.make_gas(beta)
        mass = specfun.integrate_semiinfinite(lambda r: gas.clearance_pdf(params, r))
        assert mass == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("beta", BETA_GRID[1:])
    def test_mean_matches_moment(self, beta):
        params = gas.make_gas(beta)
        mean = specfun.integrate_semiinfinite(lambda r: r * gas.clearance_pdf(params, r))
        assert mean == pytest.approx(gas.moment(params, 1), rel=1e-12)

    def test_vanishes_at_origin(self):
        params = gas.make_gas(1.0)
        assert gas.clearance_pdf(params, 0.0) == 0.0
        assert gas.clearance_pdf(params, -3.0) == 0.0

    def test_zero_beta_is_exponential(self):
        # away from the hard zero at the origin, beta = 0 is the unit
        # exponential law
        params = gas.make_gas(0.0)
        r = np.linspace(0.12, 12.0, 100)
        np.testing.assert_allclose(gas.clearance_pdf(params, r), np.exp(-r), rtol=1e-14)

    def test_scalar_and_array_agree(self):
        params = gas.make_gas(2.0)
        r = np.array([0.0, 0.3, 1.7, 9.0])
        arr = gas.clearance_pdf(params, r)
        for i, ri in enumerate(r):
            assert gas.clearance_pdf(params, float(ri)) == arr[i]


class TestNthSpacing:
    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 4.0])
    @pytest.mark.parametrize("n", [0, 1, 2, 5, 10])
    def test_normalization(self, beta, n):
        mass = specfun.integrate_semiinfinite(lambda r: gas.nth_pdf(n, beta, r))
        assert mass == pytest.approx(1.0, rel=1e-11)

    def test_order_zero_is_clearance_pdf(self):
        params = gas.make_gas(1.5)
        r = np.linspace(0.0, 20.0, 257)
        a = gas.nth_pdf(0, 1.5, r)
        b = gas.clearance_pdf(params, r)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("n", [0, 1, 2, 4])
    def test_zero_beta_gamma_family(self, n):
        # beta = 0 collapses to Gamma(n+1, B) with B = 1
        r = np.linspace(0.01, 25.0, 300)
        want = r**n * np.exp(-r) / math.factorial(n)
        np.testing.assert_allclose(gas.nth_pdf(n, 0.0, r), want, rtol=1e-12)

    def test_mean_ratio_near_one(self):
        # the closed-form mean misses n+1 by at most ~10 percent (worst
        # around beta = 0.25, n = 10) and can overshoot slightly at low n
        for beta in (0.25, 1.0, 4.0):
            B = gas._decay_rate(beta)
            for n in range(0, 12):
                _, ratio = gas._log_norm_and_mean_ratio(n, beta, B)
                assert 0.85 < ratio < 1.01

    def test_mean_ratio_against_quadrature(self):
        for n, beta in ((0, 1.0), (2, 0.5), (5, 2.0)):
            B = gas._decay_rate(beta)
            _, ratio = gas._log_norm_and_mean_ratio(n, beta, B)
            mean = specfun.integrate_semiinfinite(lambda r: r * gas.nth_pdf(n, beta, r))
            assert ratio == pytest.approx(mean / (n + 1.0), rel=1e-10)

    def test_cache_returns_same_object(self):
        assert gas.nth_density(3, 1.0) is gas.nth_density(3, 1.0)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            gas.nth_density(-1, 1.0)
        with pytest.raises(ValueError):
            gas.nth_density(1.5, 1.0)


class TestConvolutionOracle:
    def test_identity_at_order_zero(self):
        params = gas.make_gas(1.0)
        grid, vals = gas.convolution_oracle(0, 1.0, grid_step=0.01, grid_max=40.0)
        want = gas.clearance_pdf(params, grid)
        np.testing.assert_allclose(vals, want, atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_mass_conserved(self, n):
        grid, vals = gas.convolution_oracle(n, 1.0, grid_step=0.005, grid_max=60.0)
        assert np.trapezoid(vals, grid) == pytest.approx(1.0, abs=1e-6)

    def test_zero_beta_matches_gamma(self):
        # beta = 0 keeps a finite density at the origin, so the rectangle
        # rule carries an O(h) edge error; check the value and that it
        # shrinks first order in h
        errs = []
        for h in (0.01, 0.005):
            grid, vals = gas.convolution_oracle(1, 0.0, grid_step=h, grid_max=60.0)
            errs.append(float(np.max(np.abs(vals - grid * np.exp(-grid)))))
        assert errs[0] < 0.02
        assert errs[1] < 0.6 * errs[0]

    def test_mean_adds(self):
        params = gas.make_gas(2.0)
        grid, vals = gas.convolution_oracle(2, 2.0, grid_step=0.005, grid_max=40.0)
        mean = np.trapezoid(grid * vals, grid)
        assert mean == pytest.approx(3.0 * gas.moment(params, 1), rel=1e-5)

    def test_short_grid_raises(self):
        with pytest.raises(ValueError):
            gas.convolution_oracle(1, 0.1, grid_step=0.01, grid_max=5.0)


class TestMoments:
    def test_zero_beta_factorials(self):
        params = gas.make_gas(0.0)
        for k in range(1, 6):
            assert gas.moment(params, k) == pytest.approx(math.factorial(k), rel=1e-14)

    def test_reference_variance(self):
        params = gas.make_gas(1.0)
        var = gas.moment(params, 2) - gas.moment(params, 1) ** 2
        assert var == pytest.approx(0.2938657587002276, rel=1e-13)

    @pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 3.0])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_against_quadrature(self, beta, k):
        params = gas.make_gas(beta)
        want = specfun.integrate_semiinfinite(lambda r: r**k * gas.clearance_pdf(params, r))
        assert gas.moment(params, k) == pytest.approx(want, rel=1e-10)

    def test_invalid_order(self):
        params = gas.make_gas(1.0)
        with pytest.raises(ValueError):
            gas.moment(params, 0)
        with pytest.raises(ValueError):
            gas.moment(params, -1)


class TestSampler:
    def test_deterministic(self):
        params = gas.make_gas(1.0)
        a = gas.sample_spacings(params, 5000, seed=42)
        b = gas.sample_spacings(params, 5000, seed=42)
        assert np.array_equal(a.spacings, b.spacings)

    def test_seed_changes_stream(self):
        params = gas.make_gas(1.0)
        a = gas.sample_spacings(params, 5000, seed=42)
        b = gas.sample_spacings(params, 5000, seed=43)
        assert not np.array_equal(a.spacings, b.spacings)

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 2.0, 8.0])
    def test_sample_mean(self, beta):
        params = gas.make_gas(beta)
        seq = gas.sample_spacings(params, 200000, seed=3)
        mu = gas.moment(params, 1)
        sigma = math.sqrt(gas.moment(params, 2) - mu * mu)
        err = abs(seq.mean - mu)
        assert err < 4.0 * sigma / math.sqrt(seq.count)

    def test_all_positive(self):
        seq = gas.sample_spacings(gas.make_gas(4.0), 100000, seed=11)
        assert (seq.spacings > 0.0).all()

    def test_requested_count_exact(self):
        seq = gas.sample_spacings(gas.make_gas(0.7), 70001, seed=1)
        assert seq.count == 70001

    def test_kolmogorov_smirnov_beta2(self):
        params = gas.make_gas(2.0)
        seq = gas.sample_spacings(params, 1000000, seed=7)
        grid = np.linspace(0.0, 25.0, 4001)
        pdf = gas.clearance_pdf(params, grid)
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
        cdf /= cdf[-1]
        xs = np.sort(seq.spacings)
        model = np.interp(xs, grid, cdf)
        n = xs.size
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        d = max(np.max(np.abs(model - emp_hi)), np.max(np.abs(model - emp_lo)))
        assert d < 1.62762 / math.sqrt(n)  # 99% KS band

    @pytest.mark.parametrize("beta", [0.1, 1.0, 8.0])
    def test_efficiency_floor(self, beta):
        assert gas.sampler_efficiency(gas.make_gas(beta)) >= 0.20

    def test_zero_beta_efficiency_is_one(self):
        assert gas.sampler_efficiency(gas.make_gas(0.0)) == 1.0

    def test_unfolded_mean_is_one(self):
        seq = gas.sample_spacings(gas.make_gas(1.0), 50000, seed=2)
        unf = seq.unfolded()
        assert float(unf.spacings.mean()) == pytest.approx(1.0, abs=1e-12)
        assert unf.count == seq.count

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            gas.sample_spacings(gas.make_gas(1.0), 0, seed=1)
