import math

import numpy as np
import pytest

from ardflab.estimation import (
    ChannelPoint,
    ObservationKernel,
    conditional_mmse,
    linearity_test,
    lmmse,
    mmse,
    mmse_mc_kobs,
    mmse_quad,
    posterior_mean,
    posterior_mean_mc,
)
from ardflab.sources import SideInfoModel, gaussian


class TestChannelPoint:
    def test_effective_snr(self):
        assert ChannelPoint(0.5, 2).effective_gamma == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelPoint(-0.1)
        with pytest.raises(ValueError):
            ChannelPoint(0.5, 0)
        with pytest.raises(ValueError):
            ChannelPoint(0.5, 1.5)


class TestPosteriorMean:
    def test_gaussian_is_linear(self):
        src = gaussian(0.0, 2.0)
        gamma = 0.7
        ys = np.linspace(-4, 4, 9)
        coef = math.sqrt(gamma) * 2.0 / (1.0 + gamma * 2.0)
        got = posterior_mean(src, gamma, ys)
        assert np.allclose(got, coef * ys, atol=1e-12)

    def test_nonzero_mean_gaussian(self):
        src = gaussian(1.5, 0.5)
        gamma = 0.3
        y = 0.8
        slope = math.sqrt(gamma) * 0.5 / (1.0 + gamma * 0.5)
        expected = 1.5 + slope * (y - math.sqrt(gamma) * 1.5)
        assert abs(posterior_mean(src, gamma, y) - expected) <= 1e-12

    def test_low_snr_approaches_prior_mean(self, ref_mixture):
        got = posterior_mean(ref_mixture, 1e-10, 2.0)
        assert abs(got - ref_mixture.mean()) <= 1e-4

    def test_extreme_observation_no_nan(self, ref_mixture):
        for y in (1e3, -1e3, 1e6):
            got = posterior_mean(ref_mixture, 1.0, y)
            assert math.isfinite(got)

    def test_gamma_zero_rejected(self, ref_mixture):
        with pytest.raises(ValueError):
            posterior_mean(ref_mixture, 0.0, 1.0)

    def test_mixture_matches_binned_monte_carlo(self, ref_mixture):
        exact = posterior_mean(ref_mixture, 1.0, 3.0)
        mc, half, count = posterior_mean_mc(
            ref_mixture, 1.0, 3.0, window=0.01, n=5_000_000, seed=20240101
        )
        assert count > 1000
        assert abs(exact - mc) <= half


class TestMmse:
    def test_gaussian_closed_form(self):
        src = gaussian(0.0, 1.7)
        for gamma in (0.05, 0.3, 1.0, 3.0):
            expected = 1.7 / (1.0 + gamma * 1.7)
            assert abs(mmse(src, ChannelPoint(gamma)) - expected) <= 1e-8 * expected

    def test_zero_snr_gives_variance_exactly(self, ref_mixture, twopoint_unit):
        for src in (ref_mixture, twopoint_unit):
            assert mmse(src, ChannelPoint(0.0)) == src.variance()

    def test_descriptions_reduce_to_effective_snr(self, ref_mixture):
        a = mmse(ref_mixture, ChannelPoint(0.5, 2))
        b = mmse(ref_mixture, ChannelPoint(1.0, 1))
        assert a == b  # same code path by construction

    def test_two_point_closed_form(self, twopoint_unit):
        # E[X|y] = tanh(sqrt(g) y); mmse = 1 - E[tanh^2] by quadrature oracle
        g = 0.8
        kernel = ObservationKernel(twopoint_unit, g)
        ys = np.linspace(-12, 12, 7)
        assert np.allclose(
            kernel.posterior_mean(ys), np.tanh(math.sqrt(g) * ys), atol=1e-12
        )

    def test_strictly_decreasing_in_snr(self, ref_mixture, twopoint_unit):
        for src in (ref_mixture, twopoint_unit):
            grid = np.geomspace(1e-3, 4.0, 20)
            vals = [mmse(src, ChannelPoint(float(g))) for g in grid]
            drops = -np.diff(vals)
            assert np.all(drops > 1e-8)

    def test_matches_k_observation_monte_carlo(self, ref_mixture):
        for k in (2, 3, 4):
            analytic = mmse(ref_mixture, ChannelPoint(0.5, k))
            est, half = mmse_mc_kobs(ref_mixture, 0.5, k, n=120_000, seed=77)
            assert abs(est - analytic) <= half

    def test_mc_k_limit(self, ref_mixture):
        with pytest.raises(ValueError):
            mmse_mc_kobs(ref_mixture, 0.5, 9, n=1000)

    def test_root_solving_the_mmse(self, ref_mixture):
        from ardflab.numerics import solve_monotone

        target = 0.5 * ref_mixture.variance()
        gamma = solve_monotone(
            lambda g: mmse(ref_mixture, ChannelPoint(g)), target, (0.0, 10.0),
            tol=1e-8,
        )
        assert abs(mmse(ref_mixture, ChannelPoint(gamma)) - target) <= 1e-6


class TestLmmse:
    def test_unit_variance_values(self, gauss_unit):
        assert lmmse(gauss_unit, ChannelPoint(1.0)) == 0.5
        assert abs(lmmse(gauss_unit, ChannelPoint(0.01, 10)) - 1.0 / 1.1) <= 1e-15

    def test_dominates_mmse(self, ref_mixture, twopoint_unit):
        for src in (ref_mixture, twopoint_unit):
            for g in np.geomspace(1e-3, 4.0, 20):
                point = ChannelPoint(float(g))
                assert lmmse(src, point) >= mmse(src, point) - 1e-10

    def test_low_snr_linearity(self, gauss_unit, ref_mixture):
        # conditional mean converges to the linear estimator at rate gamma^2
        for src in (gauss_unit, ref_mixture):
            ratios = []
            for g in np.geomspace(1e-4, 1e-2, 6):
                m, _, _ = mmse_quad(src, float(g), tol=1e-13)
                ratios.append(abs(m - lmmse(src, ChannelPoint(float(g)))) / g**2)
            assert max(ratios) < 1.0


class TestConditionalMmse:
    def test_jointly_gaussian_slices(self):
        model = SideInfoModel.jointly_gaussian(0.8, 1.0, slices=64)
        report = conditional_mmse(model, ChannelPoint(0.0))
        assert abs(report.mmse - 0.36) <= 1e-12
        assert abs(report.gap) <= 1e-10

    def test_indicator_gap_matches_enumeration(self, ref_spec, ref_mixture):
        model = SideInfoModel.mixture_indicator(ref_mixture)
        report = conditional_mmse(model, ChannelPoint(0.25))
        # two-point variance formula oracle
        oracle = ref_spec.p0 * ref_spec.p1 * (ref_spec.var0 - ref_spec.var1) ** 2
        assert abs(oracle - 16.0 / 9.0) <= 1e-12
        assert abs(report.gap - oracle) <= 1e-8

    def test_zero_snr_returns_prior_conditional_variance(self, ref_mixture):
        model = SideInfoModel.mixture_indicator(ref_mixture)
        report = conditional_mmse(model, ChannelPoint(0.0))
        assert report.mmse == model.prior_conditional_variance()

    def test_report_ordering_invariant(self, ref_mixture):
        model = SideInfoModel.mixture_indicator(ref_mixture)
        for g in (0.0, 0.3, 2.0):
            rep = conditional_mmse(model, ChannelPoint(g))
            assert 0.0 <= rep.mmse <= rep.lmmse <= ref_mixture.variance() + 1e-12

    def test_jensen_inequality_randomized(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = rng.integers(2, 6)
            q = rng.dirichlet(np.ones(n))
            conds = [gaussian(rng.normal(), rng.uniform(0.2, 3.0)) for _ in range(n)]
            model = SideInfoModel(range(n), q, conds)
            rep = conditional_mmse(model, ChannelPoint(0.0))
            assert rep.jensen_lhs >= rep.jensen_rhs - 1e-12


class TestLinearityTest:
    def test_jointly_gaussian_is_linear(self):
        ok, rep = linearity_test(SideInfoModel.jointly_gaussian(0.8))
        assert ok
        assert abs(rep.gap) <= 1e-10

    def test_indicator_mixture_is_not_linear(self, ref_mixture):
        ok, rep = linearity_test(SideInfoModel.mixture_indicator(ref_mixture))
        assert not ok
        assert rep.gap > 1.0

    def test_equal_variance_unequal_means_is_linear(self):
        model = SideInfoModel(
            [0, 1], [0.5, 0.5], [gaussian(-1.0, 0.7), gaussian(2.0, 0.7)]
        )
        ok, rep = linearity_test(model)
        assert ok
        assert abs(rep.gap) <= 1e-12
