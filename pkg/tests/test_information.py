import math

import numpy as np
import pytest

import ardflab.information as information
from ardflab.estimation import ChannelPoint, mmse_quad
from ardflab.information import (
    MiInconsistencyError,
    conditional_mutual_info,
    mmse_series,
    mmse_series_variant,
    mutual_info,
    mutual_info_mc,
    mutual_info_series,
    series_coefficients,
    verify_immse,
)
from ardflab.numerics import LOG2E, limit_at_zero
from ardflab.sources import SideInfoModel

HALF_BIT = 0.5


class TestMutualInfo:
    def test_gaussian_half_bit(self, gauss_unit):
        est = mutual_info(gauss_unit, ChannelPoint(1.0), tol=1e-10)
        assert abs(est.bits - HALF_BIT) <= 1e-7

    def test_zero_snr_is_zero(self, ref_mixture):
        assert mutual_info(ref_mixture, ChannelPoint(0.0)).bits == 0.0

    def test_oversampling_identity(self, gauss_unit):
        half = mutual_info(gauss_unit, ChannelPoint(0.5, 2), tol=1e-10)
        one = mutual_info(gauss_unit, ChannelPoint(1.0, 1), tol=1e-10)
        assert half.bits == one.bits  # reduced to the same effective SNR
        assert abs(half.bits - HALF_BIT) <= 1e-7

    def test_routes_agree_on_mixture(self, ref_mixture):
        a = mutual_info(ref_mixture, ChannelPoint(0.25), tol=1e-10)
        b = mutual_info(ref_mixture, ChannelPoint(0.25), method="immse_integral",
                        tol=1e-8)
        assert abs(a.bits - b.bits) <= 1e-5

    def test_cross_check_method(self, ref_mixture):
        est = mutual_info(ref_mixture, ChannelPoint(0.25), method="cross_check",
                          tol=1e-9)
        assert est.method == "cross_check"

    def test_cross_check_flags_disagreement(self, gauss_unit, monkeypatch):
        from ardflab.information import MiEstimate

        def broken(source, g, tol):
            return MiEstimate(g, 123.0, "immse_integral", 1e-12)

        monkeypatch.setattr(information, "_immse_integral", broken)
        with pytest.raises(MiInconsistencyError):
            mutual_info(gauss_unit, ChannelPoint(0.5), method="cross_check")

    def test_unknown_method(self, gauss_unit):
        with pytest.raises(ValueError):
            mutual_info(gauss_unit, ChannelPoint(0.5), method="guess")

    def test_monotone_in_snr_and_descriptions(self, ref_mixture):
        grid = np.geomspace(0.01, 2.0, 12)
        bits = [mutual_info(ref_mixture, ChannelPoint(float(g))).bits for g in grid]
        assert np.all(np.diff(bits) > 0)
        by_k = [mutual_info(ref_mixture, ChannelPoint(0.3, k)).bits for k in (1, 2, 3)]
        assert np.all(np.diff(by_k) > 0)

    def test_matches_direct_monte_carlo(self, gauss_unit):
        mc = mutual_info_mc(gauss_unit, 0.5, 2, n=30_000, seed=5)
        quad = mutual_info(gauss_unit, ChannelPoint(0.5, 2), tol=1e-10)
        assert abs(mc.bits - quad.bits) <= mc.error_bound


class TestSeries:
    def test_gaussian_coefficients(self, gauss_unit):
        c = series_coefficients(gauss_unit)
        assert (c.mu3, c.mu4) == (0.0, 3.0)
        assert c.c1 == 0.5 * LOG2E
        assert c.c2 == -0.25 * LOG2E
        assert c.c3 == LOG2E / 6.0
        assert abs(c.c4 + 0.125 * LOG2E) <= 1e-15

    def test_two_point_fourth_coefficient(self, twopoint_unit):
        c = series_coefficients(twopoint_unit)
        assert (c.mu3, c.mu4) == (0.0, 1.0)
        assert abs(c.c4 + (10.0 / 48.0) * LOG2E) <= 1e-15

    def test_gaussian_series_matches_log(self, gauss_unit):
        est = mutual_info_series(gauss_unit, 0.01)
        assert abs(est.bits - 0.5 * math.log2(1.01)) <= 1e-9

    def test_zero_snr(self, ref_mixture):
        assert mutual_info_series(ref_mixture, 0.0).bits == 0.0

    def test_validity_guard(self, gauss_unit):
        with pytest.raises(ValueError, match="0.1"):
            mutual_info_series(gauss_unit, 0.2)

    def test_agrees_with_entropy_difference(self, gauss_unit, twopoint_unit):
        budgets = {id(gauss_unit): 1e-8, id(twopoint_unit): 1e-6}
        for src in (gauss_unit, twopoint_unit):
            worst = 0.0
            for g in (0.002, 0.005, 0.01):
                direct = mutual_info(src, ChannelPoint(g), tol=1e-13).bits
                series = mutual_info_series(src, g).bits
                worst = max(worst, abs(direct - series))
            assert worst <= budgets[id(src)]

    def test_fifth_order_consistency_constant(self, gauss_unit, twopoint_unit,
                                              ref_mixture):
        fitted = []
        for src in (gauss_unit, twopoint_unit, ref_mixture):
            for g in (0.003, 0.005, 0.01):
                u = g * src.variance()
                direct = mutual_info(src, ChannelPoint(g), tol=1e-13).bits
                series = mutual_info_series(src, g).bits
                fitted.append(abs(direct - series) / u**5)
        assert max(fitted) < 20.0


class TestMmseSeries:
    def test_gaussian_truncation_identity(self, gauss_unit):
        # series equals (1 - g^4) / (1 + g): difference to 1/(1+g) is exactly g^4/(1+g)
        g = 0.05
        val = mmse_series(gauss_unit, g)
        assert abs(val - (1.0 - g + g**2 - g**3)) <= 1e-15
        assert abs(1.0 / (1.0 + g) - val - g**4 / (1.0 + g)) <= 1e-15

    def test_zero_snr_gives_variance(self, ref_mixture):
        assert mmse_series(ref_mixture, 0.0) == ref_mixture.variance()

    def test_matches_quadrature(self, gauss_unit, twopoint_unit, ref_mixture):
        for src in (gauss_unit, twopoint_unit, ref_mixture):
            quad, _, _ = mmse_quad(src, 0.02, tol=1e-12)
            assert abs(mmse_series(src, 0.02) - quad) <= 1e-4 * quad

    def test_variant_is_only_first_order(self, ref_mixture):
        g = 0.02
        quad, _, _ = mmse_quad(ref_mixture, g, tol=1e-12)
        assert abs(mmse_series_variant(ref_mixture, g) - quad) > \
            abs(mmse_series(ref_mixture, g) - quad)
        assert mmse_series_variant(ref_mixture, 0.0) == ref_mixture.variance()


class TestConditionalMutualInfo:
    def test_zero_snr(self, ref_mixture):
        model = SideInfoModel.mixture_indicator(ref_mixture)
        assert conditional_mutual_info(model, ChannelPoint(0.0)).bits == 0.0

    def test_indicator_low_rate_limit(self, ref_mixture):
        model = SideInfoModel.mixture_indicator(ref_mixture)
        est = limit_at_zero(
            lambda g: conditional_mutual_info(model, ChannelPoint(g, 3),
                                              tol=1e-12).bits / g
        )
        expected = 3.0 * 0.5 * LOG2E  # slice variances average to the full variance
        assert abs(est.value - expected) <= 0.02 * expected


class TestVerifyImmse:
    def test_gaussian(self, gauss_unit):
        chk = verify_immse(gauss_unit, np.array([0.1, 0.5, 1.0, 2.0]))
        assert chk.max_relative_deviation < 1e-5

    def test_mixture(self, ref_mixture):
        chk = verify_immse(ref_mixture, np.array([0.1, 0.5, 1.0, 2.0]))
        assert chk.max_relative_deviation < 1e-3

    def test_two_point(self, twopoint_unit):
        chk = verify_immse(twopoint_unit, np.array([1.0]))
        assert chk.max_relative_deviation < 1e-3

    def test_grid_domain(self, gauss_unit):
        with pytest.raises(ValueError):
            verify_immse(gauss_unit, np.array([0.5, 6.0]))

    def test_mixture_derivative_at_half(self, ref_mixture):
        from ardflab.numerics import derivative

        est = derivative(
            lambda g: mutual_info(ref_mixture, ChannelPoint(g), tol=1e-12).bits,
            0.5, steps=[0.25, 0.125, 0.0625, 0.03125],
        )
        rhs = 0.5 * LOG2E * mmse_quad(ref_mixture, 0.5, tol=1e-12)[0]
        assert abs(est.value - rhs) <= 1e-4 * rhs
