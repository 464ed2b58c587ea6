"""End-to-end acceptance checks.  One test per criterion; each prints a
pass/fail line with its runtime (run with -s to stream them).

Run: pytest tests/test_acceptance.py -v -s
"""

import math
import time
from contextlib import contextmanager

import numpy as np

from ardflab.ardf import ardf_at, ardf_slope_at_dmax, ba_curve, interp_rate_at, \
    multiplicative_loss_sweep
from ardflab.estimation import ChannelPoint, conditional_mmse, linearity_test, \
    mmse, mmse_quad
from ardflab.information import conditional_mutual_info, mmse_series, \
    mutual_info, mutual_info_mc, mutual_info_series, verify_immse
from ardflab.numerics import LOG2E, limit_at_zero
from ardflab.refinement import build_schedule, compare, verify_lowrate_additivity
from ardflab.sources import SideInfoModel, discretize, gaussian

SLOPE_UNIT = -LOG2E / 2.0


@contextmanager
def criterion(number: int, budget_s: float, description: str):
    start = time.time()
    failed = None
    try:
        yield
    except BaseException as exc:
        failed = exc
        raise
    finally:
        elapsed = time.time() - start
        verdict = "PASS" if failed is None and elapsed <= budget_s else "FAIL"
        print(f"criterion {number:2d} {verdict} ({elapsed:6.1f}s / {budget_s:.0f}s)"
              f" {description}", flush=True)
        if failed is None:
            assert elapsed <= budget_s, f"criterion {number} exceeded {budget_s}s"


def family(gauss_unit, uniform_unit, twopoint_unit, ref_mixture):
    return [("gaussian", gauss_unit), ("uniform", uniform_unit),
            ("two-point", twopoint_unit), ("mixture", ref_mixture)]


def test_criterion_1_gaussian_closed_forms(gauss_unit):
    with criterion(1, 5.0, "Gaussian mmse and mutual information closed forms"):
        for g in np.geomspace(0.01, 4.0, 20):
            point = ChannelPoint(float(g))
            m = mmse(gauss_unit, point)
            expected_m = 1.0 / (1.0 + g)
            assert abs(m - expected_m) <= 1e-6 * expected_m
            bits = mutual_info(gauss_unit, point, tol=1e-10).bits
            expected_i = 0.5 * math.log2(1.0 + g)
            assert abs(bits - expected_i) <= 1e-6 * expected_i


def test_criterion_2_immse_relation(gauss_unit, uniform_unit, twopoint_unit,
                                    ref_mixture):
    with criterion(2, 60.0, "SNR derivative of I equals (log2e/2) mmse"):
        grid = np.geomspace(0.05, 4.0, 10)
        for name, src in family(gauss_unit, uniform_unit, twopoint_unit,
                                ref_mixture):
            chk = verify_immse(src, grid)
            assert chk.max_relative_deviation <= 1e-3, name


def test_criterion_3_slope_universality(gauss_unit, uniform_unit, twopoint_unit,
                                        ref_mixture):
    with criterion(3, 60.0, "zero-rate slope is the Gaussian slope for all"
                            " sources"):
        for name, src in family(gauss_unit, uniform_unit, twopoint_unit,
                                ref_mixture):
            est = ardf_slope_at_dmax(src)
            assert abs(est.value - SLOPE_UNIT) <= 0.02 * abs(SLOPE_UNIT), name


def test_criterion_4_oversampling_monte_carlo(gauss_unit, ref_mixture):
    with criterion(4, 90.0, "k-dimensional MC mutual information matches the"
                            " effective-SNR reduction"):
        for src in (gauss_unit, ref_mixture):
            for k in (2, 3):
                mc = mutual_info_mc(src, 0.5, k, n=100_000, seed=20240101)
                quad = mutual_info(src, ChannelPoint(0.5, k), tol=1e-10)
                assert abs(mc.bits - quad.bits) <= mc.error_bound


def test_criterion_5_kfold_additivity(gauss_unit, ref_mixture):
    with criterion(5, 60.0, "low-rate information and inverse-distortion"
                            " limits scale with k"):
        for src in (gauss_unit, ref_mixture):
            for k in (1, 2, 3, 4):
                rep = verify_lowrate_additivity(src, k)
                assert abs(rep.mi_normalized - k) <= 0.02 * k
                assert abs(rep.inv_mmse_limit.value - k) <= 0.02 * k


def test_criterion_6_conditional_mi_limit(ref_mixture):
    with criterion(6, 30.0, "conditional information limit equals"
                            " (log2e/2) var(X|Z)"):
        joint = SideInfoModel.jointly_gaussian(0.8, 1.0, slices=64)
        est = limit_at_zero(
            lambda g: conditional_mutual_info(joint, ChannelPoint(g),
                                              tol=1e-12).bits / g
        )
        expected = 0.2596851073600134  # (log2e/2) * 0.36
        assert abs(est.value - expected) <= 0.02 * expected

        indicator = SideInfoModel.mixture_indicator(ref_mixture)
        est2 = limit_at_zero(
            lambda g: conditional_mutual_info(indicator, ChannelPoint(g),
                                              tol=1e-12).bits / g
        )
        expected2 = 0.7213475204444817  # slice variances average to 1
        assert abs(est2.value - expected2) <= 0.02 * expected2


def test_criterion_7_linearity_condition(ref_spec, ref_mixture):
    with criterion(7, 5.0, "linear-estimator condition via the Jensen gap"):
        ok, rep = linearity_test(SideInfoModel.jointly_gaussian(0.8))
        assert ok and abs(rep.gap) <= 1e-10

        model = SideInfoModel.mixture_indicator(ref_mixture)
        report = conditional_mmse(model, ChannelPoint(0.25))
        oracle = ref_spec.p0 * ref_spec.p1 * (ref_spec.var0 - ref_spec.var1) ** 2
        assert abs(report.gap - oracle) <= 1e-10
        assert abs(report.gap - 16.0 / 9.0) <= 1e-6
        ok2, _ = linearity_test(model)
        assert not ok2

        two_mean = SideInfoModel(
            [0, 1], [0.5, 0.5], [gaussian(-1.0, 0.7), gaussian(2.0, 0.7)]
        )
        ok3, rep3 = linearity_test(two_mean)
        assert ok3 and abs(rep3.gap) <= 1e-12


def test_criterion_8_refinement_comparison():
    with criterion(8, 1.0, "two- and ten-stage refinement totals against the"
                           " conditional baseline"):
        two = compare(build_schedule(1.0, 0.1, 2, 2))
        ten = compare(build_schedule(1.0, 0.1, 2, 10))
        assert abs(two.total_rate - 2.11474641721359) <= 1e-5
        assert abs(ten.total_rate - 1.7563663469238864) <= 1e-5
        assert abs(two.conditional_rates[-1] - 1.660964047443681) <= 1e-5
        assert ten.final_loss < two.final_loss


def test_criterion_9_multiplicative_loss_monotone():
    with criterion(9, 120.0, "rate-loss ratio grows with the bursty variance"):
        rows, monotone = multiplicative_loss_sweep(
            [2.0, 5.0, 10.0, 20.0], eps_grid=(0.02,)
        )
        ratios = [r.ratio for r in rows]
        assert np.all(np.diff(ratios) > 0)
        assert monotone[0.02]


def test_criterion_10_ba_oracle_sandwich(ref_mixture):
    with criterion(10, 120.0, "additive rate between the true-RDF oracle and"
                              " oracle + 0.55 bits"):
        disc = discretize(ref_mixture, levels=401, span_stds=6.0)
        curve = ba_curve(disc, gap_tol=5e-5)
        for d in disc.variance() * np.geomspace(0.98, 0.05, 12):
            add_rate = ardf_at(disc, float(d)).rate_bits
            oracle_rate = interp_rate_at(curve, float(d))
            diff = add_rate - oracle_rate
            assert 0.0 <= diff <= 0.55, f"D={d}: diff={diff}"


def test_criterion_11_series_consistency(gauss_unit, twopoint_unit, ref_mixture):
    with criterion(11, 10.0, "low-SNR series against the entropy-difference"
                             " route and the quadrature mmse"):
        for g in (0.002, 0.005, 0.01):
            direct = mutual_info(gauss_unit, ChannelPoint(g), tol=1e-13).bits
            assert abs(direct - mutual_info_series(gauss_unit, g).bits) <= 1e-8
            direct2 = mutual_info(twopoint_unit, ChannelPoint(g), tol=1e-13).bits
            assert abs(direct2 - mutual_info_series(twopoint_unit, g).bits) <= 1e-6
        for src in (gauss_unit, twopoint_unit, ref_mixture):
            quad, _, _ = mmse_quad(src, 0.02, tol=1e-12)
            assert abs(mmse_series(src, 0.02) - quad) <= 1e-4 * quad
