"""Mutual information over the Gaussian observation channel by independent
routes (differential-entropy difference, integral of the MMSE over SNR,
low-SNR series, Monte Carlo), plus the SNR-derivative consistency check.

All rates are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .estimation import ChannelPoint, ObservationKernel, mmse_quad, sample_observations, _x_nodes
from .numerics import LOG2E, derivative, integrate_line, mc_mean
from .sources import SourceModel

HALF_LOG2_2PIE = 0.5 * math.log2(2.0 * math.pi * math.e)
SERIES_MAX_EFFECTIVE_SNR = 0.1


@dataclass(frozen=True)
class MiEstimate:
    gamma: float
    bits: float
    method: str
    error_bound: float


@dataclass(frozen=True)
class SeriesCoefficients:
    """Coefficients of the low-SNR expansion of I in the effective SNR
    u = gamma * var, in bits: I = c1*u + c2*u^2 + c3*u^3 + c4*u^4 + O(u^5).

    c1..c3 are universal; c4 carries the standardized third and fourth
    moments of the source.
    """

    mu3: float
    mu4: float

    c1: float = 0.5 * LOG2E
    c2: float = -0.25 * LOG2E
    c3: float = LOG2E / 6.0

    @property
    def c4(self) -> float:
        return -LOG2E / 48.0 * (self.mu4**2 - 6.0 * self.mu4 - 2.0 * self.mu3**2 + 15.0)


class MiInconsistencyError(RuntimeError):
    """The independent mutual-information routes disagree beyond their bounds."""


def _entropy_diff(source: SourceModel, g: float, tol: float) -> MiEstimate:
    kernel = ObservationKernel(source.centered(), g)

    def integrand(y):
        log_ev = kernel.log_evidence(y)
        ev = np.exp(log_ev)
        return -ev * log_ev * LOG2E

    res = integrate_line(integrand, tol=tol, bounds=kernel.window(), initial_panels=16)
    bits = max(0.0, res.value - HALF_LOG2_2PIE)
    return MiEstimate(g, bits, "entropy_diff", res.abs_error_estimate)


def _immse_integral(source: SourceModel, g: float, tol: float) -> MiEstimate:
    inner_tol = min(1e-11, tol / (10.0 * max(g, 1.0)))
    inner_err = 0.0

    def integrand(t):
        nonlocal inner_err
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            m, e, _ = mmse_quad(source, float(ti), tol=inner_tol)
            out[i] = m
            inner_err = max(inner_err, e)
        return out

    # refine near t = 0 where the mmse varies fastest
    breaks = [g * 10.0**-j for j in range(1, 7)]
    res = integrate_line(
        integrand, tol=max(tol, 1e-11), bounds=(0.0, g),
        initial_panels=4, breakpoints=breaks,
    )
    bits = 0.5 * LOG2E * res.value
    err = 0.5 * LOG2E * (res.abs_error_estimate + inner_err * g)
    return MiEstimate(g, bits, "immse_integral", err)


def mutual_info(
    source: SourceModel,
    point: ChannelPoint,
    method: str = "entropy_diff",
    tol: float = 1e-10,
) -> MiEstimate:
    """I(X; observations) in bits at the point's effective SNR.

    method: entropy_diff (h(Y) - h(N) on the evidence density),
    immse_integral (SNR integral of the MMSE), or cross_check (run both
    and fail loudly if they disagree beyond combined error bounds).
    """
    g = point.effective_gamma
    if g == 0.0:
        return MiEstimate(0.0, 0.0, method, 0.0)
    if method == "entropy_diff":
        return _entropy_diff(source, g, tol)
    if method == "immse_integral":
        return _immse_integral(source, g, tol)
    if method == "cross_check":
        a = _entropy_diff(source, g, tol)
        b = _immse_integral(source, g, tol)
        bound = a.error_bound + b.error_bound + 1e-9
        if abs(a.bits - b.bits) > bound:
            raise MiInconsistencyError(
                f"entropy_diff={a.bits!r} and immse_integral={b.bits!r} disagree by"
                f" {abs(a.bits - b.bits):.3e} > {bound:.3e} at effective SNR {g!r}"
            )
        return MiEstimate(g, a.bits, "cross_check", bound)
    raise ValueError(f"unknown mutual information method {method!r}")


def series_coefficients(source: SourceModel) -> SeriesCoefficients:
    mu3, mu4 = source.standardized_moments()
    if not (math.isfinite(mu3) and math.isfinite(mu4)):
        raise ValueError("source lacks finite standardized moments up to order 4")
    return SeriesCoefficients(mu3, mu4)


def mutual_info_series(source: SourceModel, gamma: float) -> MiEstimate:
    """Fourth-order low-SNR expansion of I in bits, standardized form.

    Valid for gamma * var <= 0.1; refuses sources without a finite fourth
    moment.
    """
    var = source.variance()
    u = gamma * var
    if u > SERIES_MAX_EFFECTIVE_SNR:
        raise ValueError(
            f"series expansion limited to gamma*var <= {SERIES_MAX_EFFECTIVE_SNR},"
            f" got {u!r}"
        )
    c = series_coefficients(source)
    bits = u * (c.c1 + u * (c.c2 + u * (c.c3 + u * c.c4)))
    return MiEstimate(gamma, bits, "series", abs(c.c4) * u**5)


def mmse_series(source: SourceModel, gamma: float) -> float:
    """Low-SNR MMSE series consistent with the SNR-derivative of the
    mutual-information expansion: var * (1 - u + u^2 + 8*c4*u^3 / log2(e))
    with u = gamma * var."""
    var = source.variance()
    u = gamma * var
    if u > SERIES_MAX_EFFECTIVE_SNR:
        raise ValueError(
            f"series expansion limited to gamma*var <= {SERIES_MAX_EFFECTIVE_SNR},"
            f" got {u!r}"
        )
    c = series_coefficients(source)
    c4_nats = c.c4 / LOG2E
    return var * (1.0 - u + u**2 + 8.0 * c4_nats * u**3)


def mmse_series_variant(source: SourceModel, gamma: float) -> float:
    """Alternative truncation var - g*var^2 + g^2*var^2 + g^3*var^3/6.

    Only first-order accurate beyond the Gaussian unit-variance case; kept
    for side-by-side comparison in reports, never as an oracle.
    """
    var = source.variance()
    return var - gamma * var**2 + gamma**2 * var**2 + gamma**3 * var**3 / 6.0


def conditional_mutual_info(model, point: ChannelPoint, tol: float = 1e-10) -> MiEstimate:
    """I(X; observations | Z) for finite side information: prior-weighted
    mutual information of the conditional sources at the effective SNR."""
    g = point.effective_gamma
    if g == 0.0:
        return MiEstimate(0.0, 0.0, "entropy_diff", 0.0)
    bits = 0.0
    err = 0.0
    for q, cond in zip(model.priors, model.conditionals):
        if q == 0.0:
            continue
        est = _entropy_diff(cond, g, tol)
        bits += q * est.bits
        err += q * est.error_bound
    return MiEstimate(g, bits, "entropy_diff", err)


@dataclass(frozen=True)
class ImmseRow:
    gamma: float
    mi_derivative_bits: float
    half_log2e_mmse: float
    relative_deviation: float


@dataclass(frozen=True)
class ImmseCheck:
    rows: tuple[ImmseRow, ...]
    max_relative_deviation: float


def verify_immse(source: SourceModel, grid, tol: float = 1e-11) -> ImmseCheck:
    """Check d/dgamma I(gamma) against (log2 e / 2) * mmse(gamma) pointwise.

    The derivative side Richardson-extrapolates the entropy-difference
    mutual information; the other side is the evidence-quadrature MMSE.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 5.0):
        raise ValueError("verify_immse grid must lie in (0, 5]")
    rows = []
    for g in grid:
        steps = [g * frac for frac in (0.5, 0.25, 0.125, 0.0625)]
        est = derivative(
            lambda t: _entropy_diff(source, t, tol).bits, g, steps=steps
        )
        m, _, _ = mmse_quad(source, g, tol=tol)
        rhs = 0.5 * LOG2E * m
        rows.append(ImmseRow(g, est.value, rhs, abs(est.value - rhs) / rhs))
    return ImmseCheck(tuple(rows), max(r.relative_deviation for r in rows))


def mutual_info_mc(
    source: SourceModel,
    gamma: float,
    k: int,
    n: int = 100_000,
    seed: int = 20240101,
    confidence: float = 0.99,
) -> MiEstimate:
    """Direct k-dimensional Monte Carlo mutual information.

    Averages the information density log2 f(y|x) - log2 f(y) over sampled
    observation vectors; the evidence f(y) marginalizes X by inner 1-D
    quadrature.  The error bound is the confidence half-width.
    """
    x, y = sample_observations(source, gamma, k, n, seed)
    nodes, logw = _x_nodes(source, k * gamma)
    sqrt_g = math.sqrt(gamma)
    dens = np.empty(n)
    chunk = max(1, int(2e7) // len(nodes))
    cond_quad = ((y - sqrt_g * x[:, None]) ** 2).sum(axis=1)
    base_quad = (y**2).sum(axis=1)
    s = y.sum(axis=1)
    for i in range(0, n, chunk):
        sl = slice(i, min(i + chunk, n))
        ll = logw[None, :] + sqrt_g * s[sl, None] * nodes[None, :] \
            - 0.5 * k * gamma * nodes[None, :] ** 2
        log_m = logsumexp(ll, axis=1)
        dens[sl] = LOG2E * (0.5 * base_quad[sl] - 0.5 * cond_quad[sl] - log_m)
    mean, half = mc_mean(dens, confidence)
    return MiEstimate(gamma, mean, "monte_carlo", half)
