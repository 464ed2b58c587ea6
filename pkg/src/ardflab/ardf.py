"""Additive rate-distortion curves for scalar sources over the Gaussian
test channel, their zero-rate slope, the component-conditional mixture RDF,
the multiplicative rate-loss sweep, and a Blahut-Arimoto oracle for the
true RDF of discretized sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import ChannelPoint, mmse_quad
from .information import mutual_info
from .numerics import (
    LOG2E,
    LimitEstimate,
    default_gamma_grid,
    neville_to_zero,
    solve_monotone,
)
from .sources import FiniteDiscrete, MixtureSpec, SourceModel

CURVE_KINDS = ("ardf", "gaussian_rdf", "conditional_mixture_rdf", "ba_oracle")


@dataclass(frozen=True)
class RdPoint:
    gamma: float
    distortion: float
    rate_bits: float
    curve_kind: str
    err_bound: float = 0.0


@dataclass(frozen=True)
class RdCurve:
    points: tuple[RdPoint, ...]
    source_label: str
    tolerances: dict

    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.points])

    def rates(self) -> np.ndarray:
        return np.array([p.rate_bits for p in self.points])


def gaussian_rdf_rate(variance: float, distortion: float) -> float:
    """Rate of the Gaussian source of the given variance at MSE distortion."""
    if distortion <= 0:
        raise ValueError(f"distortion must be positive, got {distortion}")
    return max(0.0, 0.5 * math.log2(variance / distortion))


def ardf_at(source: SourceModel, distortion: float, tol: float = 1e-7) -> RdPoint:
    """Parametric ARDF point: the SNR scale is solved so the channel MMSE
    matches the requested distortion (to relative tolerance tol), and the
    rate is the mutual information there.

    Distortions at or above the source variance are the zero-rate point.
    """
    var = source.variance()
    if distortion <= 0:
        raise ValueError(f"distortion must be positive, got {distortion}")
    if distortion >= var:
        return RdPoint(0.0, var, 0.0, "ardf")
    quad_tol = min(1e-10, 0.01 * tol * distortion)
    gamma_hi = (var / distortion - 1.0) / var  # linear-estimator SNR, mmse <= lmmse
    gamma = solve_monotone(
        lambda g: mmse_quad(source, g, tol=quad_tol)[0],
        target=distortion,
        bracket=(0.0, gamma_hi),
        tol=tol * distortion,
    )
    mi = mutual_info(source, ChannelPoint(gamma), tol=min(tol, 1e-9))
    return RdPoint(gamma, distortion, mi.bits, "ardf", mi.error_bound)


def default_distortion_grid(
    variance: float, points: int = 60, lo_frac: float = 0.01, hi_frac: float = 0.999
) -> np.ndarray:
    """Geometric distortion grid spanning the interesting range, high D first."""
    return variance * np.geomspace(hi_frac, lo_frac, points)


def ardf_curve(source: SourceModel, d_grid=None, points: int = 60, tol: float = 1e-7) -> RdCurve:
    if d_grid is None:
        d_grid = default_distortion_grid(source.variance(), points)
    d_grid = np.sort(np.asarray(d_grid, dtype=float))[::-1]
    pts = tuple(ardf_at(source, float(d), tol) for d in d_grid)
    return RdCurve(pts, source.describe(), {"tol": tol})


def ardf_slope_at_dmax(source: SourceModel, grid=None, quad_tol: float = 1e-12) -> LimitEstimate:
    """Slope dR/dD of the ARDF at the zero-rate end, by extrapolating chord
    slopes of the parametric curve (rate(g), distortion(g)) to g -> 0."""
    gammas = default_gamma_grid() if grid is None else np.asarray(grid, dtype=float)
    gammas = np.sort(gammas)[::-1]
    rates = np.array(
        [mutual_info(source, ChannelPoint(float(g)), tol=quad_tol).bits for g in gammas]
    )
    dists = np.array([mmse_quad(source, float(g), tol=quad_tol)[0] for g in gammas])
    chords = (rates[:-1] - rates[1:]) / (dists[:-1] - dists[1:])
    mids = np.sqrt(gammas[:-1] * gammas[1:])
    return neville_to_zero(mids, chords)


def mixture_conditional_rdf(spec: MixtureSpec, distortion: float) -> float:
    """RDF of the two-component mixture when the active component is known
    to encoder and decoder: reverse waterfilling across the components for
    distortion up to var0, single active component above."""
    var = spec.var_x
    if not 0.0 < distortion < var:
        raise ValueError(f"distortion must be in (0, {var}), got {distortion}")
    if distortion <= spec.var0:
        return 0.5 * (
            spec.p0 * math.log2(spec.var0 / distortion)
            + spec.p1 * math.log2(spec.var1 / distortion)
        )
    return 0.5 * spec.p1 * math.log2(
        spec.p1 * spec.var1 / (distortion - spec.p0 * spec.var0)
    )


def conditional_rdf_slope_at_dmax(spec: MixtureSpec, delta_frac: float = 1e-6) -> float:
    """Numeric slope of the conditional mixture RDF at the zero-rate end."""
    var = spec.var_x
    d1 = var * (1.0 - delta_frac)
    d2 = var * (1.0 - 2.0 * delta_frac)
    return (mixture_conditional_rdf(spec, d1) - mixture_conditional_rdf(spec, d2)) / (d1 - d2)


@dataclass(frozen=True)
class MixtureLossRow:
    sigma1_sq: float
    eps: float
    distortion: float
    rate_ardf: float
    rate_cond: float
    ratio: float


def multiplicative_loss_sweep(
    sigma1_grid,
    lam: float = 0.5,
    var_x: float = 1.0,
    eps_grid=(0.05, 0.02, 0.01),
    tol: float = 1e-7,
) -> tuple[list[MixtureLossRow], dict[float, bool]]:
    """Ratio of the mixture ARDF rate to the component-conditional RDF near
    the zero-rate end, for a grid of bursty-component variances.

    Returns the rows and, per eps, whether the ratio is nondecreasing in
    sigma1_sq.
    """
    rows = []
    for s1 in sigma1_grid:
        if s1 <= var_x:
            raise ValueError(f"sigma1_sq must exceed var_x={var_x}, got {s1}")
        spec = MixtureSpec.from_sigma1(lam, var_x, float(s1))
        if spec.var0 < 0.5 * var_x - 1e-12:
            raise ValueError(
                f"sigma1_sq={s1} induces var0={spec.var0} below var_x/2"
            )
        source = spec.to_source()
        for eps in eps_grid:
            d = var_x * (1.0 - eps)
            r_add = ardf_at(source, d, tol).rate_bits
            r_cond = mixture_conditional_rdf(spec, d)
            rows.append(MixtureLossRow(float(s1), float(eps), d, r_add, r_cond,
                                       r_add / r_cond))
    monotone = {}
    for eps in eps_grid:
        ratios = [r.ratio for r in rows if r.eps == eps]
        monotone[float(eps)] = all(b >= a for a, b in zip(ratios, ratios[1:]))
    return rows, monotone


class BaConvergenceError(RuntimeError):
    """Blahut-Arimoto failed to converge; carries the last iterate."""

    def __init__(self, message: str, last_point: RdPoint, gap_bits: float):
        super().__init__(message)
        self.last_point = last_point
        self.gap_bits = gap_bits


_BA_MAX_ALPHABET = 2048


def _ba_gap_bits(q: np.ndarray, c: np.ndarray) -> float:
    """Blahut bound spread on the Lagrangian (zero at the fixed point)."""
    with np.errstate(divide="ignore"):
        log_c = np.log(np.maximum(c, 1e-300))
    return abs(LOG2E * float(np.max(log_c) - q @ log_c))


def _ba_fixed_slope(
    probs: np.ndarray,
    dist_matrix: np.ndarray,
    beta: float,
    q0: np.ndarray,
    rate_tol: float,
    gap_tol: float,
    max_iter: int,
    omega: float = 1.9,
) -> tuple[float, float, np.ndarray, float]:
    """Alternating minimization at inverse-temperature beta (= -slope in
    nats per unit distortion).  Returns (D, R_bits, q, gap_bits).

    Runs over-relaxed multiplier updates (q <- q * c**omega, kept only while
    the Lagrangian descends, so the fixed point is unchanged) until the
    computable bound spread certifies the rate to gap_tol, then a bounded
    number of plain steps that stop early once the per-iteration rate change
    reaches rate_tol.  The rate-change test alone is unsound here: it can
    plateau while the output distribution is still far from optimal, and at
    some slopes plain iteration cannot reach it within the iteration cap.
    """
    bd = beta * dist_matrix
    # flush unreachable transitions to exact zero: keeps the matvecs out of
    # subnormal arithmetic without changing the result
    a = np.where(bd > 350.0, 0.0, np.exp(-np.minimum(bd, 350.0)))
    ad = a * dist_matrix
    q = np.maximum(q0, 1e-100)
    q = q / q.sum()
    z = a @ q
    lagrangian = -float(probs @ np.log(z))

    def plain_step(q, z, lagrangian):
        c = a.T @ (probs / z)
        q = np.maximum(q * c, 1e-100)
        q /= q.sum()
        z = a @ q
        return q, z, -float(probs @ np.log(z)), c

    def point(q, z, lagrangian):
        d_cur = float((probs / z) @ (ad @ q))
        return d_cur, LOG2E * (lagrangian - beta * d_cur)

    # phase 1: over-relaxed steps (q * c**omega when the Lagrangian keeps
    # descending) until the bound spread certifies the value
    it = 0
    certified = False
    while it < max_iter:
        c = a.T @ (probs / z)
        q_try = np.maximum(q * c**omega, 1e-100)
        q_try /= q_try.sum()
        z_try = a @ q_try
        lag_try = -float(probs @ np.log(z_try))
        if lag_try <= lagrangian:
            q, z, lagrangian = q_try, z_try, lag_try
        else:
            q = np.maximum(q * c, 1e-100)
            q /= q.sum()
            z = a @ q
            lagrangian = -float(probs @ np.log(z))
        it += 1
        if it % 16 == 0 and _ba_gap_bits(q, c) <= gap_tol:
            certified = True
            break
    if not certified:
        gap = _ba_gap_bits(q, c)
        d_cur, rate = point(q, z, lagrangian)
        last = RdPoint(float("nan"), d_cur, max(rate, 0.0), "ba_oracle", gap)
        raise BaConvergenceError(
            f"bound spread {gap:.3e} bits still above {gap_tol} after"
            f" {max_iter} iterations at slope {-beta * LOG2E:.4g}"
            " bits/distortion",
            last, gap,
        )

    # phase 2: plain steps settle the rate; the certified spread already
    # bounds the remaining rate error, so a bounded number of steps is
    # enough even when the literal rate-change threshold is out of reach
    d_cur, rate = point(q, z, lagrangian)
    for _ in range(min(4000, max_iter - it)):
        q, z, lagrangian, c = plain_step(q, z, lagrangian)
        d_cur, new_rate = point(q, z, lagrangian)
        settled = abs(new_rate - rate) <= rate_tol
        rate = new_rate
        if settled:
            break
    gap = _ba_gap_bits(q, c)
    return d_cur, max(rate, 0.0), q, gap


def default_ba_slopes(variance: float, points: int = 40) -> np.ndarray:
    """Geometric sweep of (negative) slopes covering the curve from near
    zero rate down to near-lossless distortions."""
    betas = np.geomspace(0.05, 4000.0, points) / variance
    return -LOG2E * betas


def ba_curve(
    source: FiniteDiscrete,
    slopes=None,
    rate_tol: float = 1e-9,
    gap_tol: float = 2e-4,
    max_iter: int = 100_000,
) -> RdCurve:
    """Parametric Blahut-Arimoto sweep; the reproduction alphabet is the
    source alphabet.  Points are ordered by decreasing distortion.

    The sweep runs from the steepest slope down, so each warm start only has
    to shrink the output support (growing it is the slow mode of the
    iteration).
    """
    if not isinstance(source, FiniteDiscrete):
        raise TypeError("Blahut-Arimoto oracle needs a finite_discrete source")
    if len(source.atoms) > _BA_MAX_ALPHABET:
        raise ValueError(f"alphabet larger than {_BA_MAX_ALPHABET}")
    slopes = default_ba_slopes(source.variance()) if slopes is None else np.asarray(slopes)
    if np.any(slopes >= 0):
        raise ValueError("slope parameters must be negative")
    betas = np.sort(-slopes / LOG2E)[::-1]
    x = source.atoms
    dist_matrix = (x[:, None] - x[None, :]) ** 2
    probs = source.probs
    q = probs.copy()
    pts = []
    for beta in betas:
        q0 = 0.95 * q + 0.05 * probs  # keep full support across warm starts
        d_cur, rate, q, gap = _ba_fixed_slope(
            probs, dist_matrix, float(beta), q0, rate_tol, gap_tol, max_iter
        )
        pts.append(RdPoint(float("nan"), d_cur, rate, "ba_oracle", gap))
    pts.sort(key=lambda p: -p.distortion)
    return RdCurve(tuple(pts), source.describe(), {"rate_tol": rate_tol, "gap_tol": gap_tol})


def blahut_arimoto_rdf(
    source: FiniteDiscrete,
    d_target: float | None = None,
    slope: float | None = None,
    slopes=None,
    rate_tol: float = 1e-9,
    gap_tol: float = 2e-4,
    max_iter: int = 100_000,
) -> RdPoint:
    """True-RDF oracle point: either run a single slope, or sweep and answer
    a distortion target by monotone interpolation in the parametric curve."""
    if (d_target is None) == (slope is None):
        raise ValueError("give exactly one of d_target or slope")
    if slope is not None:
        curve = ba_curve(source, slopes=[slope], rate_tol=rate_tol,
                         gap_tol=gap_tol, max_iter=max_iter)
        return curve.points[0]
    if d_target < 0:
        raise ValueError(f"distortion target must be >= 0, got {d_target}")
    curve = ba_curve(source, slopes=slopes, rate_tol=rate_tol, gap_tol=gap_tol,
                     max_iter=max_iter)
    gaps = np.array([p.err_bound for p in curve.points])
    rate = interp_rate_at(curve, float(d_target))
    return RdPoint(float("nan"), float(d_target), rate, "ba_oracle", float(np.max(gaps)))


def interp_rate_at(curve: RdCurve, d_target: float) -> float:
    """Monotone interpolation of a parametric curve at a distortion target.

    Rates are interpolated against log-distortion, where rate-distortion
    curves are nearly linear; plain interpolation in D would overshoot on
    the convex curve between sweep points.
    """
    ds = curve.distortions()[::-1]
    rs = curve.rates()[::-1]
    keep = ds > 0
    if d_target <= 0 or not np.any(keep):
        return float(rs[0])
    return float(np.interp(math.log(d_target), np.log(ds[keep]), rs[keep]))
