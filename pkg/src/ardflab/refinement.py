"""Unconditional successive-refinement accounting for the Gaussian test
channel: per-stage joint-distortion recursion, schedule construction, the
conditional (successively-refinable) baseline, and the low-rate additivity
checks for k independent descriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import ChannelPoint, mmse_quad
from .information import mutual_info
from .numerics import LOG2E, LimitEstimate, default_gamma_grid, limit_at_zero
from .sources import SourceModel

SCHEDULE_RULES = ("geometric_D", "equal_rate", "explicit")


def joint_distortion(d: float, d_prev: float, descriptions: int) -> float:
    """Joint MSE after combining `descriptions` equal-rate descriptions of
    per-description distortion d on top of a prior joint distortion d_prev:
    D = d / (L - (L-1) d / D_prev)."""
    if descriptions < 1:
        raise ValueError(f"need at least one description, got {descriptions}")
    if not 0.0 < d <= d_prev:
        raise ValueError(
            f"per-description distortion must be in (0, D_prev={d_prev}], got {d}"
        )
    return d / (descriptions - (descriptions - 1) * d / d_prev)


def per_description_distortion(joint: float, d_prev: float, descriptions: int) -> float:
    """Inverse of joint_distortion: d = L*D / (1 + (L-1) D / D_prev)."""
    if not 0.0 < joint <= d_prev:
        raise ValueError(f"joint target must be in (0, D_prev={d_prev}], got {joint}")
    return descriptions * joint / (1.0 + (descriptions - 1) * joint / d_prev)


@dataclass(frozen=True)
class RefinementSchedule:
    variance: float
    descriptions: int  # L per stage
    stages: int  # M
    rule: str
    joint_targets: tuple[float, ...]  # D_1..D_M
    per_description: tuple[float, ...]  # d_1..d_M
    stage_rates: tuple[float, ...]  # r_i = 0.5 log2(D_{i-1}/d_i)

    def total_rate(self) -> float:
        return self.descriptions * sum(self.stage_rates)


def _validate_targets(variance: float, targets: np.ndarray):
    if np.any(targets <= 0):
        raise ValueError("joint targets must be positive")
    if targets[0] >= variance:
        raise ValueError(
            f"first joint target {targets[0]} must be below the variance {variance}"
        )
    if np.any(np.diff(targets) >= 0):
        raise ValueError("joint targets must be strictly decreasing")


def build_schedule(
    variance: float,
    d_final: float,
    descriptions: int,
    stages: int,
    rule: str = "geometric_D",
    targets=None,
) -> RefinementSchedule:
    """Construct a refinement schedule reaching d_final in `stages` stages of
    `descriptions` descriptions each.

    geometric_D spaces the joint targets geometrically between the variance
    and d_final; under the distortion recursion this makes every stage rate
    identical, so equal_rate builds the same schedule.  explicit takes the
    joint targets as given.
    """
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    if descriptions < 1 or stages < 1:
        raise ValueError("need descriptions >= 1 and stages >= 1")
    if rule not in SCHEDULE_RULES:
        raise ValueError(f"unknown schedule rule {rule!r}")
    if rule == "explicit":
        if targets is None:
            raise ValueError("explicit rule needs joint targets")
        tgt = np.asarray(targets, dtype=float)
        if len(tgt) != stages:
            raise ValueError(f"expected {stages} joint targets, got {len(tgt)}")
    else:
        if not 0.0 < d_final < variance:
            raise ValueError(
                f"final distortion must be in (0, variance={variance}), got {d_final}"
            )
        tgt = variance * (d_final / variance) ** (np.arange(1, stages + 1) / stages)
    _validate_targets(variance, tgt)
    per_desc = []
    rates = []
    d_prev = variance
    for joint in tgt:
        d = per_description_distortion(float(joint), d_prev, descriptions)
        per_desc.append(d)
        rates.append(0.5 * math.log2(d_prev / d))
        d_prev = float(joint)
    return RefinementSchedule(
        variance, descriptions, stages, rule,
        tuple(float(t) for t in tgt), tuple(per_desc), tuple(rates),
    )


@dataclass(frozen=True)
class RefinementComparison:
    schedule: RefinementSchedule
    cumulative_rates: tuple[float, ...]  # unconditional R_1..R_M
    conditional_rates: tuple[float, ...]  # R*_i = 0.5 log2(var / D_i)
    losses: tuple[float, ...]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    @property
    def total_rate(self) -> float:
        return self.cumulative_rates[-1]


def compare(schedule: RefinementSchedule) -> RefinementComparison:
    """Cumulative unconditional rates against the conditional baseline of a
    successively refinable source at the same joint targets."""
    cum = np.cumsum(schedule.stage_rates) * schedule.descriptions
    cond = np.array(
        [0.5 * math.log2(schedule.variance / d) for d in schedule.joint_targets]
    )
    losses = cum - cond
    return RefinementComparison(
        schedule, tuple(cum), tuple(cond), tuple(losses)
    )


@dataclass(frozen=True)
class AdditivityReport:
    k: int
    variance: float
    mi_limit: LimitEstimate  # lim (1/g) I(X; k descriptions)
    mi_expected: float  # k * log2(e)/2 * var
    inv_mmse_limit: LimitEstimate  # lim (1/g) [1/mmse - 1/var]
    inv_mmse_expected: float  # k

    @property
    def mi_normalized(self) -> float:
        """mi_limit in units of the single-description limit (tends to k)."""
        return self.mi_limit.value / (0.5 * LOG2E * self.variance)


def verify_lowrate_additivity(
    source: SourceModel, k: int, grid=None, quad_tol: float = 1e-12
) -> AdditivityReport:
    """Extrapolated low-rate limits for k independent descriptions: the
    per-SNR mutual information and the inverse-distortion growth rate."""
    if not 1 <= k <= 8:
        raise ValueError(f"k must be in 1..8, got {k}")
    gammas = default_gamma_grid() if grid is None else np.asarray(grid, dtype=float)
    var = source.variance()

    def mi_over_gamma(g):
        return mutual_info(source, ChannelPoint(g, k), tol=quad_tol).bits / g

    def inv_mmse_growth(g):
        m, _, _ = mmse_quad(source, k * g, tol=quad_tol)
        return (1.0 / m - 1.0 / var) / g

    return AdditivityReport(
        k=k,
        variance=var,
        mi_limit=limit_at_zero(mi_over_gamma, gammas),
        mi_expected=k * 0.5 * LOG2E * var,
        inv_mmse_limit=limit_at_zero(inv_mmse_growth, gammas),
        inv_mmse_expected=float(k),
    )
