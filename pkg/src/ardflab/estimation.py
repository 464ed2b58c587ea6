"""Posterior-mean estimation over the scalar Gaussian observation channel
Y = sqrt(gamma) X + N with N ~ N(0,1).

k independent observations at SNR scale gamma are equivalent to a single
observation at k*gamma (the sum is sufficient and the averaged noise has
variance 1/k), so every analytic path reduces to the scalar channel at the
effective SNR.  Monte Carlo cross-check devices sample the full observation
vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .numerics import integrate_line, mc_mean
from .sources import FiniteDiscrete, SourceModel

_LOG_2PI = math.log(2.0 * math.pi)
_NOISE_STDS = 12.0


@dataclass(frozen=True)
class ChannelPoint:
    """SNR scale gamma >= 0 and number of independent descriptions k >= 1."""

    gamma: float
    k: int = 1

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")

    @property
    def effective_gamma(self) -> float:
        return self.gamma * self.k


@dataclass(frozen=True)
class EstimatorReport:
    mmse: float
    lmmse: float
    jensen_lhs: float
    jensen_rhs: float
    gap: float
    method: str
    error_bound: float


class ObservationKernel:
    """Evidence density and posterior mean of the scalar channel at SNR g.

    The source is expanded into weighted Gaussian components (exact for
    Gaussian/mixture/discrete sources, quadrature nodes for tabulated ones),
    for which both quantities are closed-form mixtures.  All evaluations are
    done in log space, so extreme observations yield 0/near-prior values
    instead of NaN.
    """

    def __init__(self, source: SourceModel, g: float):
        if g < 0:
            raise ValueError(f"SNR scale must be >= 0, got {g}")
        self.g = float(g)
        min_std = 1.0 / math.sqrt(g) if g > 0 else math.inf
        logw, mu, var = source.gauss_components(min_std)
        sqrt_g = math.sqrt(g)
        self._logw = logw
        self._obs_mu = sqrt_g * mu
        self._obs_var = 1.0 + g * var
        self._pm_slope = sqrt_g * var / self._obs_var
        self._pm_base = mu
        self._log_norm = logw - 0.5 * (np.log(self._obs_var) + _LOG_2PI)

    def _log_terms(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return self._log_norm - 0.5 * (y[:, None] - self._obs_mu) ** 2 / self._obs_var

    def log_evidence(self, y):
        return logsumexp(self._log_terms(y), axis=1)

    def evidence(self, y):
        return np.exp(self.log_evidence(y))

    def posterior_mean(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        lt = self._log_terms(y)
        resp = np.exp(lt - logsumexp(lt, axis=1, keepdims=True))
        comp_means = self._pm_base + self._pm_slope * (y[:, None] - self._obs_mu)
        return np.sum(resp * comp_means, axis=1)

    def evidence_and_posterior_mean(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        lt = self._log_terms(y)
        log_ev = logsumexp(lt, axis=1)
        resp = np.exp(lt - log_ev[:, None])
        comp_means = self._pm_base + self._pm_slope * (y[:, None] - self._obs_mu)
        return np.exp(log_ev), np.sum(resp * comp_means, axis=1)

    def window(self) -> tuple[float, float]:
        """Observation range outside which the evidence mass is negligible."""
        lo = float(np.min(self._obs_mu - _NOISE_STDS * np.sqrt(self._obs_var)))
        hi = float(np.max(self._obs_mu + _NOISE_STDS * np.sqrt(self._obs_var)))
        return lo, hi


def posterior_mean(source: SourceModel, gamma: float, y) -> float | np.ndarray:
    """E[X | sqrt(gamma) X + N = y]."""
    if gamma <= 0:
        raise ValueError(f"posterior_mean needs gamma > 0, got {gamma}")
    out = ObservationKernel(source, gamma).posterior_mean(y)
    return float(out[0]) if np.isscalar(y) else out


def mmse_quad(source: SourceModel, g: float, tol: float = 1e-10):
    """(mmse, error bound, evaluations) at effective SNR g by 1-D quadrature.

    Uses mmse = Var(X) - E[E[X|Y]^2] on the centered source, integrating the
    posterior-mean square against the evidence density.
    """
    var = source.variance()
    if g == 0:
        return var, 0.0, 0
    centered = source.centered()
    kernel = ObservationKernel(centered, g)

    def integrand(y):
        ev, pm = kernel.evidence_and_posterior_mean(y)
        return ev * pm**2

    res = integrate_line(integrand, tol=tol, bounds=kernel.window(), initial_panels=16)
    return max(0.0, var - res.value), res.abs_error_estimate, res.evaluations


def mmse(source: SourceModel, point: ChannelPoint, tol: float = 1e-10) -> float:
    """Minimum MSE of estimating X from k observations at SNR scale gamma."""
    return mmse_quad(source, point.effective_gamma, tol)[0]


def lmmse(source: SourceModel, point: ChannelPoint) -> float:
    """Best linear estimator MSE: var / (1 + g * var) at effective SNR g."""
    var = source.variance()
    return var / (1.0 + point.effective_gamma * var)


def conditional_mmse(model, point: ChannelPoint, tol: float = 1e-10) -> EstimatorReport:
    """var(X | Y, Z) for finite side information Z, averaged over slices,
    plus the Jensen diagnostics on the slice variances."""
    g = point.effective_gamma
    total = 0.0
    total_lin = 0.0
    err = 0.0
    for q, cond in zip(model.priors, model.conditionals):
        if q == 0.0:
            continue
        m, e, _ = mmse_quad(cond, g, tol)
        total += q * m
        v = cond.variance()
        total_lin += q * v / (1.0 + g * v)
        err += q * e
    cond_vars = model.conditional_variances()
    lhs = float(model.priors @ cond_vars**2)
    rhs = float(model.priors @ cond_vars) ** 2
    return EstimatorReport(
        mmse=total, lmmse=total_lin, jensen_lhs=lhs, jensen_rhs=rhs,
        gap=lhs - rhs, method="quadrature", error_bound=err,
    )


def linearity_test(model, rel_tol: float = 1e-9) -> tuple[bool, EstimatorReport]:
    """Whether the low-rate conditional estimator E[X|Y,Z] is linear:
    true iff the slice variances are equal, i.e. the Jensen gap vanishes."""
    report = conditional_mmse(model, ChannelPoint(0.0))
    return report.gap <= rel_tol * report.jensen_rhs, report


# ---------------------------------------------------------------------------
# Monte Carlo cross-check devices.  These sample the full k-dimensional
# observation vector and marginalize over X on a quadrature grid, which keeps
# them independent of the analytic evidence-quadrature path they check.

_MC_MAX_K = 8


def _x_nodes(source: SourceModel, g: float) -> tuple[np.ndarray, np.ndarray]:
    """(nodes, log weights) resolving the source against a kernel of SNR g."""
    if isinstance(source, FiniteDiscrete):
        return source.atoms, np.log(source.probs)
    lo, hi = source.support()
    min_std = 1.0 / math.sqrt(g) if g > 0 else math.inf
    panels = int(np.clip(math.ceil((hi - lo) / max(2.0 * min_std, 1e-3)), 8, 256))
    nodes, wts = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    xs = (0.5 * (edges[:-1] + edges[1:])[:, None] + half * nodes[None, :]).ravel()
    ws = np.tile(wts * half, panels)
    fs = np.asarray(source.density(xs), dtype=float)
    keep = fs > 0
    return xs[keep], np.log(ws[keep] * fs[keep])


def sample_observations(source: SourceModel, gamma: float, k: int, n: int, seed: int):
    """n draws of (x, y_1..y_k) from the k-description channel."""
    rng = np.random.default_rng(seed)
    x = source.sample(n, seed=rng.integers(2**63))
    y = math.sqrt(gamma) * x[:, None] + rng.standard_normal((n, k))
    return x, y


def mmse_mc_kobs(
    source: SourceModel,
    gamma: float,
    k: int,
    n: int = 200_000,
    seed: int = 20240101,
    confidence: float = 0.99,
) -> tuple[float, float]:
    """Direct k-observation Monte Carlo estimate of E[(X - E[X|Y_1..Y_k])^2].

    The posterior over X is evaluated on a quadrature grid against the
    product likelihood of the sampled observation vector.  Returns the
    estimate and its confidence half-width.
    """
    if not 1 <= k <= _MC_MAX_K:
        raise ValueError(f"Monte Carlo cross-check supports k in 1..{_MC_MAX_K}")
    x, y = sample_observations(source, gamma, k, n, seed)
    nodes, logw = _x_nodes(source, k * gamma)
    sqrt_g = math.sqrt(gamma)
    s = y.sum(axis=1)
    pm = np.empty(n)
    chunk = max(1, int(2e7) // len(nodes))
    for i in range(0, n, chunk):
        sl = slice(i, min(i + chunk, n))
        # product likelihood over the vector reduces to its sufficient terms
        ll = logw[None, :] + sqrt_g * s[sl, None] * nodes[None, :] \
            - 0.5 * k * gamma * nodes[None, :] ** 2
        resp = np.exp(ll - logsumexp(ll, axis=1, keepdims=True))
        pm[sl] = resp @ nodes
    return mc_mean((x - pm) ** 2, confidence)


def posterior_mean_mc(
    source: SourceModel,
    gamma: float,
    y0: float,
    window: float = 0.01,
    n: int = 10_000_000,
    seed: int = 20240101,
    confidence: float = 0.99,
) -> tuple[float, float, int]:
    """Monte Carlo check of E[X|Y=y0]: average x over samples with
    |y - y0| <= window.  Returns (mean, half width, bin count)."""
    x, y = sample_observations(source, gamma, 1, n, seed)
    mask = np.abs(y[:, 0] - y0) <= window
    hits = x[mask]
    mean, half = mc_mean(hits, confidence)
    return mean, half, int(mask.sum())
