"""Scalar source models: Gaussian, Gaussian mixture, finite-discrete and
tabulated-density sources with exact moments, densities and seeded sampling.

Models are immutable after construction and safe to share across threads.
Sampling is functional: the generator state lives inside a single call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.interpolate import PchipInterpolator

from .numerics import integrate_line

_WEIGHT_TOL = 1e-12
_MASS_TOL = 1e-8
_MOMENT_ERR_TOL = 1e-9
_SUPPORT_STDS = 12.0


def _gaussian_raw_moment(mean: float, var: float, k: int) -> float:
    if k == 1:
        return mean
    if k == 2:
        return mean**2 + var
    if k == 3:
        return mean**3 + 3.0 * mean * var
    if k == 4:
        return mean**4 + 6.0 * mean**2 * var + 3.0 * var**2
    raise ValueError(f"moment order must be in 1..4, got {k}")


class SourceModel:
    """Base class; concrete sources implement the kind-specific pieces."""

    kind: str = "abstract"

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def moment(self, k: int) -> float:
        """Raw moment E X^k, k in 1..4."""
        raise NotImplementedError

    def central_moment(self, k: int) -> float:
        raise NotImplementedError

    def standardized_moments(self) -> tuple[float, float]:
        """Skewness-type and kurtosis-type moments (mu3/sigma^3, mu4/sigma^4)."""
        s2 = self.variance()
        return self.central_moment(3) / s2**1.5, self.central_moment(4) / s2**2

    def density(self, x):
        raise NotImplementedError

    def sample(self, n: int, seed: int) -> np.ndarray:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Bounds outside which the density/mass is negligible (quadrature hints)."""
        raise NotImplementedError

    def centered(self) -> "SourceModel":
        """The same source shifted to zero mean."""
        raise NotImplementedError

    def gauss_components(self, min_std: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Representation as weighted Gaussian components (log w, mu, var).

        Discrete atoms are zero-variance components; tabulated densities are
        resolved on a quadrature grid fine enough for a smearing kernel of
        standard deviation min_std.
        """
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:  # pragma: no cover
        return f"<{type(self).__name__} {self.describe()}>"


class Gaussian(SourceModel):
    kind = "gaussian"

    def __init__(self, mean: float = 0.0, variance: float = 1.0):
        if variance <= 0:
            raise ValueError(f"gaussian variance must be positive, got {variance}")
        self._mean = float(mean)
        self._var = float(variance)

    def mean(self):
        return self._mean

    def variance(self):
        return self._var

    def moment(self, k):
        return _gaussian_raw_moment(self._mean, self._var, k)

    def central_moment(self, k):
        return _gaussian_raw_moment(0.0, self._var, k)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x - self._mean) ** 2 / self._var) / math.sqrt(
            2.0 * math.pi * self._var
        )

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        return rng.normal(self._mean, math.sqrt(self._var), size=n)

    def support(self):
        half = _SUPPORT_STDS * math.sqrt(self._var)
        return self._mean - half, self._mean + half

    def centered(self):
        return Gaussian(0.0, self._var)

    def gauss_components(self, min_std):
        return np.zeros(1), np.array([self._mean]), np.array([self._var])

    def describe(self):
        return f"gaussian(mean={self._mean:g}, var={self._var:g})"

    def to_json_dict(self):
        return {"kind": "gaussian", "params": {"mean": self._mean, "variance": self._var}}


class GaussianMixture(SourceModel):
    kind = "gaussian_mixture"

    def __init__(self, weights, means, variances):
        w = np.asarray(weights, dtype=float)
        mu = np.asarray(means, dtype=float)
        v = np.asarray(variances, dtype=float)
        if not (len(w) == len(mu) == len(v)) or len(w) == 0:
            raise ValueError("mixture needs equal-length nonempty component lists")
        if np.any(w < 0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"mixture weights sum to {w.sum()!r}, not 1")
        if np.any(v <= 0):
            raise ValueError("mixture component variances must be positive")
        self._w, self._mu, self._v = w, mu, v

    @property
    def weights(self):
        return self._w

    @property
    def means(self):
        return self._mu

    @property
    def variances(self):
        return self._v

    def mean(self):
        return float(self._w @ self._mu)

    def variance(self):
        return self.moment(2) - self.mean() ** 2

    def moment(self, k):
        return float(
            sum(
                w * _gaussian_raw_moment(m, v, k)
                for w, m, v in zip(self._w, self._mu, self._v)
            )
        )

    def central_moment(self, k):
        mbar = self.mean()
        return float(
            sum(
                w * _gaussian_raw_moment(m - mbar, v, k)
                for w, m, v in zip(self._w, self._mu, self._v)
            )
        )

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self._mu) ** 2 / self._v
        comp = np.exp(-0.5 * z) / np.sqrt(2.0 * math.pi * self._v)
        return comp @ self._w

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self._w), size=n, p=self._w)
        return rng.normal(self._mu[idx], np.sqrt(self._v[idx]))

    def support(self):
        half = _SUPPORT_STDS * np.sqrt(self._v)
        return float(np.min(self._mu - half)), float(np.max(self._mu + half))

    def centered(self):
        return GaussianMixture(self._w, self._mu - self.mean(), self._v)

    def gauss_components(self, min_std):
        return np.log(self._w), self._mu, self._v

    def describe(self):
        comps = ", ".join(
            f"({w:g}, {m:g}, {v:g})" for w, m, v in zip(self._w, self._mu, self._v)
        )
        return f"mixture[{comps}]"

    def to_json_dict(self):
        return {
            "kind": "gaussian_mixture",
            "params": {
                "components": [
                    {"weight": float(w), "mean": float(m), "variance": float(v)}
                    for w, m, v in zip(self._w, self._mu, self._v)
                ]
            },
        }


class FiniteDiscrete(SourceModel):
    kind = "finite_discrete"

    def __init__(self, atoms, probs):
        x = np.asarray(atoms, dtype=float)
        p = np.asarray(probs, dtype=float)
        if len(x) != len(p) or len(x) == 0:
            raise ValueError("discrete source needs equal-length nonempty lists")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        order = np.argsort(x)
        self._x, self._p = x[order], p[order]
        if self.variance() <= 0:
            raise ValueError("discrete source is degenerate (zero variance)")

    @property
    def atoms(self):
        return self._x

    @property
    def probs(self):
        return self._p

    def mean(self):
        return float(self._p @ self._x)

    def variance(self):
        return self.moment(2) - self.mean() ** 2

    def moment(self, k):
        if k not in (1, 2, 3, 4):
            raise ValueError(f"moment order must be in 1..4, got {k}")
        return float(self._p @ self._x**k)

    def central_moment(self, k):
        return float(self._p @ (self._x - self.mean()) ** k)

    def density(self, x):
        raise TypeError(
            "finite_discrete has no density; use the mass function via .atoms/.probs"
        )

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        return rng.choice(self._x, size=n, p=self._p)

    def support(self):
        return float(self._x[0]), float(self._x[-1])

    def centered(self):
        return FiniteDiscrete(self._x - self.mean(), self._p)

    def gauss_components(self, min_std):
        return np.log(self._p), self._x, np.zeros_like(self._x)

    def describe(self):
        if len(self._x) <= 4:
            pts = ", ".join(f"({x:g}: {p:g})" for x, p in zip(self._x, self._p))
            return f"discrete[{pts}]"
        return f"discrete[{len(self._x)} atoms on [{self._x[0]:g}, {self._x[-1]:g}]]"

    def to_json_dict(self):
        return {
            "kind": "finite_discrete",
            "params": {"atoms": self._x.tolist(), "probs": self._p.tolist()},
        }


class TabulatedDensity(SourceModel):
    """Density given on a grid, monotone-cubic interpolated, hard-truncated.

    The tabulated mass must already integrate to 1 over the grid: a deficit
    means the tail was cut off, and that is reported as an error instead of
    silently renormalizing.
    """

    kind = "tabulated_density"

    def __init__(self, grid_x, grid_f):
        x = np.asarray(grid_x, dtype=float)
        f = np.asarray(grid_f, dtype=float)
        if len(x) != len(f) or len(x) < 4:
            raise ValueError("tabulated density needs >= 4 grid points")
        if np.any(np.diff(x) <= 0):
            raise ValueError("tabulated grid must be strictly increasing")
        if np.any(f < 0):
            raise ValueError("tabulated density values must be nonnegative")
        self._x = x
        self._f = f
        self._interp = PchipInterpolator(x, f, extrapolate=False)
        mass = self._quad(lambda t: self._eval(t), tol=1e-10)
        if abs(mass.value - 1.0) > _MASS_TOL:
            raise ValueError(
                f"tabulated density integrates to {mass.value!r}; mass outside the"
                " truncation bounds is not representable - extend the grid instead"
                " of relying on silent renormalization"
            )
        self._moments = {}
        m1 = self._moment_checked(1)
        m2 = self._moment_checked(2)
        if m2 - m1**2 <= 0:
            raise ValueError("tabulated density has non-positive variance")

    def _eval(self, t):
        out = self._interp(np.asarray(t, dtype=float))
        return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)

    def _quad(self, g, tol):
        return integrate_line(
            g, tol=tol, bounds=(self._x[0], self._x[-1]),
            initial_panels=max(16, len(self._x) // 16),
        )

    def _moment_checked(self, k):
        if k not in self._moments:
            res = self._quad(lambda t: self._eval(t) * t**k, tol=1e-11)
            if not math.isfinite(res.value) or res.abs_error_estimate > _MOMENT_ERR_TOL:
                raise ValueError(
                    f"moment {k} quadrature error {res.abs_error_estimate:.2e}"
                    f" exceeds {_MOMENT_ERR_TOL:.0e} (divergent or under-resolved tail)"
                )
            self._moments[k] = res.value
        return self._moments[k]

    def mean(self):
        return self._moment_checked(1)

    def variance(self):
        return self._moment_checked(2) - self.mean() ** 2

    def moment(self, k):
        if k not in (1, 2, 3, 4):
            raise ValueError(f"moment order must be in 1..4, got {k}")
        return self._moment_checked(k)

    def central_moment(self, k):
        m = self.mean()
        res = self._quad(lambda t: self._eval(t) * (t - m) ** k, tol=1e-11)
        return res.value

    def density(self, x):
        return self._eval(x)

    def sample(self, n, seed):
        # inverse-CDF on a dense grid of the interpolant
        xs = np.linspace(self._x[0], self._x[-1], 8192)
        fs = self._eval(xs)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs))])
        cdf /= cdf[-1]
        rng = np.random.default_rng(seed)
        return np.interp(rng.random(n), cdf, xs)

    def support(self):
        return float(self._x[0]), float(self._x[-1])

    def centered(self):
        return TabulatedDensity(self._x - self.mean(), self._f)

    def gauss_components(self, min_std):
        lo, hi = self.support()
        width = hi - lo
        panels = int(np.clip(math.ceil(width / max(min_std, 1e-3)), 8, 512))
        nodes, wts = np.polynomial.legendre.leggauss(16)
        edges = np.linspace(lo, hi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        half = 0.5 * (edges[1] - edges[0])
        xs = (mid + half * nodes[None, :]).ravel()
        ws = np.tile(wts * half, panels)
        fs = self._eval(xs)
        keep = fs > 0
        return np.log(ws[keep] * fs[keep]), xs[keep], np.zeros(int(keep.sum()))

    def describe(self):
        return f"tabulated[{len(self._x)} pts on [{self._x[0]:g}, {self._x[-1]:g}]]"

    def to_json_dict(self):
        return {
            "kind": "tabulated_density",
            "params": {"x": self._x.tolist(), "f": self._f.tolist()},
        }


def gaussian(mean: float = 0.0, variance: float = 1.0) -> Gaussian:
    return Gaussian(mean, variance)


def gaussian_mixture(components) -> GaussianMixture:
    """components: iterable of (weight, mean, variance) triples."""
    w, m, v = zip(*components)
    return GaussianMixture(w, m, v)


def finite_discrete(atoms, probs) -> FiniteDiscrete:
    return FiniteDiscrete(atoms, probs)


def tabulated(grid_x, grid_f) -> TabulatedDensity:
    return TabulatedDensity(grid_x, grid_f)


def uniform(variance: float = 1.0, grid_points: int = 257) -> TabulatedDensity:
    """Uniform source of the given variance, as a tabulated density."""
    half = math.sqrt(3.0 * variance)
    xs = np.linspace(-half, half, grid_points)
    fs = np.full(grid_points, 1.0 / (2.0 * half))
    return TabulatedDensity(xs, fs)


def two_point(variance: float = 1.0) -> FiniteDiscrete:
    """Symmetric equiprobable two-point source of the given variance."""
    a = math.sqrt(variance)
    return FiniteDiscrete([-a, a], [0.5, 0.5])


def discretize(source: SourceModel, levels: int = 401, span_stds: float = 6.0) -> FiniteDiscrete:
    """Uniform-grid discretization (midpoint masses, renormalized).

    The grid spans mean +- span_stds standard deviations, or the hard
    support for tabulated densities.
    """
    if isinstance(source, FiniteDiscrete):
        return source
    if isinstance(source, TabulatedDensity):
        lo, hi = source.support()
    else:
        std = math.sqrt(source.variance())
        lo = source.mean() - span_stds * std
        hi = source.mean() + span_stds * std
    xs = np.linspace(lo, hi, levels)
    ps = np.asarray(source.density(xs), dtype=float)
    ps = ps / ps.sum()
    return FiniteDiscrete(xs, ps)


@dataclass(frozen=True)
class MixtureSpec:
    """Two-component zero-mean Gaussian mixture in the energy-share
    parametrization: the low-variance component carries a fraction
    lam of the total variance, i.e. P0*var0 = lam*var_x.
    """

    lam: float
    var_x: float
    var0: float
    var1: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"energy share must be in [0, 1], got {self.lam}")
        if min(self.var_x, self.var0, self.var1) <= 0:
            raise ValueError("variances must be positive")
        if not self.var1 > self.var_x > self.var0:
            raise ValueError(
                f"need var1 > var_x > var0, got {self.var1}, {self.var_x}, {self.var0}"
            )
        if abs(self.p0 + self.p1 - 1.0) > _WEIGHT_TOL:
            raise ValueError(
                f"inadmissible (lam, var0, var1): component weights sum to"
                f" {self.p0 + self.p1!r}"
            )

    @classmethod
    def from_sigma1(cls, lam: float, var_x: float, var1: float) -> "MixtureSpec":
        """Derive var0 so the weights are admissible (sum to one)."""
        var0 = lam * var_x / (1.0 - (1.0 - lam) * var_x / var1)
        return cls(lam, var_x, var0, var1)

    @property
    def p0(self) -> float:
        return self.lam * self.var_x / self.var0

    @property
    def p1(self) -> float:
        return (1.0 - self.lam) * self.var_x / self.var1

    def component_energy(self, which: int) -> float:
        """P_j * var_j, exact by construction."""
        return self.lam * self.var_x if which == 0 else (1.0 - self.lam) * self.var_x

    def to_source(self) -> GaussianMixture:
        return GaussianMixture([self.p0, self.p1], [0.0, 0.0], [self.var0, self.var1])


class SideInfoModel:
    """Finite side information: values z_j with priors and a conditional
    source model per value.  Independence from the channel noise is
    structural (the model has no noise-related state).
    """

    def __init__(self, values, priors, conditionals, marginal: SourceModel | None = None,
                 rho: float | None = None):
        q = np.asarray(priors, dtype=float)
        if len(q) != len(conditionals) or len(q) != len(values) or len(q) == 0:
            raise ValueError("values, priors and conditionals must have equal length")
        if np.any(q < 0) or abs(q.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"priors must be nonnegative and sum to 1, got sum {q.sum()!r}")
        if marginal is None:
            if not all(isinstance(c, Gaussian) for c in conditionals):
                raise ValueError("marginal must be given for non-Gaussian conditionals")
            marginal = GaussianMixture(
                q, [c.mean() for c in conditionals], [c.variance() for c in conditionals]
            )
        mean_rec = float(sum(qj * c.mean() for qj, c in zip(q, conditionals)))
        var_within = float(sum(qj * c.variance() for qj, c in zip(q, conditionals)))
        var_between = float(
            sum(qj * (c.mean() - mean_rec) ** 2 for qj, c in zip(q, conditionals))
        )
        if abs(mean_rec - marginal.mean()) > 1e-8:
            raise ValueError(
                f"conditional means reconstruct mean {mean_rec!r}, marginal has"
                f" {marginal.mean()!r}"
            )
        if abs(var_within + var_between - marginal.variance()) > 1e-8:
            raise ValueError(
                f"law of total variance violated: {var_within + var_between!r} vs"
                f" marginal {marginal.variance()!r}"
            )
        self.values = tuple(values)
        self.priors = q
        self.conditionals = tuple(conditionals)
        self.marginal = marginal
        self.rho = rho

    @classmethod
    def mixture_indicator(cls, mixture: GaussianMixture) -> "SideInfoModel":
        """Side information revealing the active mixture component."""
        conds = [
            Gaussian(m, v) for m, v in zip(mixture.means, mixture.variances)
        ]
        return cls(range(len(conds)), mixture.weights, conds, marginal=mixture)

    @classmethod
    def jointly_gaussian(cls, rho: float, variance: float = 1.0, mean: float = 0.0,
                         slices: int = 64) -> "SideInfoModel":
        """Jointly Gaussian (X, Z) with correlation rho, Z discretized into
        equiprobable quantile slices.

        Slice representatives are the within-bin means of Z rescaled to unit
        variance, so every conditional keeps the exact conditional variance
        (1 - rho^2) * variance while the reconstructed marginal matches the
        declared Gaussian exactly.
        """
        if not -1.0 < rho < 1.0:
            raise ValueError(f"correlation must be in (-1, 1), got {rho}")
        nd = NormalDist()
        edges = np.array(
            [-np.inf] + [nd.inv_cdf(j / slices) for j in range(1, slices)] + [np.inf]
        )
        phi = lambda t: np.exp(-0.5 * t**2) / math.sqrt(2.0 * math.pi)
        pdf_edges = np.where(np.isfinite(edges), phi(edges), 0.0)
        z_rep = (pdf_edges[:-1] - pdf_edges[1:]) * slices
        z_rep = z_rep / math.sqrt(float(np.mean(z_rep**2)))
        cond_var = variance * (1.0 - rho**2)
        std = math.sqrt(variance)
        conds = [Gaussian(mean + rho * std * z, cond_var) for z in z_rep]
        priors = np.full(slices, 1.0 / slices)
        return cls(z_rep, priors, conds, marginal=Gaussian(mean, variance), rho=rho)

    def conditional_variances(self) -> np.ndarray:
        return np.array([c.variance() for c in self.conditionals])

    def prior_conditional_variance(self) -> float:
        """var(X|Z) = E_Z[var(X|Z=z)] before any channel observation."""
        return float(self.priors @ self.conditional_variances())

    def describe(self) -> str:
        if self.rho is not None:
            return f"jointly-gaussian(rho={self.rho:g}, slices={len(self.priors)})"
        return f"side-info[{len(self.priors)} values over {self.marginal.describe()}]"


def from_json_dict(d: dict) -> SourceModel:
    """Build a source from its JSON description.

    Mixtures accept either an explicit component list or the energy-share
    parametrization {"lambda", "var_x", "sigma1_sq"}.
    """
    try:
        kind = d["kind"]
        params = d.get("params", {})
        if kind == "gaussian":
            return Gaussian(params.get("mean", 0.0), params["variance"])
        if kind == "gaussian_mixture":
            if "components" in params:
                return gaussian_mixture(
                    (c["weight"], c.get("mean", 0.0), c["variance"])
                    for c in params["components"]
                )
            spec = MixtureSpec.from_sigma1(
                params["lambda"], params.get("var_x", 1.0), params["sigma1_sq"]
            )
            return spec.to_source()
        if kind == "finite_discrete":
            return FiniteDiscrete(params["atoms"], params["probs"])
        if kind == "tabulated_density":
            return TabulatedDensity(params["x"], params["f"])
    except KeyError as exc:
        raise ValueError(f"source spec missing field {exc}") from exc
    raise ValueError(f"unknown source kind {kind!r}")


def load_source(path: str) -> SourceModel:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
