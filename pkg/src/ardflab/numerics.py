"""Shared numeric kernels: line quadrature, monotone root solving,
Richardson derivatives, zero-limit extrapolation, Monte Carlo means.

All kernels are pure functions; integrands must accept numpy arrays.
"""

from __future__ import annotations

import heapq
import math
import statistics
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

LOG2E = math.log2(math.e)

# Gauss-Kronrod (7,15) pair on [-1, 1]; Kronrod weights quoted to full
# double precision, Gauss weights zeroed at Kronrod-only nodes.
_GK_X = np.array([
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993944, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0,
    0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
    0.7415311855993944, 0.8648644233597691, 0.9491079123427585,
    0.9914553711208126,
])
_GK_WK = np.array([
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278,
    0.2044329400752989, 0.1903505780647854, 0.1690047266392679,
    0.1406532597155259, 0.1047900103222502, 0.0630920926299786,
    0.0229353220105292,
])
_GK_WG = np.array([
    0.0, 0.1294849661688697, 0.0, 0.2797053914892767, 0.0,
    0.3818300505051189, 0.0, 0.4179591836734694, 0.0,
    0.3818300505051189, 0.0, 0.2797053914892767, 0.0,
    0.1294849661688697, 0.0,
])


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    extrapolation_order: int
    residual: float
    warning: str | None = None


class QuadratureError(RuntimeError):
    """Raised when the evaluation budget is exhausted; carries the best estimate."""

    def __init__(self, message: str, best: QuadratureResult):
        super().__init__(message)
        self.best = best


class BracketError(ValueError):
    """Raised when a root bracket does not straddle the target."""


def _gk_panels(f, los: np.ndarray, his: np.ndarray):
    """Evaluate the GK(7,15) rule on a batch of panels with one call to f."""
    mid = 0.5 * (los + his)
    half = 0.5 * (his - los)
    pts = mid[:, None] + half[:, None] * _GK_X[None, :]
    fv = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    k15 = half * (fv @ _GK_WK)
    g7 = half * (fv @ _GK_WG)
    diff = np.abs(k15 - g7)
    err = np.minimum(diff, (200.0 * diff) ** 1.5)
    return k15, err


def integrate_line(
    f: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
    bounds: tuple[float, float] = (-1.0, 1.0),
    initial_panels: int = 8,
    max_evals: int = 400_000,
    breakpoints: Sequence[float] | None = None,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of f over finite bounds.

    tol is an absolute tolerance on the integral.  f must be vectorized.
    Optional breakpoints seed the initial subdivision (they are clipped
    to the bounds).  Raises QuadratureError with the best estimate if the
    evaluation budget runs out before the error estimate reaches tol.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("integrate_line requires finite support bounds")
    if hi <= lo:
        return QuadratureResult(0.0, 0.0, 0)

    edges = set(np.linspace(lo, hi, initial_panels + 1).tolist())
    if breakpoints is not None:
        edges.update(float(b) for b in breakpoints if lo < b < hi)
    grid = np.array(sorted(edges))

    vals, errs = _gk_panels(f, grid[:-1], grid[1:])
    evals = 15 * (len(grid) - 1)
    heap: list[tuple[float, float, float, float, float]] = []
    for a, b, v, e in zip(grid[:-1], grid[1:], vals, errs):
        heapq.heappush(heap, (-e, a, b, v, e))

    min_width = 1e-13 * (hi - lo)
    total_err = sum(item[4] for item in heap)
    while total_err > tol:
        neg_e, a, b, v, e = heap[0]
        if (b - a) < min_width:
            # worst panel is at machine resolution; the tolerance is unreachable
            value = sum(item[3] for item in heap)
            best = QuadratureResult(value, total_err, evals)
            raise QuadratureError(
                f"tolerance {tol:.3e} unreachable: worst panel at machine"
                f" resolution with error {total_err:.3e}",
                best,
            )
        if evals + 30 > max_evals:
            value = sum(item[3] for item in heap)
            best = QuadratureResult(value, total_err, evals)
            raise QuadratureError(
                f"evaluation budget {max_evals} exhausted at error {total_err:.3e}"
                f" (tol {tol:.3e})",
                best,
            )
        heapq.heappop(heap)
        m = 0.5 * (a + b)
        (v1, v2), (e1, e2) = _gk_panels(f, np.array([a, m]), np.array([m, b]))
        evals += 30
        heapq.heappush(heap, (-e1, a, m, v1, e1))
        heapq.heappush(heap, (-e2, m, b, v2, e2))
        total_err += e1 + e2 - e

    value = sum(item[3] for item in heap)
    total_err = sum(item[4] for item in heap)
    return QuadratureResult(value, total_err, evals)


def solve_monotone(
    g: Callable[[float], float],
    target: float,
    bracket: tuple[float, float],
    tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Solve g(x) = target for strictly monotone g on the bracket.

    Bisection with secant acceleration; converges on the residual
    |g(x) - target| <= tol.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    flo = g(lo) - target
    if abs(flo) <= tol:
        return lo
    fhi = g(hi) - target
    if abs(fhi) <= tol:
        return hi
    if flo * fhi > 0:
        raise BracketError(
            f"g does not straddle target {target!r} on [{lo!r}, {hi!r}]:"
            f" g(lo)={flo + target!r}, g(hi)={fhi + target!r}"
        )
    a, fa, b, fb = lo, flo, hi, fhi
    x_prev, f_prev = a, fa
    x, fx = b, fb
    for _ in range(max_iter):
        x_new = None
        if fx != f_prev:
            cand = x - fx * (x - x_prev) / (fx - f_prev)
            if a < cand < b:
                x_new = cand
        if x_new is None:
            x_new = 0.5 * (a + b)
        f_new = g(x_new) - target
        if abs(f_new) <= tol:
            return x_new
        if fa * f_new <= 0:
            b, fb = x_new, f_new
        else:
            a, fa = x_new, f_new
        x_prev, f_prev = x, fx
        x, fx = x_new, f_new
    raise RuntimeError(
        f"solve_monotone did not reach |g(x)-target| <= {tol} in {max_iter} iterations"
        f" (last residual {fx:.3e})"
    )


def neville_to_zero(xs: np.ndarray, ys: np.ndarray) -> LimitEstimate:
    """Polynomial extrapolation of (xs, ys) to x = 0, tracking convergence.

    Walks the Neville diagonal and stops at the entry with the smallest
    step-to-step change; a non-monotone change sequence is reported as a
    warning rather than hidden.
    """
    n = len(xs)
    tableau = np.array(ys, dtype=float)
    best_val = tableau[0] if n == 1 else None
    diag = [ys[0]]
    for j in range(1, n):
        new = np.empty(n - j)
        for i in range(n - j):
            new[i] = tableau[i + 1] + (tableau[i + 1] - tableau[i]) * xs[i + j] / (
                xs[i] - xs[i + j]
            )
        tableau = new
        diag.append(tableau[-1])
    diffs = [abs(diag[j] - diag[j - 1]) for j in range(1, len(diag))]
    if not diffs:
        return LimitEstimate(float(diag[0]), 0, float("inf"), "single-point limit")
    best_j = int(np.argmin(diffs)) + 1
    best_val = float(diag[best_j])
    warning = None
    if any(diffs[j] > diffs[j - 1] for j in range(1, best_j)):
        warning = "non-monotone extrapolant sequence"
    else:
        # changes decaying only at the grid ratio mean the sequence tracks a
        # trend instead of locking in; ignore this at the roundoff floor
        tail = [diffs[j] / diffs[j - 1] for j in range(max(1, len(diffs) - 3), len(diffs))
                if diffs[j - 1] > 0]
        floor = 1e-12 * (abs(best_val) + 1.0)
        if len(tail) == 3 and min(tail) > 0.2 and diffs[best_j - 1] > floor:
            warning = "extrapolant sequence not converging"
    return LimitEstimate(best_val, best_j, float(diffs[best_j - 1]), warning)


def derivative(
    f: Callable[[float], float],
    x: float,
    steps: Sequence[float] | None = None,
    noise_floor: float = 0.0,
) -> LimitEstimate:
    """Richardson-extrapolated central-difference derivative of f at x.

    steps must be strictly decreasing; the default halves from
    0.1 * max(|x|, 1).  A noise_floor above zero marks results whose
    smallest step cannot beat the noise with a warning.
    """
    if steps is None:
        h0 = 0.1 * max(abs(x), 1.0)
        steps = [h0 * 0.5**k for k in range(6)]
    hs = np.array([float(h) for h in steps])
    if np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("steps must be positive and strictly decreasing")
    d = np.array([(f(x + h) - f(x - h)) / (2.0 * h) for h in hs])
    est = neville_to_zero(hs**2, d)
    if noise_floor > 0 and hs[-1] < noise_floor:
        est = LimitEstimate(
            est.value, est.extrapolation_order, est.residual,
            "step below noise floor",
        )
    return est


def default_gamma_grid(
    hi: float = 1e-1, lo: float = 1e-5, points: int = 9
) -> np.ndarray:
    return np.geomspace(hi, lo, points)


def limit_at_zero(
    f: Callable[[float], float], grid: Sequence[float] | None = None
) -> LimitEstimate:
    """Extrapolate f(x) to x -> 0+ from values on a geometric grid."""
    xs = default_gamma_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("limit grid must be positive")
    order = np.argsort(xs)[::-1]
    xs = xs[order]
    ys = np.array([f(x) for x in xs])
    return neville_to_zero(xs, ys)


def mc_mean(samples: Sequence[float], confidence: float = 0.99) -> tuple[float, float]:
    """Mean and normal-approximation confidence half-width of a sample."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 30:
        raise ValueError("mc_mean needs at least 30 samples")
    z = statistics.NormalDist().inv_cdf(0.5 * (1.0 + confidence))
    mean = float(arr.mean())
    half = float(z * arr.std(ddof=1) / math.sqrt(arr.size))
    return mean, half
