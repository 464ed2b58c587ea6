"""Figure rendering for the CLI report paths.

CSV files remain the primary, bit-reproducible contract; these helpers give
a quick visual of the same rows.  All functions write image files and return
the path.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


_KIND_STYLE = {
    "ardf": dict(color="C0", marker="o", ms=3, lw=1.2),
    "ba_oracle": dict(color="C3", marker="s", ms=3, lw=1.2, ls="--"),
    "gaussian_rdf": dict(color="C2", lw=1.0, ls=":"),
    "conditional_mixture_rdf": dict(color="C4", lw=1.0, ls="-."),
}


def rd_curves_figure(curves, path: str, title: str | None = None) -> str:
    """Rate vs distortion for one or more curves, distortion on a log axis."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for curve in curves:
        style = _KIND_STYLE.get(curve.points[0].curve_kind, {})
        ax.plot(curve.distortions(), curve.rates(),
                label=curve.points[0].curve_kind, **style)
    ax.set_xscale("log")
    ax.set_xlabel("distortion (MSE)")
    ax.set_ylabel("rate [bits]")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def refinement_figure(comparisons: dict, path: str) -> str:
    """Cumulative unconditional rate vs joint distortion per stage count,
    with the conditional baseline."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    d_all = []
    for i, (stages, comp) in enumerate(sorted(comparisons.items())):
        ds = comp.schedule.joint_targets
        d_all.extend(ds)
        ax.plot(ds, comp.cumulative_rates, marker="o", ms=3, color=f"C{i}",
                label=f"unconditional, {stages} stages")
    var = next(iter(comparisons.values())).schedule.variance
    lo, hi = min(d_all), max(d_all)
    grid = [lo * (hi / lo) ** (j / 63) for j in range(64)]
    ax.plot(grid, [0.5 * math.log2(var / d) for d in grid], color="k", ls="--",
            lw=1.0, label="conditional baseline")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("joint distortion target")
    ax.set_ylabel("cumulative rate [bits]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def loss_sweep_figure(rows, path: str) -> str:
    """Multiplicative rate-loss ratio vs bursty-component variance, one line
    per distortion offset."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    eps_values = sorted({r.eps for r in rows})
    for i, eps in enumerate(eps_values):
        pts = [(r.sigma1_sq, r.ratio) for r in rows if r.eps == eps]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3,
                color=f"C{i}", label=f"D = (1 - {eps:g}) var")
    ax.set_xscale("log")
    ax.set_xlabel("bursty component variance")
    ax.set_ylabel("rate ratio (additive / conditional)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
