"""Command-line surface: reproducible curve computation, verification
reports, refinement comparisons and the mixture rate-loss sweep.

Every file-writing subcommand drops a `<out>.manifest.json` sidecar with the
full flag set, seed, tolerances and version, so quadrature-only runs can be
reproduced byte-for-byte.  Exit codes: 0 success / all claims pass,
1 verification failure, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import __version__
from .ardf import (
    BaConvergenceError,
    ardf_curve,
    ardf_slope_at_dmax,
    ba_curve,
    multiplicative_loss_sweep,
)
from .estimation import ChannelPoint, linearity_test
from .information import (
    MiInconsistencyError,
    conditional_mutual_info,
    verify_immse,
)
from .numerics import LOG2E, QuadratureError, limit_at_zero
from .refinement import build_schedule, compare, verify_lowrate_additivity
from .sources import (
    MixtureSpec,
    SideInfoModel,
    gaussian,
    load_source,
    two_point,
    uniform,
    discretize,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERIC_ERROR = 3


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _parse_gamma_grid(text: str) -> np.ndarray:
    try:
        hi, lo, n = text.split(":")
        return np.geomspace(float(hi), float(lo), int(n))
    except Exception as exc:
        raise ValueError(f"bad gamma grid {text!r}, expected HI:LO:N") from exc


def _source_from_args(args) -> object:
    if getattr(args, "source_file", None):
        return load_source(args.source_file)
    name = getattr(args, "source", None)
    if name is None:
        raise ValueError("give --source or --source-file")
    if name == "gaussian":
        return gaussian(args.mean, args.var)
    if name == "uniform":
        return uniform(args.var)
    if name == "two-point":
        return two_point(args.var)
    if name == "mixture":
        return MixtureSpec.from_sigma1(args.lam, args.var, args.sigma1_sq).to_source()
    raise ValueError(f"unknown source {name!r}")


def _model_from_args(args) -> SideInfoModel:
    if args.model == "gauss-joint":
        return SideInfoModel.jointly_gaussian(args.rho, args.var, slices=args.slices)
    if args.model == "mixture-indicator":
        spec = MixtureSpec.from_sigma1(args.lam, args.var, args.sigma1_sq)
        return SideInfoModel.mixture_indicator(spec.to_source())
    if args.model == "two-mean":
        return SideInfoModel([0, 1], [0.5, 0.5],
                             [gaussian(-1.0, 0.7), gaussian(2.0, 0.7)])
    raise ValueError(f"unknown side-information model {args.model!r}")


def _write_manifest(out_path: str, args, outputs: list[str], started: float) -> None:
    flags = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    manifest = {
        "tool": "ardflab",
        "version": __version__,
        "subcommand": args.subcommand,
        "flags": flags,
        "seed": args.seed,
        "tol": args.tol,
        "gamma_grid": args.gamma_grid,
        "outputs": outputs,
        "duration_s": time.time() - started,
    }
    path = out_path + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")


def _write_curve_csv(path: str, curves) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["curve_kind", "gamma", "D", "rate_bits", "err_bound"])
        for curve in curves:
            for p in curve.points:
                writer.writerow(
                    [p.curve_kind, _fmt(p.gamma), _fmt(p.distortion),
                     _fmt(p.rate_bits), _fmt(p.err_bound)]
                )


def cmd_ardf(args) -> int:
    started = time.time()
    source = _source_from_args(args)
    grid = np.geomspace(args.dmax, args.dmin, args.points)
    curves = [ardf_curve(source, d_grid=grid, tol=args.tol)]
    if args.with_ba:
        disc = discretize(source, levels=args.ba_levels, span_stds=args.ba_span)
        curves.append(ba_curve(disc))
    _write_curve_csv(args.out, curves)
    outputs = [args.out]
    if args.plot:
        from .plots import rd_curves_figure
        outputs.append(rd_curves_figure(curves, args.out + ".png",
                                        title=source.describe()))
    _write_manifest(args.out, args, outputs, started)
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def _claim(name: str, expected: float, measured: float, tolerance: float,
           relative: bool) -> dict:
    residual = abs(measured - expected)
    if relative:
        residual /= abs(expected) if expected != 0 else 1.0
    return {
        "claim": name,
        "expected": expected,
        "measured": measured,
        "residual": residual,
        "pass": bool(residual <= tolerance),
    }


def cmd_verify(args) -> int:
    started = time.time()
    grid = _parse_gamma_grid(args.gamma_grid)
    claims = []
    if args.check == "immse":
        source = _source_from_args(args)
        chk = verify_immse(source, np.geomspace(0.05, 4.0, 10))
        claims.append(_claim(
            f"dI/dgamma equals (log2e/2)*mmse for {source.describe()}",
            0.0, chk.max_relative_deviation, args.rel_tol, relative=False,
        ))
    elif args.check == "slope":
        source = _source_from_args(args)
        est = ardf_slope_at_dmax(source, grid=grid)
        expected = -LOG2E / (2.0 * source.variance())
        claims.append(_claim(
            f"zero-rate curve slope for {source.describe()}",
            expected, est.value, args.pct / 100.0, relative=True,
        ))
    elif args.check == "kfold":
        source = _source_from_args(args)
        rep = verify_lowrate_additivity(source, args.k, grid=grid)
        claims.append(_claim(
            f"k-fold information limit, k={args.k}",
            float(args.k), rep.mi_normalized, args.pct / 100.0, relative=True,
        ))
        claims.append(_claim(
            f"k-fold inverse-distortion limit, k={args.k}",
            float(args.k), rep.inv_mmse_limit.value, args.pct / 100.0, relative=True,
        ))
    elif args.check == "condmi":
        model = _model_from_args(args)
        expected = args.k * 0.5 * LOG2E * model.prior_conditional_variance()

        def per_gamma(g):
            return conditional_mutual_info(model, ChannelPoint(g, args.k),
                                           tol=1e-12).bits / g

        est = limit_at_zero(per_gamma, grid)
        claims.append(_claim(
            f"conditional information limit for {model.describe()}, k={args.k}",
            expected, est.value, args.pct / 100.0, relative=True,
        ))
    elif args.check == "lintest":
        model = _model_from_args(args)
        is_linear, report = linearity_test(model)
        cond_vars = model.conditional_variances()
        expect_linear = bool(np.ptp(cond_vars) <= 1e-9 * np.max(cond_vars))
        expected_gap = float(report.jensen_lhs - report.jensen_rhs)
        claims.append(_claim(
            f"Jensen gap of slice variances for {model.describe()}",
            expected_gap, report.gap, 1e-10, relative=False,
        ))
        claims.append({
            "claim": f"linear-estimator verdict for {model.describe()}",
            "expected": expect_linear,
            "measured": is_linear,
            "residual": 0.0 if is_linear == expect_linear else 1.0,
            "pass": is_linear == expect_linear,
        })
    else:
        raise ValueError(f"unknown verification {args.check!r}")

    all_pass = all(c["pass"] for c in claims)
    report = {"subcommand": f"verify {args.check}", "claims": claims, "pass": all_pass}
    text = json.dumps(report, indent=2, default=float)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        _write_manifest(args.out, args, [args.out], started)
    return EXIT_OK if all_pass else EXIT_VERIFY_FAILED


_REFINE_COLUMNS = ["stage", "D_target", "d_per_desc", "r_per_desc_bits",
                   "R_uncond_bits", "R_cond_bits", "loss_bits"]


def cmd_refine(args) -> int:
    started = time.time()
    stage_counts = ([int(m) for m in args.sweep_M.split(",")] if args.sweep_M
                    else [args.M])
    comparisons = {}
    for m in stage_counts:
        sched = build_schedule(args.var, args.dfinal, args.L, m, rule=args.rule)
        comparisons[m] = compare(sched)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        for m, comp in sorted(comparisons.items()):
            fh.write(f"# M={m} L={args.L} var={_fmt(args.var)}"
                     f" dfinal={_fmt(args.dfinal)} rule={args.rule}\n")
            writer = csv.writer(fh)
            writer.writerow(_REFINE_COLUMNS)
            sched = comp.schedule
            for i in range(sched.stages):
                writer.writerow([
                    i + 1,
                    _fmt(sched.joint_targets[i]),
                    _fmt(sched.per_description[i]),
                    _fmt(sched.stage_rates[i]),
                    _fmt(comp.cumulative_rates[i]),
                    _fmt(comp.conditional_rates[i]),
                    _fmt(comp.losses[i]),
                ])
    outputs = [args.out]
    if args.plot:
        from .plots import refinement_figure
        outputs.append(refinement_figure(comparisons, args.out + ".png"))
    _write_manifest(args.out, args, outputs, started)
    for m, comp in sorted(comparisons.items()):
        print(f"M={m}: total {comp.total_rate:.6f} bits, final loss"
              f" {comp.final_loss:.6f} bits")
    return EXIT_OK


def cmd_mixture_loss(args) -> int:
    started = time.time()
    sigma_grid = [float(s) for s in args.sigma1_grid.split(",")]
    eps_grid = [float(e) for e in args.eps.split(",")]
    rows, monotone = multiplicative_loss_sweep(
        sigma_grid, lam=args.lam, var_x=args.var, eps_grid=eps_grid, tol=args.tol
    )
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma1_sq", "eps", "D", "R_ardf_bits", "R_cond_bits", "ratio"])
        for r in rows:
            writer.writerow([_fmt(r.sigma1_sq), _fmt(r.eps), _fmt(r.distortion),
                             _fmt(r.rate_ardf), _fmt(r.rate_cond), _fmt(r.ratio)])
    outputs = [args.out]
    if args.plot:
        from .plots import loss_sweep_figure
        outputs.append(loss_sweep_figure(rows, args.out + ".png"))
    _write_manifest(args.out, args, outputs, started)
    for eps, mono in sorted(monotone.items()):
        print(f"eps={eps:g}: ratio monotone nondecreasing in sigma1_sq: {mono}")
    return EXIT_OK


def _add_source_flags(p: argparse.ArgumentParser):
    p.add_argument("--source", choices=["gaussian", "mixture", "uniform", "two-point"])
    p.add_argument("--source-file", help="JSON source specification")
    p.add_argument("--var", type=float, default=1.0)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.5,
                   help="energy share of the low-variance mixture component")
    p.add_argument("--sigma1-sq", type=float, default=5.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ardflab",
        description="Additive rate-distortion laboratory over the Gaussian"
                    " test channel",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=20240101)
    common.add_argument("--tol", type=float, default=1e-7,
                        help="quadrature / solver tolerance")
    common.add_argument("--gamma-grid", default="1e-1:1e-5:9",
                        help="geometric SNR grid HI:LO:N for zero limits")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ardf", parents=[common],
                       help="rate-distortion curve CSV for a source")
    _add_source_flags(p)
    p.add_argument("--dmin", type=float, default=0.01)
    p.add_argument("--dmax", type=float, default=0.999)
    p.add_argument("--points", type=int, default=60)
    p.add_argument("--with-ba", action="store_true",
                   help="add a Blahut-Arimoto oracle block on a discretized copy")
    p.add_argument("--ba-levels", type=int, default=401)
    p.add_argument("--ba-span", type=float, default=6.0)
    p.add_argument("--out", default="ardf.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_ardf)

    p = sub.add_parser("verify", parents=[common],
                       help="run a numeric claim check, JSON report")
    p.add_argument("check", choices=["immse", "slope", "kfold", "condmi", "lintest"])
    _add_source_flags(p)
    _add_model_flags_optional(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--pct", type=float, default=2.0,
                   help="relative tolerance in percent for limit claims")
    p.add_argument("--rel-tol", type=float, default=1e-3,
                   help="relative tolerance for the derivative check")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("refine", parents=[common],
                       help="successive-refinement comparison CSV")
    p.add_argument("--var", type=float, default=1.0)
    p.add_argument("--dfinal", type=float, default=0.1)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--rule", default="geometric",
                   choices=["geometric", "geometric_D", "equal_rate"])
    p.add_argument("--sweep-M", help="comma list of stage counts")
    p.add_argument("--out", default="refine.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("mixture-loss", parents=[common],
                       help="multiplicative rate-loss table near zero rate")
    p.add_argument("--sigma1-grid", default="2,5,10,20")
    p.add_argument("--eps", default="0.05,0.02,0.01")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--var", type=float, default=1.0)
    p.add_argument("--out", default="mixture_loss.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_mixture_loss)
    return parser


def _add_model_flags_optional(p: argparse.ArgumentParser):
    p.add_argument("--model",
                   choices=["gauss-joint", "mixture-indicator", "two-mean"])
    p.add_argument("--rho", type=float, default=0.8)
    p.add_argument("--slices", type=int, default=64)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "refine" and args.rule == "geometric":
        args.rule = "geometric_D"
    try:
        return args.func(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (QuadratureError, BaConvergenceError, MiInconsistencyError,
            ArithmeticError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
