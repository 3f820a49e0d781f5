"""Command-line front end: ``spindepth <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 criterion
inapplicable for every requested k.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import figures
from .boundary import DEFAULT_GRID, CurveCache, GridSpec
from .criteria import CRITERIA, admissible_ks, detect_depth, evaluate_criterion
from .errors import ConstraintInfeasible, ConvergenceFailure, SpinDepthError
from .fluctuating import ShotEnsemble, fluctuating_linear_parameters, fluctuating_nonlinear, fluctuating_sm
from .records import CriterionResult, MeasurementRecord, fmt, read_rows, record_from_dict
from .spin import SpinLength
from .states import (
    decohere_particles, dicke_moments, noisy_dicke_moments, random_producible_moments, squeezed_state_moments,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_INAPPLICABLE = 0, 2, 3, 4

log = logging.getLogger("spindepth")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# output


def _columns(rows: Sequence[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def render_table(rows: Sequence[dict], fmt_name: str) -> str:
    if fmt_name == "json":
        return "".join(json.dumps(r) + "\n" for r in rows)
    buf = io.StringIO()
    cols = _columns(rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt(r.get(c)) if not isinstance(r.get(c), str) else r.get(c) for c in cols])
    return buf.getvalue()


def write_table(rows: Sequence[dict], fmt_name: str, out: str | None) -> None:
    text = render_table(rows, fmt_name)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# --------------------------------------------------------------------------
# argument helpers


def _k_list(args, N: int, j: SpinLength, criterion: str | None = None) -> list[int]:
    if args.k:
        ks = sorted(set(args.k))
    elif args.k_range:
        lo, hi = args.k_range
        ks = list(range(lo, hi + 1))
    elif criterion is not None:
        return admissible_ks(N, j, criterion, getattr(args, "allow_half_integer", False))
    else:
        raise UsageError("give --k or --k-range")
    bad = [k for k in ks if not 1 <= k <= N - 1]
    if bad:
        raise UsageError(f"k outside [1, N-1]: {bad}")
    return ks


def _range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("LO must not exceed HI")
    return lo, hi


def _noise(text: str):
    if text.startswith("decohere:"):
        m = int(text.split(":", 1)[1])
        if m < 0:
            raise argparse.ArgumentTypeError("m must be non-negative")
        return ("decohere", m)
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected p or decohere:m") from None
    if not 0 <= p <= 1:
        raise argparse.ArgumentTypeError("p must lie in [0, 1]")
    return ("white", p)


def _cache(args) -> CurveCache:
    directory = args.curve_cache or os.environ.get("SPINDEPTH_CACHE")
    grid = DEFAULT_GRID
    changes = {}
    if args.lambda_max is not None:
        changes["lambda_max_factor"] = args.lambda_max
    if args.resolution is not None:
        changes["resolution"] = args.resolution
    if changes:
        grid = GridSpec(**{**grid.__dict__, **changes})
    return CurveCache(directory, grid)


def _result_row(rec_index: int, r: CriterionResult) -> dict:
    return {"record": rec_index, **r.to_dict()}


# --------------------------------------------------------------------------
# subcommands


def cmd_curve(args) -> int:
    cache = _cache(args)
    Js = [SpinLength(t) for t in args.two_j] if args.two_j else [SpinLength.of(J) for J in figures.FIG1_J]
    rows = []
    for kind in ("F", "G") if args.kind == "both" else (args.kind,):
        for r in figures.curve_table(cache, Js, kind):
            rows.append({"kind": kind, **r})
    write_table(rows, args.format, args.out)
    if args.plot:
        from .plotting import plot_curves

        plot_curves([r for r in rows if r["kind"] == rows[-1]["kind"]], args.plot, ylabel=f"{rows[-1]['kind']}_J(X)")
    return EXIT_OK


def cmd_boundary(args) -> int:
    cache = _cache(args)
    j = SpinLength(args.two_j)
    ks = _k_list(args, args.N, j)
    for k in ks:
        if not j.times(k).is_integer and not args.allow_half_integer:
            raise UsageError(f"k*j = {j.times(k)} is half-integer; pass --allow-half-integer")
    rows = []
    for k in ks:
        rows += [{"k": k, **r} for r in figures.fig2_data(cache, args.N, j, k)]
    write_table(rows, args.format, args.out)
    if args.plot:
        from .plotting import plot_boundaries

        plot_boundaries([r for r in rows if r["k"] == ks[0]], args.plot)
    return EXIT_OK


def _load_records(path: str) -> list[MeasurementRecord | str]:
    """Records from a file; malformed rows become error strings."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such input file: {path}")
    out = []
    for row in read_rows(p):
        try:
            out.append(record_from_dict(row))
        except (KeyError, TypeError, ValueError) as exc:
            out.append(f"{type(exc).__name__}: {exc}")
    return out


def cmd_evaluate(args) -> int:
    cache = _cache(args)
    recs = _load_records(args.input)
    rows, any_applicable = [], False
    for i, rec in enumerate(recs):
        if isinstance(rec, str):
            rows.append({"record": i, "criterion": args.criterion, "error": rec})
            continue
        for k in _k_list(args, rec.N, rec.j, args.criterion):
            try:
                r = evaluate_criterion(rec, args.criterion, k, cache)
            except (ConvergenceFailure, ConstraintInfeasible):
                raise
            except SpinDepthError as exc:
                rows.append({"record": i, "criterion": args.criterion, "k": k, "error": f"{type(exc).__name__}: {exc}"})
                continue
            any_applicable |= r.applicable
            rows.append(_result_row(i, r))
    write_table(rows, args.format, args.out)
    return EXIT_OK if any_applicable else EXIT_INAPPLICABLE


def cmd_depth(args) -> int:
    cache = _cache(args)
    recs = _load_records(args.input)
    rows, any_applicable = [], False
    for i, rec in enumerate(recs):
        if isinstance(rec, str):
            rows.append({"record": i, "criterion": args.criterion, "error": rec})
            continue
        try:
            v = detect_depth(rec, args.criterion, cache, args.allow_half_integer, args.strategy,
                             tuple(args.k_range) if args.k_range else None)
        except (ConvergenceFailure, ConstraintInfeasible):
            raise
        except SpinDepthError as exc:
            rows.append({"record": i, "criterion": args.criterion, "error": f"{type(exc).__name__}: {exc}"})
            continue
        any_applicable |= v.any_applicable
        d = v.to_dict()
        d["evaluated_k"] = " ".join(map(str, d["evaluated_k"]))
        d["monotonicity_violations"] = " ".join(map(str, d["monotonicity_violations"]))
        rows.append({"record": i, **d})
    write_table(rows, args.format, args.out)
    return EXIT_OK if any_applicable else EXIT_INAPPLICABLE


def _mus(args) -> list[float]:
    if args.mu:
        return list(args.mu)
    if args.mu_range:
        lo, hi, n = args.mu_range.split(":")
        return [0.0] + list(np.geomspace(float(lo), float(hi), int(n) - 1))
    return list(figures.fig3_mu_grid())


def _simulated_records(args) -> list[tuple[dict, MeasurementRecord]]:
    j = SpinLength(args.two_j)
    N = args.N
    kind, par = args.noise if args.noise else ("none", 0)
    out = []
    if args.state == "squeezed":
        if j.two_J != 1:
            raise UsageError("squeezed states are defined for --two-j 1")
        for mu in _mus(args):
            s = squeezed_state_moments(N, mu)
            if kind == "decohere":
                s = decohere_particles(s, par)
            elif kind == "white":
                raise UsageError("white noise on squeezed states is not supported; use decohere:m")
            out.append(({"mu": float(mu)}, s.to_record()))
    elif args.state == "dicke":
        p = par if kind == "white" else 0.0
        if kind == "decohere":
            raise UsageError("use p noise with Dicke states")
        out.append(({"p": p}, noisy_dicke_moments(N, j, p) if p else dicke_moments(N, j)))
    elif args.state == "random":
        if not args.partition:
            raise UsageError("--partition is required for random states")
        part = [int(t) for t in args.partition.split(",")]
        rng = np.random.default_rng(args.seed)
        for s in range(args.samples):
            out.append(({"sample": s}, random_producible_moments(N, j, part, rng)))
    return out


def cmd_simulate(args) -> int:
    cache = _cache(args)
    criteria = args.criterion or ["nonlinear", "sorensen_molmer"]
    rows = []
    for tag, rec in _simulated_records(args):
        row = {**tag, "N": rec.N, "two_j": rec.j.two_J, "var_Jx": rec.var_Jx, "mean_Jz": rec.mean_Jz,
               "second_moment_perp": rec.second_moment_perp, "squeezing_dB": figures.squeezing_db(rec)}
        for c in criteria:
            try:
                v = detect_depth(rec, c, cache, args.allow_half_integer, args.strategy)
                row[f"depth_{c}"] = v.certified_depth
            except (ConvergenceFailure, ConstraintInfeasible):
                raise
            except SpinDepthError as exc:
                row[f"depth_{c}"] = f"error: {exc}"
        rows.append(row)
    write_table(rows, args.format, args.out)
    if args.plot and args.state == "squeezed" and set(criteria) >= {"nonlinear", "sorensen_molmer"}:
        from .plotting import plot_depths

        plot_depths([{"mu": r["mu"], "depth_nonlinear": r["depth_nonlinear"],
                      "depth_sm": r["depth_sorensen_molmer"]} for r in rows], args.plot)
    return EXIT_OK


def cmd_fluctuating(args) -> int:
    cache = _cache(args)
    p = Path(args.input)
    if not p.exists():
        raise UsageError(f"no such input file: {args.input}")
    ens = ShotEnsemble.read(p, SpinLength(args.two_j) if args.two_j else None)
    N_min = min(b.N for b in ens.bins)
    ks = _k_list(args, N_min, ens.j, "xi2" if args.criterion in ("xi2", "xi2_sm") else args.criterion)
    rows, any_applicable = [], False
    for k in ks:
        try:
            if args.criterion == "nonlinear":
                r = fluctuating_nonlinear(ens, k, cache.G(ens.j.times(k)))
            elif args.criterion == "sorensen_molmer":
                r = fluctuating_sm(ens, k, cache.F(ens.j.times(k)))
            else:
                r = fluctuating_linear_parameters(ens, k)[f"{args.criterion}_fluct"]
        except (ConvergenceFailure, ConstraintInfeasible):
            raise
        except SpinDepthError as exc:
            rows.append({"criterion": args.criterion, "k": k, "error": f"{type(exc).__name__}: {exc}"})
            continue
        any_applicable |= r.applicable
        rows.append({"mean_N": ens.mean_N, **r.to_dict()})
    write_table(rows, args.format, args.out)
    return EXIT_OK if any_applicable else EXIT_INAPPLICABLE


def cmd_figures(args) -> int:
    """Write every figure table (and PNGs unless --no-plot) into a directory."""
    from . import plotting

    cache = _cache(args)
    out = Path(args.out_dir)
    ext = "csv" if args.format == "csv" else "jsonl"
    tables = {
        "fig1_G_curves": figures.fig1_data(cache),
        "fig2_boundaries": figures.fig2_data(cache),
        "fig2_inset": figures.fig2_inset_data(cache),
        "fig3_depth": figures.fig3_data(cache, mus=_mus(args)),
        "fig4_G_slopes": figures.fig4_data(cache),
    }
    for name, rows in tables.items():
        write_table(rows, args.format, str(out / f"{name}.{ext}"))
    if not args.no_plot:
        plotting.plot_curves(tables["fig1_G_curves"], out / "fig1_G_curves.png")
        plotting.plot_boundaries(tables["fig2_boundaries"], out / "fig2_boundaries.png", tables["fig2_inset"])
        plotting.plot_depths(tables["fig3_depth"], out / "fig3_depth.png")
        plotting.plot_curves(tables["fig4_G_slopes"], out / "fig4_G_slopes.png", "dG_J/dX", "derivative")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--curve-cache", help="curve cache directory (default: $SPINDEPTH_CACHE, else memory only)")
    common.add_argument("--lambda-max", type=float, help="sweep up to lambda = LAMBDA_MAX * J")
    common.add_argument("--resolution", type=float, help="target spacing of curve samples")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--allow-half-integer", action="store_true",
                        help="also use curves for half-integer kj")
    common.add_argument("-v", "--verbose", action="store_true")

    def kopts(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--k", type=int, action="append")
        g.add_argument("--k-range", type=_range, metavar="LO:HI")

    parser = argparse.ArgumentParser(prog="spindepth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", parents=[common], help="compute and emit F/G boundary curves")
    p.add_argument("--two-j", type=int, action="append", help="2J (repeatable; default odd J=1..19)")
    p.add_argument("--kind", choices=("F", "G", "both"), default="G")
    p.add_argument("--plot", help="also render a PNG here")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("boundary", parents=[common], help="producibility boundaries in the variance plane")
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--two-j", type=int, default=1)
    kopts(p)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a criterion on measurement records")
    p.add_argument("--input", required=True, help="records (.csv or .json)")
    p.add_argument("--criterion", choices=CRITERIA, default="nonlinear")
    kopts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("depth", parents=[common], help="certified entanglement depth per record")
    p.add_argument("--input", required=True)
    p.add_argument("--criterion", choices=CRITERIA, default="nonlinear")
    p.add_argument("--strategy", choices=("bisect", "scan"), default="bisect")
    p.add_argument("--k-range", type=_range, metavar="LO:HI")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("simulate", parents=[common], help="depth tables for reference states")
    p.add_argument("--state", choices=("squeezed", "dicke", "random"), default="squeezed")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--two-j", type=int, default=1)
    p.add_argument("--mu", type=float, action="append")
    p.add_argument("--mu-range", metavar="LO:HI:N", help="mu = 0 plus N-1 log-spaced values")
    p.add_argument("--noise", type=_noise, help="white-noise weight p, or decohere:m")
    p.add_argument("--partition", help="group sizes for random states, e.g. 2,2,3")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--criterion", choices=CRITERIA, action="append")
    p.add_argument("--strategy", choices=("bisect", "scan"), default="bisect")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fluctuating", parents=[common], help="criteria for fluctuating particle number")
    p.add_argument("--input", required=True, help="shot CSV (shot_id,N,Jx,Jy,Jz) or binned JSON")
    p.add_argument("--two-j", type=int)
    p.add_argument("--criterion", choices=("nonlinear", "sorensen_molmer", "xi2", "xi2_sm"), default="nonlinear")
    kopts(p)
    p.set_defaults(func=cmd_fluctuating)

    p = sub.add_parser("figures", parents=[common], help="write all figure tables and PNGs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mu-range", metavar="LO:HI:N")
    p.add_argument("--mu", type=float, action="append")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "simulate" and args.state == "squeezed" and args.N % 2:
        parser.error("squeezed states need an even --N")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spindepth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceFailure, ConstraintInfeasible, FloatingPointError) as exc:
        print(f"spindepth: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SpinDepthError, ValueError) as exc:
        print(f"spindepth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
