"""Command-line interface: ``oulab {analyze, simulate, chaos, sweep, example}``.

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .chaos import ChaosBasis, transition_chaos, whiten
from .config import PROFILES, get_profile
from .covariance import invariant_covariance
from .diagnostics import analyze, s_infinity_norm, spectral_gap
from .engine import sample_path, sample_transition
from .errors import ModelError, NumericalError
from .io import csv_text, dump_json, load_model, report_to_dict, write_csv, write_text_atomic
from .model import BUILTIN_DESCRIPTIONS, BUILTINS, builtin

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def _load(args):
    tol = get_profile(args.tol_profile)
    if args.builtin and args.model:
        raise ModelError("give either --builtin or --model, not both")
    if args.builtin:
        model = builtin(args.builtin)
        model.tol = tol
        return model, []
    if args.model:
        cfg = load_model(args.model, tol)
        return cfg.model, cfg.times
    raise ModelError("one of --builtin or --model is required")


def _emit(text: str, out: str | None) -> None:
    if out:
        write_text_atomic(out, text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    model, times = _load(args)
    times = args.times or times or [0.5, 1.0, 2.0]
    report = analyze(model, times)
    _emit(dump_json(report_to_dict(report)), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model, _ = _load(args)
    x0 = np.zeros(model.n) if args.x0 is None else np.array(args.x0, dtype=float)
    header = ["t"] + [f"x_{j + 1}" for j in range(model.n)]
    if args.path:
        grid = np.linspace(0.0, args.t, args.path + 1)
        path = sample_path(model, x0, grid, args.seed)
        rows = [[t, *x] for t, x in zip(path.times, path.states)]
    else:
        X = sample_transition(model, x0, args.t, args.count, args.seed)
        rows = [[args.t, *x] for x in X]
    _emit(csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_chaos(args) -> int:
    model, _ = _load(args)
    if model.is_diagonal:
        ChaosBasis(model.n, args.order)  # size check before any dense work
    op = transition_chaos(model, args.t, args.order)
    if args.out_dir:
        d = Path(args.out_dir)
        for k, B in enumerate(op.blocks):
            labels = ["".join(map(str, a)) for a in op.basis.indices(k)]
            write_csv(d / f"block_{k}.csv", labels, B.tolist())
    summary = {"t": args.t, "order": args.order, "m": op.basis.m,
               "block_sizes": op.basis.block_sizes, "block_norms": op.block_norms()}
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def _sweep_diagonal(model, grid):
    """Rows for a stable diagonal model, where C(t) = S_inf(t) = diag(e^{-at})."""
    gap = spectral_gap(model)
    a_min = float(model.a_diag.min())
    rows = []
    for t in grid:
        norm = math.exp(-t * a_min)
        rows.append([float(t), norm, math.exp(-t * gap.gap_omega), norm])
    return rows


def cmd_sweep(args) -> int:
    model, _ = _load(args)
    grid = np.linspace(args.t_min, args.t_max, args.num)
    if model.is_diagonal and np.all(model.a_diag > 0):
        _emit(csv_text(["t", "s_inf_norm", "exp_bound", "block1_norm"], _sweep_diagonal(model, grid)), args.out)
        return EXIT_OK
    X, _, how = invariant_covariance(model)
    if X is None:
        raise NumericalError(f"invariant covariance unavailable ({how})")
    gap = spectral_gap(model, X)
    white = whiten(model, X)

    def row(t):
        norm = s_infinity_norm(model, float(t), X)
        bound = math.exp(-t * gap.gap_omega) if gap.gap_omega else math.inf
        block1 = float(np.linalg.norm(white.C(float(t)).T, 2))
        return [float(t), norm, bound, block1]

    with ThreadPoolExecutor() as pool:
        rows = list(pool.map(row, grid))
    _emit(csv_text(["t", "s_inf_norm", "exp_bound", "block1_norm"], rows), args.out)
    return EXIT_OK


def cmd_example(args) -> int:
    if args.name is None:
        for name in BUILTINS:
            sys.stdout.write(f"{name:20s} {BUILTIN_DESCRIPTIONS[name]}\n")
        return EXIT_OK
    model = builtin(args.name)
    sys.stdout.write(f"{args.name}: {BUILTIN_DESCRIPTIONS[args.name]}\n")
    if not model.is_diagonal or model.n <= 10:
        sys.stdout.write(f"A =\n{model.A}\ni_factor =\n{model.i_factor}\n")
    for k, v in model.params.items():
        sys.stdout.write(f"{k}: {v}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oulab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p):
        p.add_argument("--builtin", choices=sorted(BUILTINS))
        p.add_argument("--model", help="model JSON file")
        p.add_argument("--tol-profile", choices=sorted(PROFILES), default=None,
                       help="tolerance profile (default: $OULAB_TOL_PROFILE or 'default')")
        p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("analyze", help="run all diagnostics and emit a JSON report")
    model_args(p)
    p.add_argument("--times", type=float, nargs="+", help="times for the strong Feller check")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="exact samples of X(t) (or one path) as CSV")
    model_args(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0", type=float, nargs="+")
    p.add_argument("--path", type=int, default=0, help="emit one path with this many steps instead")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("chaos", help="blocks of P(t) on Wiener chaos")
    model_args(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--out-dir", help="write block_k.csv files here")
    p.set_defaults(func=cmd_chaos)

    p = sub.add_parser("sweep", help="CSV of |S_inf(t)|, exp bound and block-1 norm over a t grid")
    model_args(p)
    p.add_argument("--t-min", type=float, default=0.05)
    p.add_argument("--t-max", type=float, default=5.0)
    p.add_argument("--num", type=int, default=100)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("example", help="list builtin models or describe one")
    p.add_argument("name", nargs="?", choices=sorted(BUILTINS))
    p.set_defaults(func=cmd_example)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (ModelError, ValueError) as exc:
        print(f"oulab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"oulab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run_cli())
