"""Command-line entry point: ``secmargin <subcommand> ...``.

JSON goes to stdout and diagnostics to stderr. Exit codes: 0 success,
2 bad input, 3 solver failure, 4 problem too large for the chosen method.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings

import numpy as np

from .attack import DistortionBudget, apply_map_to_sequence, optimal_attack_map, optimal_attack_map_tr
from .game import (
    GameConfig,
    ScaleGuardError,
    fn_error_exponent,
    fn_error_exponent_lambda,
    simulate_game,
    tr_error_exponent,
)
from .margin import ContinuousSource, load_tabulated_source, security_margin, security_margin_linf, sm_continuous
from .pmf import empirical_type, load_pmf, load_sequence, save_sequence
from .transport import CostSpec, load_cost_matrix, optimal_map

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_SCALE = 0, 2, 3, 4
DIGITS = 12


class SolverFailure(RuntimeError):
    pass


def _round(obj):
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not math.isfinite(x) else float(f"{x:.{DIGITS}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _fmt(x) -> str:
    return f"{float(x):.{DIGITS}g}"


def emit(obj) -> None:
    print(json.dumps(_round(obj)))


def _cost(args) -> CostSpec:
    if args.metric == "lp":
        return CostSpec.lp(args.p_exp)
    if args.metric == "hamming":
        return CostSpec.hamming()
    if args.metric == "matrix":
        if not args.cost_file:
            raise ValueError("--cost-file is required with the matrix cost")
        return load_cost_matrix(args.cost_file)
    raise ValueError(f"metric {args.metric!r} is not an additive cost")


def _budget(args) -> DistortionBudget:
    if args.metric == "linf":
        return DistortionBudget("linf", args.lmax)
    return DistortionBudget(_cost(args), args.lmax)


def _metric_flags(p, choices, flag="--metric", default="lp"):
    p.add_argument(flag, dest="metric", choices=choices, default=default)
    p.add_argument("--p-exp", type=float, default=1.0, help="exponent for the lp cost |i-j|^p")
    p.add_argument("--cost-file", help="CSV cost matrix for the matrix cost")


def _check(res) -> None:
    if not res.converged:
        raise SolverFailure(f"solver stopped with gap {res.gap:.3g}")


def run_emd(args) -> int:
    p, q = load_pmf(args.p), load_pmf(args.q)
    value, tmap, method = optimal_map(p, q, _cost(args))
    out = {"value": value, "method": method}
    if args.emit_map:
        out["map"] = tmap.to_dict()
    emit(out)
    return EXIT_OK


def _continuous(text: str) -> ContinuousSource:
    fam, _, rest = text.partition(":")
    if fam in ("gaussian", "laplacian"):
        mu, sigma = (float(v) for v in rest.split(":"))
        return ContinuousSource(fam, mu, sigma)
    if fam == "tabulated":
        return load_tabulated_source(rest)
    raise ValueError(f"source must be gaussian:MU:SIGMA, laplacian:MU:SIGMA or tabulated:FILE, got {text!r}")


def run_sm(args) -> int:
    if args.x or args.y:
        if not (args.x and args.y):
            raise ValueError("--x and --y must be given together")
        report = sm_continuous(_continuous(args.x), _continuous(args.y), args.p_exp, args.grid)
    else:
        if not (args.p and args.q):
            raise ValueError("either --p/--q or --x/--y is required")
        p, q = load_pmf(args.p), load_pmf(args.q)
        if args.metric == "linf":
            report = security_margin_linf(p, q)
        else:
            report = security_margin(p, q, _cost(args))
    emit(report.to_dict(emit_map=args.emit_map))
    return EXIT_OK


def run_attack(args) -> int:
    target = load_pmf(args.target)
    y = load_sequence(args.seq)
    p_y = empirical_type(y, target.size, target.offset)
    budget = _budget(args)
    if args.mode == "tr":
        if not args.training:
            raise ValueError("--training is required in tr mode")
        t = load_sequence(args.training)
        c = args.c if args.c is not None else t.size / y.size
        sol = optimal_attack_map_tr(p_y, empirical_type(t, target.size, target.offset), budget, c)
    else:
        sol = optimal_attack_map(p_y, target, budget)
    z = apply_map_to_sequence(y, sol.map, args.seed)
    if budget.is_linf:
        realized = float(np.max(np.abs(z - y))) if y.size else 0.0
    else:
        realized = float(np.mean(budget.metric.grid(target.size, target.size, target.offset, target.offset)[y - target.offset, z - target.offset]))
    if args.out:
        save_sequence(z, args.out)
    report = sol.to_dict()
    report["realized_distortion"] = realized
    report["n"] = int(y.size)
    emit(report)
    _check(sol)
    return EXIT_OK


def _sweep(text: str) -> np.ndarray:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"sweep must be start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise ValueError("sweep needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _exponent(args, p_x, p_y, budget):
    if args.mode == "tr":
        if args.c is None:
            raise ValueError("--c is required in tr mode")
        return tr_error_exponent(p_x, p_y, budget, args.c, args.lam or 0.0)
    if args.lam:
        return fn_error_exponent_lambda(p_x, p_y, args.lam, budget)
    return fn_error_exponent(p_x, p_y, budget)


def run_exponent(args) -> int:
    p_x, p_y = load_pmf(args.px), load_pmf(args.py)
    budget = _budget(args)
    if args.lmax_sweep:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["l_max", "epsilon_bits", "gap", "converged"])
        failed = False
        for l in _sweep(args.lmax_sweep):
            res = _exponent(args, p_x, p_y, budget.with_l_max(float(l)))
            writer.writerow([_fmt(l), _fmt(res.epsilon_bits), _fmt(res.gap), int(res.converged)])
            failed |= not res.converged
        if failed:
            raise SolverFailure("at least one sweep point did not converge")
        return EXIT_OK
    res = _exponent(args, p_x, p_y, budget)
    emit(res.to_dict())
    _check(res)
    return EXIT_OK


def _values(text: str, cast) -> list:
    return [cast(v) for v in str(text).split(",") if v.strip()]


def run_simulate(args) -> int:
    p_x, p_y = load_pmf(args.px), load_pmf(args.py)
    ns = _values(args.n, int)
    lams = _values(args.lam, float)
    lmaxes = _values(args.lmax, float)
    if not args.csv and (len(ns), len(lams), len(lmaxes)) != (1, 1, 1):
        raise ValueError("comma-separated sweeps need --csv")
    rows = []
    for n in ns:
        for lam in lams:
            for lmax in lmaxes:
                args.lmax = lmax
                cfg = GameConfig(p_x, p_y, n, lam, _budget(args), args.trials, args.seed, args.mode, args.c)
                rows.append((n, lam, lmax, simulate_game(cfg)))
    if not args.csv:
        emit(rows[0][3].to_dict())
        return EXIT_OK
    writer = csv.writer(sys.stdout, lineterminator="\n")
    keys = ["fp_count", "fn_count", "trials", "fp_rate", "fn_rate",
            "empirical_fn_exponent", "theoretical_exponent", "fp_bound"]
    writer.writerow(["n", "lambda", "l_max"] + keys)
    for n, lam, lmax, out in rows:
        d = out.to_dict()
        writer.writerow([n, _fmt(lam), _fmt(lmax)] + [
            d[k] if isinstance(d[k], int) else _fmt(d[k]) for k in keys
        ])
    return EXIT_OK


def run_validate(args) -> int:
    out = {}
    if args.pmf:
        p = load_pmf(args.pmf, renormalize=not args.strict)
        out["pmf"] = {"offset": p.offset, "size": p.size, "support": p.support.tolist()}
    if args.seq:
        seq = load_sequence(args.seq)
        out["sequence"] = {"length": int(seq.size),
                           "min": int(seq.min()) if seq.size else None,
                           "max": int(seq.max()) if seq.size else None}
        if args.pmf:
            empirical_type(seq, p.size, p.offset)
    if args.cost_file:
        cost = load_cost_matrix(args.cost_file)
        out["cost"] = {"shape": list(cost.matrix.shape), "symmetric": cost.symmetric}
    if not out:
        raise ValueError("nothing to validate: pass --pmf, --seq or --cost-file")
    out["valid"] = True
    emit(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="secmargin", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("emd", help="earth mover distance between two pmf files")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    _metric_flags(p, ["lp", "hamming", "matrix"], flag="--cost")
    p.add_argument("--emit-map", action="store_true")
    p.set_defaults(func=run_emd)

    p = sub.add_parser("sm", help="security margin of two sources")
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--x", help="continuous source: gaussian:MU:SIGMA, laplacian:MU:SIGMA or tabulated:FILE")
    p.add_argument("--y", help="second continuous source")
    p.add_argument("--grid", type=int, default=100_000)
    _metric_flags(p, ["lp", "hamming", "matrix", "linf"])
    p.add_argument("--emit-map", action="store_true")
    p.set_defaults(func=run_sm)

    p = sub.add_parser("attack", help="apply the optimal attack to a sequence")
    p.add_argument("--seq", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--lmax", type=float, required=True)
    _metric_flags(p, ["lp", "hamming", "matrix", "linf"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--mode", choices=["ks", "tr"], default="ks")
    p.add_argument("--training", help="training sequence file (tr mode)")
    p.add_argument("--c", type=float, help="training ratio N/n (tr mode)")
    p.set_defaults(func=run_attack)

    p = sub.add_parser("exponent", help="false-negative error exponent")
    p.add_argument("--px", required=True)
    p.add_argument("--py", required=True)
    p.add_argument("--lmax", type=float, default=0.0)
    _metric_flags(p, ["lp", "hamming", "matrix", "linf"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mode", choices=["ks", "tr"], default="ks")
    p.add_argument("--c", type=float)
    p.add_argument("--lmax-sweep", help="start:stop:step, emits CSV")
    p.set_defaults(func=run_exponent)

    p = sub.add_parser("simulate", help="Monte Carlo run of the detection game")
    p.add_argument("--px", required=True)
    p.add_argument("--py", required=True)
    p.add_argument("--n", required=True, help="sequence length (comma list with --csv)")
    p.add_argument("--lambda", dest="lam", required=True, help="false-positive exponent in bits")
    p.add_argument("--lmax", required=True)
    _metric_flags(p, ["lp", "hamming", "matrix", "linf"])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["ks", "tr"], default="ks")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("validate", help="check input files")
    p.add_argument("--pmf")
    p.add_argument("--seq")
    p.add_argument("--cost-file")
    p.add_argument("--strict", action="store_true", help="no renormalization of pmf files")
    p.set_defaults(func=run_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except ScaleGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCALE
    except SolverFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
