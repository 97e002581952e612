"""Command-line front end: ``msprox {generate,recast,solve,admm,bench}``.

Exit status: 0 on success, 1 when ``--strict`` is set and a solve or ADMM run
did not converge, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _backend, admm, bench
from ._rng import make_rng
from .canonical import DEFAULT_MULTIPLIER_SLACK, DEFAULT_STATIONARITY_TOL, CanonicalInstance, certify
from .recast import DEFAULT_RANK_REL_TOL, ComplexProxInstance, canonicalize, complex_objective, lift_solution
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, Init, Method, SolverOptions, StepRule, solve

log = logging.getLogger("msprox")

METHODS = {"gd": Method.GRADIENT_DESCENT, "newton": Method.NEWTON_DENSE, "sm-newton": Method.NEWTON_SM}
STEPS = {"unit": StepRule.UNIT, "optimal": StepRule.OPTIMAL}
INITS = {"warm": Init.WARM, "random": Init.RANDOM, "given": Init.GIVEN}


class InputError(Exception):
    """Bad input file; reported with exit status 2."""


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def _parse(path, builder):
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    try:
        return builder(data)
    except KeyError as exc:
        raise InputError(f"{path}: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid field value: {exc}") from exc


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _solver_options(args) -> SolverOptions:
    x0 = None
    if args.init == "given":
        if not args.x0:
            raise InputError("--init given requires --x0 FILE")
        data = _load_json(args.x0)
        x0 = np.asarray(data["x0"] if isinstance(data, dict) else data, dtype=float)
    return SolverOptions(
        method=METHODS[args.method],
        step_rule=STEPS[args.step],
        init=INITS[args.init],
        x0=x0,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        trace=args.trace,
        time_limit=args.time_limit,
    )


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=sorted(METHODS), default="sm-newton", help="direction rule (default: sm-newton)")
    g.add_argument("--step", choices=sorted(STEPS), default="unit", help="step rule (default: unit)")
    g.add_argument("--init", choices=sorted(INITS), default="warm", help="starting point (default: warm)")
    g.add_argument("--x0", metavar="FILE", help="JSON list (or {\"x0\": [...]}) for --init given")
    g.add_argument("--tol", type=float, default=DEFAULT_TOL, help="stop when grad^T grad <= tol (default: 1e-6)")
    g.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="iteration cap (default: 50000)")
    g.add_argument("--time-limit", type=float, default=None, help="seconds per solve (default: none)")
    g.add_argument("--trace", action="store_true", help="record per-iteration trace in the report")


# ------------------------------------------------------------------ commands


def cmd_generate(args):
    if args.canonical:
        if args.n < 4 or args.n % 2:
            raise InputError("--n must be even and >= 4 for canonical sampling")
        inst = bench.sample_instance(args.n, args.b, args.seed)
        _write(json.dumps(inst.to_dict()) + "\n", args.output)
        return 0
    rng = make_rng(args.seed)
    k, m = args.k, args.m

    def cmat(rows, cols):
        return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2 * cols)

    if args.multispectral:
        problem = admm.random_problem(args.terms, m, k, args.seed, None if args.feasible else args.b)
        _write(json.dumps(problem.to_dict()) + "\n", args.output)
        return 0
    a = cmat(k, m)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    b = args.b
    if args.feasible:
        y_true = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        b = float(np.vdot(a @ y_true, a @ y_true).real)
    inst = ComplexProxInstance.from_complex(a, w, b, args.rho)
    _write(json.dumps(inst.to_dict()) + "\n", args.output)
    return 0


def cmd_recast(args):
    inst = _parse(args.input, ComplexProxInstance.from_dict)
    canon, rmap = canonicalize(inst, args.rank_rel_tol)
    _write(json.dumps(canon.to_dict()) + "\n", args.output)
    if args.map:
        Path(args.map).write_text(
            json.dumps(
                {
                    "basis": rmap.basis.tolist(),
                    "eigenvalues": rmap.eigenvalues.tolist(),
                    "signs": rmap.signs.tolist(),
                    "null_payload": rmap.null_payload.tolist(),
                    "n_eff": rmap.n_eff,
                }
            )
            + "\n"
        )
    log.info("canonical dimension %d (M=%d, K=%d)", rmap.n_eff, inst.m, inst.k)
    return 0


def cmd_solve(args):
    data = _load_json(args.input)
    if not isinstance(data, dict):
        raise InputError(f"{args.input}: expected a JSON object")
    complex_input = "a_real" in data
    builder = ComplexProxInstance.from_dict if complex_input else CanonicalInstance.from_dict
    try:
        inst = builder(data)
    except KeyError as exc:
        raise InputError(f"{args.input}: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.input}: invalid field value: {exc}") from exc
    canon, rmap = canonicalize(inst, args.rank_rel_tol) if complex_input else (inst, None)
    opts = _solver_options(args)
    rep = solve(canon, opts)
    cert = certify(rep.x_star, canon, args.stationarity_tol, args.multiplier_slack)
    out = rep.to_dict()
    out["certificate"] = cert.to_dict()
    if rmap is not None:
        y = lift_solution(rep.x_star, rmap)
        out["y_real"] = y.real.tolist()
        out["y_imag"] = y.imag.tolist()
        out["complex_objective"] = complex_objective(y, inst)
    if args.output:
        Path(args.output).write_text(_dump(out))
    if args.json:
        summary = {k: out[k] for k in ("objective", "grad_sq_norm", "iterations", "termination")}
        summary["certified"] = cert.is_certified
        print(json.dumps(summary))
    else:
        print(
            f"objective={rep.objective:.12g} grad_sq_norm={rep.grad_sq_norm:.3e} "
            f"iterations={rep.iterations} termination={rep.termination.name} "
            f"certified={'yes' if cert.is_certified else 'no'}"
        )
    if args.strict and not (rep.converged and cert.is_certified):
        return 1
    return 0


def cmd_admm(args):
    problem = _parse(args.input, admm.MultispectralProblem.from_dict)
    opts = admm.AdmmOptions(
        rho=args.rho,
        max_outer=args.max_outer,
        eps_abs=args.eps_abs,
        eps_rel=args.eps_rel,
        inner=_solver_options(args),
        seed=args.seed,
        workers=args.workers,
    )
    try:
        res = admm.admm_solve(problem, opts)
    except admm.ProxSolveError as exc:
        log.error("%s", exc)
        return 1
    if args.history:
        admm.write_history_csv(res.history, args.history)
    out = res.to_dict()
    if args.output:
        Path(args.output).write_text(_dump(out))
    summary = {k: out[k] for k in ("objective", "primal_residual", "dual_residual", "outer_iteration", "converged")}
    if args.json:
        print(json.dumps(summary))
    else:
        print(" ".join(f"{k}={v}" for k, v in summary.items()))
    if args.strict and not res.converged:
        return 1
    return 0


def _parse_variants(text):
    if text == "all":
        return bench.ALL_VARIANTS
    out = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise InputError(f"variant {item!r} must look like method:step:init")
        m, s, i = parts
        if m not in METHODS or s not in STEPS or i not in ("warm", "random"):
            raise InputError(f"unknown variant {item!r}")
        out.append((METHODS[m], STEPS[s], INITS[i]))
    return tuple(out)


def cmd_bench(args):
    try:
        grid = tuple(int(v) for v in args.n_grid.split(",")) if args.n_grid else tuple(bench.default_n_grid())
    except ValueError as exc:
        raise InputError(f"--n-grid: {exc}") from exc
    if args.figure2:
        config = bench.figure2_config(args.seed, trials=args.trials)
        if args.n_grid:
            config = bench.BenchConfig(n_grid=grid, trials_per_n=args.trials, b=args.b,
                                       variants=config.variants, base_seed=args.seed,
                                       time_limit=args.time_limit)
    else:
        config = bench.BenchConfig(
            n_grid=grid,
            trials_per_n=args.trials,
            b=args.b,
            variants=_parse_variants(args.variants),
            base_seed=args.seed,
            time_limit=args.time_limit,
        )
    records = bench.run_grid(config, workers=args.workers)
    bench.emit_csv(records, args.out)
    if args.figure1_out:
        bench.emit_figure1(records, args.figure1_out)
    if args.figure2_out:
        bench.emit_figure2(records, args.figure2_out)
    if args.json:
        print(json.dumps(bench.summarize(records)))
    else:
        for row in bench.summarize(records):
            print(
                f"n={row['n']:5d} {row['method']:16s} {row['step_rule']:7s} {row['init']:6s} "
                f"median_iter={row['median_iterations']:9.1f} median_time={row['median_wall_time']:.3e}s "
                f"capped={row['cap_fraction']:.2f}"
            )
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msprox", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 ({_backend.BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random instance")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--canonical", action="store_true", help="canonical instance via Monte Carlo sampling")
    kind.add_argument("--complex", action="store_true", help="complex prox instance")
    kind.add_argument("--multispectral", action="store_true", help="multi-term problem for admm")
    p.add_argument("--n", type=int, default=16, help="canonical dimension (even, >= 4)")
    p.add_argument("--k", type=int, default=2, help="measurements per term (complex)")
    p.add_argument("--m", type=int, default=8, help="signal dimension (complex)")
    p.add_argument("--terms", type=int, default=4, help="number of terms (multispectral)")
    p.add_argument("--b", type=float, default=bench.DEFAULT_B, help="target intensity (default: 100)")
    p.add_argument("--rho", type=float, default=1.0, help="prox penalty (default: 1)")
    p.add_argument("--feasible", action="store_true", help="plant b = |A y_true|^2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("recast", help="complex instance -> canonical instance")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--map", help="also write the recast map JSON here")
    p.add_argument("--rank-rel-tol", type=float, default=DEFAULT_RANK_REL_TOL)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_recast)

    p = sub.add_parser("solve", help="solve a canonical or complex instance")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", help="report JSON path")
    p.add_argument("--seed", type=int, default=0, help="seed for --init random")
    p.add_argument("--rank-rel-tol", type=float, default=DEFAULT_RANK_REL_TOL)
    p.add_argument("--stationarity-tol", type=float, default=DEFAULT_STATIONARITY_TOL,
                   help="certificate bound on max|grad| (default: sqrt(1e-6))")
    p.add_argument("--multiplier-slack", type=float, default=DEFAULT_MULTIPLIER_SLACK)
    p.add_argument("--strict", action="store_true", help="exit 1 unless converged and certified")
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("admm", help="consensus ADMM on a multispectral problem")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", help="final state JSON path")
    p.add_argument("--history", help="residual history CSV path")
    p.add_argument("--rho", type=float, default=1.0, help="penalty (default: 1)")
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--eps-abs", type=float, default=1e-6)
    p.add_argument("--eps-rel", type=float, default=1e-4)
    p.add_argument("--workers", type=int, default=1, help="threads for the per-term prox solves")
    p.add_argument("--seed", type=int, default=0, help="seed for the consensus start")
    p.add_argument("--strict", action="store_true", help="exit 1 unless converged")
    p.add_argument("--json", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_admm)

    p = sub.add_parser("bench", help="Monte Carlo method comparison")
    p.add_argument("--n-grid", help="comma-separated even sizes (default: 20 log-spaced in [10, 2000])")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--b", type=float, default=bench.DEFAULT_B)
    p.add_argument("--variants", default="all", help="'all' or method:step:init,... (e.g. sm-newton:unit:warm)")
    p.add_argument("--figure2", action="store_true", help="sensitivity study: sm-newton/unit/warm, 12 sizes")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per solve")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--out", required=True, help="per-trial CSV path")
    p.add_argument("--figure1-out", help="aggregated per-cell CSV path")
    p.add_argument("--figure2-out", help="per-trial covariate CSV path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"msprox {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
