"""Command-line front end: completion solves, benchmarks, HOSVD, checks.

Outputs are plot-ready CSV traces plus JSON summaries; there is no
interactive UI.  All commands are deterministic for a fixed seed (the wall
time column excepted).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .completion import (
    completion_objective,
    gen_synthetic,
    load_problem,
    random_tucker,
    save_problem,
)
from .oracles import CHECK_SUITES, run_check_suites
from .solvers import (
    CandidateExhaustion,
    LineSearchFailure,
    SolverConfig,
    solve_grap,
    solve_grap_r,
    solve_rfgrap,
    solve_rfgrap_r,
    write_summary_json,
    write_trace_csv,
)
from .tensor_core import load_dense
from .tucker import (
    hosvd,
    hosvd_truncate,
    load_checkpoint,
    mode_singular_values,
    save_checkpoint,
    to_dense,
)

SOLVERS = {
    "grap": solve_grap,
    "rfgrap": solve_rfgrap,
    "grap-r": solve_grap_r,
    "rfgrap-r": solve_rfgrap_r,
}

_SPECTRAL_INIT_LIMIT = 20_000_000  # densifying above this is refused


def _parse_tuple(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}")


def _default_threads() -> int:
    env = os.environ.get("TUCKEROPT_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _add_common_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=sorted(SOLVERS), default="grap-r")
    p.add_argument("--rank", type=_parse_tuple, help="rank bound r1,...,rd")
    p.add_argument("--delta", type=float, default=1e-2,
                   help="rank-decrease threshold (relative by default)")
    p.add_argument("--delta-absolute", action="store_true",
                   help="treat --delta as an absolute singular-value threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8,
                   help="stationarity stopping tolerance")
    p.add_argument("--trace", type=Path, help="write per-iteration CSV here")
    p.add_argument("--summary", type=Path, help="write summary JSON here")
    p.add_argument("--threads", type=int, default=None,
                   help="candidate-evaluation threads (default 1 or "
                        "TUCKEROPT_THREADS)")


def _make_config(args) -> SolverConfig:
    return SolverConfig(delta=args.delta, delta_absolute=args.delta_absolute,
                        max_iters=args.max_iters, stat_tol=args.tol,
                        seed=args.seed)


def _spectral_init(problem, r):
    """HOSVD of the zero-filled observations rescaled by 1/p."""
    total = int(np.prod(problem.dims, dtype=np.int64))
    if total > _SPECTRAL_INIT_LIMIT:
        raise ValueError("problem too large for spectral initialization; "
                         "use --init random")
    dense = problem.omega.to_dense() / problem.p
    return hosvd(dense, r)


def _initial_point(problem, r, args):
    if getattr(args, "resume", None):
        X0 = load_checkpoint(args.resume)
        if X0.dims != problem.dims:
            raise ValueError(f"checkpoint dims {X0.dims} do not match problem "
                             f"dims {problem.dims}")
        if any(a > b for a, b in zip(X0.rank, r)):
            X0 = hosvd_truncate(X0, tuple(min(a, b)
                                          for a, b in zip(X0.rank, r)))
        return X0
    init = getattr(args, "init", "spectral")
    if init == "random":
        return random_tucker(problem.dims, r, np.random.default_rng(args.seed))
    return _spectral_init(problem, r)


def _run_solver(problem, r, args, cfg):
    obj = completion_objective(problem)
    X0 = _initial_point(problem, r, args)
    solve = SOLVERS[args.solver]
    return solve(obj, X0, r, cfg)


def _exit_code(trace) -> int:
    if trace.termination == "converged":
        return 0
    if trace.termination == "max_iters":
        return 2
    return 1


def cmd_complete(args) -> int:
    problem = load_problem(args.problem)
    if args.rank is None:
        raise ValueError("--rank is required for complete")
    cfg = _make_config(args)
    X, trace = _run_solver(problem, args.rank, args, cfg)
    if args.trace:
        write_trace_csv(trace, args.trace, d=len(problem.dims))
    if args.summary:
        write_summary_json(trace, args.summary)
    if args.save:
        save_checkpoint(X, args.save)
    rec = trace.final()
    print(f"{args.solver}: {trace.termination} after {rec.iter} iterations, "
          f"f={rec.f_value:.6e}, stationarity={rec.stationarity:.3e}, "
          f"rank={rec.rank}"
          + (f", test_error={rec.test_error:.3e}"
             if rec.test_error is not None else ""))
    return _exit_code(trace)


_BENCH_SETTINGS = {
    "true-rank": {
        "scaled": dict(n=(40, 40, 40), r_true=(4, 4, 4),
                       ranks=[(4, 4, 4)], p=0.1),
        "paper": dict(n=(400, 400, 400), r_true=(6, 6, 6),
                      ranks=[(6, 6, 6)], p=0.01),
    },
    "over-rank": {
        "scaled": dict(n=(30, 30, 30), r_true=(2, 2, 2),
                       ranks=[(3, 3, 3), (4, 4, 4)], p=0.3),
        "paper": dict(n=(400, 400, 400), r_true=(2, 2, 2),
                      ranks=[(3, 3, 3), (4, 4, 4), (5, 5, 5), (6, 6, 6)],
                      p=0.01),
    },
}


def cmd_bench(args) -> int:
    setting = _BENCH_SETTINGS[args.suite]["paper" if args.paper_scale
                                          else "scaled"]
    n = args.n or setting["n"]
    r_true = args.true_rank or setting["r_true"]
    ranks = [args.rank] if args.rank else setting["ranks"]
    p = args.p if args.p is not None else setting["p"]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    problem, _truth = gen_synthetic(n, r_true, p, seed=args.seed)
    save_problem(problem, out / f"{args.suite}_problem", seed=args.seed,
                 r_true=r_true)
    cfg = _make_config(args)
    d = len(n)
    comparison_rows = []
    failures = []
    for r in ranks:
        label = "x".join(str(x) for x in r)
        for name, solve in sorted(SOLVERS.items()):
            obj = completion_objective(problem)
            X0 = _initial_point(problem, r, args)
            try:
                X, trace = solve(obj, X0, r, cfg)
            except (LineSearchFailure, CandidateExhaustion) as e:
                failures.append(f"{name} r={label}: {e}")
                continue
            stem = f"{args.suite}_r{label}_{name}"
            write_trace_csv(trace, out / f"{stem}.csv", d=d)
            write_summary_json(trace, out / f"{stem}.json")
            for rec in trace.records:
                comparison_rows.append(
                    [args.suite, label, name, rec.iter, repr(rec.f_value),
                     repr(rec.stationarity),
                     "" if rec.test_error is None else repr(rec.test_error)]
                    + [str(x) for x in rec.rank])
            rec = trace.final()
            print(f"{name} r={label}: {trace.termination} after {rec.iter} "
                  f"iterations, final rank {rec.rank}"
                  + (f", test_error={rec.test_error:.3e}"
                     if rec.test_error is not None else ""))
    header = (["suite", "rank_bound", "solver", "iter", "f", "stationarity",
               "test_error"] + [f"r{k + 1}" for k in range(d)])
    with open(out / f"{args.suite}_comparison.csv", "w") as f:
        f.write(",".join(header) + "\n")
        for row in comparison_rows:
            f.write(",".join(str(x) for x in row) + "\n")
    for msg in failures:
        print(f"FAILED: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_hosvd(args) -> int:
    A = load_dense(args.input)
    r = args.rank or A.shape
    T = hosvd(A, r)
    err = float(np.linalg.norm((A - to_dense(T)).ravel()))
    for k, sig in enumerate(mode_singular_values(T), start=1):
        print(f"mode {k} singular values: "
              + " ".join(f"{s:.6e}" for s in sig))
    print(f"rank: {T.rank}")
    print(f"truncation error: {err:.6e}")
    if args.save:
        save_checkpoint(T, args.save)
    return 0


def cmd_check(args) -> int:
    names = args.suite or None
    reports = run_check_suites(names, seed=args.seed, restarts=args.restarts)
    ok = True
    for rep in reports:
        print(json.dumps(rep.to_dict() if args.verbose
                         else {k: v for k, v in rep.to_dict().items()
                               if k != "margins"}))
        ok = ok and rep.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tuckeropt",
        description="First-order optimization on Tucker tensor varieties")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complete", help="solve a tensor completion problem")
    p.add_argument("problem", type=Path,
                   help="problem bundle directory (omega.coo, gamma.coo, "
                        "meta.json)")
    _add_common_solver_flags(p)
    p.add_argument("--init", choices=["spectral", "random"],
                   default="spectral")
    p.add_argument("--save", type=Path, help="write final Tucker checkpoint")
    p.add_argument("--resume", type=Path, help="start from a checkpoint")
    p.set_defaults(fn=cmd_complete)

    p = sub.add_parser("bench", help="run a synthetic benchmark suite")
    p.add_argument("suite", choices=sorted(_BENCH_SETTINGS))
    _add_common_solver_flags(p)
    p.add_argument("--init", choices=["spectral", "random"],
                   default="spectral")
    p.add_argument("--n", type=_parse_tuple, help="tensor dimensions")
    p.add_argument("--true-rank", type=_parse_tuple)
    p.add_argument("--p", type=float, help="sampling rate")
    p.add_argument("--out", type=Path, default=Path("bench_out"))
    p.add_argument("--paper-scale", action="store_true",
                   help="full-size settings (long-running)")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("hosvd", help="truncated HOSVD of a dense tensor file")
    p.add_argument("input", type=Path)
    p.add_argument("--rank", type=_parse_tuple)
    p.add_argument("--save", type=Path)
    p.set_defaults(fn=cmd_hosvd)

    p = sub.add_parser("check", help="run the brute-force verification suites")
    p.add_argument("--suite", action="append", choices=sorted(CHECK_SUITES),
                   help="run only this suite (repeatable)")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true",
                   help="include per-instance margins")
    p.set_defaults(fn=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None:
        args.threads = _default_threads()
    try:
        return args.fn(args)
    except (OSError, ValueError, LineSearchFailure, CandidateExhaustion) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
