"""First-order solvers on the bounded-Tucker-rank set.

Four methods share one skeleton: a projected line-search step built from
either the approximate projection (retracted variants) or the partial
projection (retraction-free variants), optionally wrapped in a rank-decrease
outer loop that enumerates lower-rank candidates and keeps the best one.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TangentVector,
    approx_project,
    partial_project,
    stationarity_measure,
    tangent_norm,
)
from .tensor_core import SparseCooTensor, delta_rank, fro_norm
from .tucker import (
    TuckerTensor,
    add_scaled_tangent,
    hosvd_truncate,
    mode_singular_values,
)

__all__ = [
    "ObjectiveHandle",
    "SolverConfig",
    "IterRecord",
    "SolverTrace",
    "LineSearchFailure",
    "CandidateExhaustion",
    "armijo_search",
    "grap_r_index_sets",
    "rfgrap_r_index_sets",
    "grap_step",
    "rfgrap_step",
    "solve_grap",
    "solve_rfgrap",
    "solve_grap_r",
    "solve_rfgrap_r",
    "write_trace_csv",
    "write_summary_json",
]


class LineSearchFailure(RuntimeError):
    """Backtracking reached the stepsize floor without sufficient decrease."""

    def __init__(self, message, *, f_value=None, dir_inner=None, sbar=None,
                 backtracks=None):
        super().__init__(message)
        self.f_value = f_value
        self.dir_inner = dir_inner
        self.sbar = sbar
        self.backtracks = backtracks


class CandidateExhaustion(RuntimeError):
    """Every rank candidate in one iteration failed, or too many to try."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = tuple(diagnostics)


@dataclass(frozen=True)
class ObjectiveHandle:
    """Objective f with Euclidean gradient and optional per-direction hooks.

    ``grad`` may return a dense array or a SparseCooTensor.  ``initial_step``,
    if given, maps (X, V) to a proposed initial stepsize (e.g. the exact
    minimizer for quadratics); ``test_metric`` is recorded in traces.
    """

    eval: callable
    grad: callable
    dims: tuple
    initial_step: callable | None = None
    test_metric: callable | None = None
    eval_grad: callable | None = None


def _f_and_grad(obj: "ObjectiveHandle", X):
    """(f(X), grad f(X)), using the fused path when the objective has one."""
    if obj.eval_grad is not None:
        return obj.eval_grad(X)
    return obj.eval(X), obj.grad(X)


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 0.5
    armijo_a: float = 1e-4
    delta: float = 1e-2
    delta_absolute: bool = False
    max_iters: int = 500
    stat_tol: float = 1e-8
    step_floor: float = 1e-16
    candidate_cap: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < self.armijo_a < 1:
            raise ValueError("armijo_a must lie in (0, 1)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.step_floor <= 0:
            raise ValueError("step_floor must be positive")
        if self.max_iters < 0 or self.candidate_cap < 1:
            raise ValueError("invalid iteration/candidate limits")


@dataclass(frozen=True)
class IterRecord:
    iter: int
    f_value: float
    stationarity: float
    grad_norm: float
    direction_norm: float
    stepsize: float
    rank: tuple
    n_candidates: int
    backtracks: int
    wall_time_s: float
    test_error: float | None = None


@dataclass
class SolverTrace:
    solver: str
    records: list = field(default_factory=list)
    termination: str = "running"

    @property
    def iters(self) -> int:
        return self.records[-1].iter if self.records else 0

    def final(self) -> IterRecord:
        return self.records[-1]


def _negate(A):
    if isinstance(A, SparseCooTensor):
        return A.scale(-1.0)
    return -np.asarray(A)


def armijo_search(obj: ObjectiveHandle, X: TuckerTensor, V: TangentVector,
                  dir_inner: float, sbar: float, cfg: SolverConfig,
                  retracted: bool, r=None):
    """Backtracking line search; returns (s, Y, n_backtracks).

    Finds the smallest l >= 0 such that s = rho^l * sbar satisfies
    f(X) - f(Y_s) >= s * a * dir_inner, where Y_s is the truncated step for
    the retracted variants and the structured exact step otherwise.
    """
    if dir_inner <= 0:
        raise ValueError(f"not a descent direction: dir_inner={dir_inner}")
    if sbar <= 0:
        raise ValueError("initial stepsize must be positive")
    fX = obj.eval(X)
    s = sbar
    backtracks = 0
    while s >= cfg.step_floor:
        Y = add_scaled_tangent(X, s, V)
        if retracted:
            cap = Y.rank if r is None else tuple(min(a, b)
                                                 for a, b in zip(r, Y.rank))
            Y = hosvd_truncate(Y, cap)
        if fX - obj.eval(Y) >= s * cfg.armijo_a * dir_inner:
            return s, Y, backtracks
        s *= cfg.rho
        backtracks += 1
    raise LineSearchFailure(
        f"line search hit the stepsize floor {cfg.step_floor:g} after "
        f"{backtracks} backtracks (f={fX:.6g}, dir_inner={dir_inner:.6g}, "
        f"sbar={sbar:.6g})",
        f_value=fX, dir_inner=dir_inner, sbar=sbar, backtracks=backtracks)


def grap_r_index_sets(X: TuckerTensor, delta: float):
    """Per-mode candidate rank sets {delta-rank, ..., rank}."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sets = []
    for sigma in mode_singular_values(X):
        rk = sigma.size
        sets.append(tuple(range(delta_rank(sigma, delta), rk + 1)))
    return sets


def rfgrap_r_index_sets(X: TuckerTensor, delta: float):
    """Per-mode candidate rank sets {rank-1, rank} when sigma_min <= delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sets = []
    for sigma in mode_singular_values(X):
        rk = sigma.size
        if rk and sigma[-1] <= delta:
            sets.append((rk - 1, rk))
        else:
            sets.append((rk,))
    return sets


@dataclass(frozen=True)
class _StepInfo:
    f_after: float
    stepsize: float
    direction_norm: float
    backtracks: int


def _initial_stepsize(obj, X, V, vnorm, cfg, retraction_free):
    sbar = None
    if obj.initial_step is not None:
        sbar = obj.initial_step(X, V)
    if sbar is None or not math.isfinite(sbar) or sbar <= 0:
        sbar = min(1.0, 1.0 / vnorm)
    if not retraction_free:
        sbar = min(sbar, 1.0 / vnorm)
    return max(sbar, cfg.step_floor)


def _direction_step(obj, X, grad, fX, r, cfg, retraction_free):
    """One projected line-search step from X; returns (Y, _StepInfo)."""
    neg = _negate(grad)
    if retraction_free:
        V, _branch = partial_project(X, neg, r)
    else:
        V = approx_project(X, neg, r)
    vnorm = tangent_norm(V)
    if vnorm == 0.0:
        return X, _StepInfo(f_after=fX, stepsize=0.0, direction_norm=0.0,
                            backtracks=0)
    dir_inner = vnorm * vnorm
    sbar = _initial_stepsize(obj, X, V, vnorm, cfg, retraction_free)
    s, Y, bt = armijo_search(obj, X, V, dir_inner, sbar, cfg,
                             retracted=not retraction_free, r=r)
    return Y, _StepInfo(f_after=obj.eval(Y), stepsize=s, direction_norm=vnorm,
                        backtracks=bt)


def _make_record(obj, X, fX, grad, stat, t, info, n_candidates, t_start):
    terr = obj.test_metric(X) if obj.test_metric is not None else None
    return IterRecord(iter=t, f_value=fX, stationarity=stat.value,
                      grad_norm=fro_norm(grad),
                      direction_norm=info.direction_norm,
                      stepsize=info.stepsize, rank=X.rank,
                      n_candidates=n_candidates, backtracks=info.backtracks,
                      wall_time_s=time.perf_counter() - t_start,
                      test_error=terr)


_NO_STEP = _StepInfo(f_after=float("nan"), stepsize=0.0, direction_norm=0.0,
                     backtracks=0)


def _effective_delta(X0: TuckerTensor, cfg: SolverConfig) -> float:
    """Rank-decrease threshold, by default relative to sigma_max at the start."""
    if cfg.delta_absolute:
        return cfg.delta
    sig = [s[0] for s in mode_singular_values(X0) if s.size]
    smax = max(sig) if sig else 0.0
    return cfg.delta * smax if smax > 0 else cfg.delta


def _candidate_ranks(X, r, cfg, retraction_free, delta_eff):
    if retraction_free:
        sets = rfgrap_r_index_sets(X, delta_eff)
    else:
        sets = grap_r_index_sets(X, delta_eff)
    count = int(np.prod([len(s) for s in sets], dtype=np.int64))
    if count > cfg.candidate_cap:
        raise CandidateExhaustion(
            f"{count} rank candidates exceed candidate_cap="
            f"{cfg.candidate_cap}; decrease delta or raise the cap")
    return list(itertools.product(*sets))


def _rank_decrease_step(obj, X, r, cfg, retraction_free, delta_eff):
    """Evaluate every lower-rank candidate, keep the best; returns (Y, info, n)."""
    cands = _candidate_ranks(X, r, cfg, retraction_free, delta_eff)
    best_key = None
    best = None
    failures = []
    for rl in cands:
        Xc = hosvd_truncate(X, rl)
        fc, gc = _f_and_grad(obj, Xc)
        try:
            Yc, info = _direction_step(obj, Xc, gc, fc, r, cfg,
                                       retraction_free)
        except LineSearchFailure as e:
            failures.append(f"candidate {rl}: {e}")
            continue
        key = (info.f_after, sum(rl), rl)
        if best_key is None or key < best_key:
            best_key = key
            best = (Yc, info)
    if best is None:
        raise CandidateExhaustion(
            f"all {len(cands)} rank candidates failed the line search",
            diagnostics=failures)
    return best[0], best[1], len(cands)


def _solve(obj, X0, r, cfg, *, retraction_free, rank_decrease, name):
    r = tuple(int(x) for x in r)
    if any(rl > rk for rl, rk in zip(X0.rank, r)):
        raise ValueError(f"start rank {X0.rank} exceeds bound {r}")
    t_start = time.perf_counter()
    trace = SolverTrace(solver=name)
    delta_eff = _effective_delta(X0, cfg) if rank_decrease else None
    X = X0
    pending = _NO_STEP
    n_candidates = 0
    for t in range(cfg.max_iters + 1):
        fX, grad = _f_and_grad(obj, X)
        stat = stationarity_measure(X, grad, r)
        trace.records.append(_make_record(obj, X, fX, grad, stat, t, pending,
                                          n_candidates, t_start))
        if stat.value <= cfg.stat_tol:
            trace.termination = "converged"
            return X, trace
        if t == cfg.max_iters:
            trace.termination = "max_iters"
            return X, trace
        try:
            if rank_decrease:
                X, pending, n_candidates = _rank_decrease_step(
                    obj, X, r, cfg, retraction_free, delta_eff)
            else:
                Y, pending = _direction_step(obj, X, grad, fX, r, cfg,
                                             retraction_free)
                n_candidates = 1
                if pending.stepsize == 0.0:
                    trace.termination = "stalled"
                    return X, trace
                X = Y
        except LineSearchFailure:
            if rank_decrease:
                raise
            trace.termination = "line_search_failure"
            return X, trace
    trace.termination = "max_iters"
    return X, trace


def grap_step(obj, X, r, cfg):
    """Single retracted step along the approximate projection of -grad."""
    return _single_step(obj, X, r, cfg, retraction_free=False)


def rfgrap_step(obj, X, r, cfg):
    """Single retraction-free step along the chosen partial-projection branch."""
    return _single_step(obj, X, r, cfg, retraction_free=True)


def _single_step(obj, X, r, cfg, retraction_free):
    r = tuple(int(x) for x in r)
    t_start = time.perf_counter()
    fX, grad = _f_and_grad(obj, X)
    stat = stationarity_measure(X, grad, r)
    if stat.value <= cfg.stat_tol:
        rec = _make_record(obj, X, fX, grad, stat, 0, _NO_STEP, 0, t_start)
        return X, rec
    Y, info = _direction_step(obj, X, grad, fX, r, cfg, retraction_free)
    gradY = obj.grad(Y)
    statY = stationarity_measure(Y, gradY, r)
    rec = _make_record(obj, Y, info.f_after if info.stepsize else fX, gradY,
                       statY, 0, info, 1, t_start)
    return Y, rec


def solve_grap(obj, X0, r, cfg):
    return _solve(obj, X0, r, cfg, retraction_free=False,
                  rank_decrease=False, name="grap")


def solve_rfgrap(obj, X0, r, cfg):
    return _solve(obj, X0, r, cfg, retraction_free=True,
                  rank_decrease=False, name="rfgrap")


def solve_grap_r(obj, X0, r, cfg):
    return _solve(obj, X0, r, cfg, retraction_free=False,
                  rank_decrease=True, name="grap-r")


def solve_rfgrap_r(obj, X0, r, cfg):
    return _solve(obj, X0, r, cfg, retraction_free=True,
                  rank_decrease=True, name="rfgrap-r")


# ---------------------------------------------------------------------------
# Trace output

def write_trace_csv(trace: SolverTrace, path, d: int) -> None:
    """CSV with one row per iteration (wall time varies between runs)."""
    cols = (["iter", "f", "stationarity", "grad_norm", "dir_norm", "step",
             "backtracks"] + [f"r{k + 1}" for k in range(d)]
            + ["candidates", "time_s", "test_error"])
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for rec in trace.records:
            row = [str(rec.iter), repr(rec.f_value), repr(rec.stationarity),
                   repr(rec.grad_norm), repr(rec.direction_norm),
                   repr(rec.stepsize), str(rec.backtracks)]
            row += [str(x) for x in rec.rank]
            row += [str(rec.n_candidates), repr(rec.wall_time_s),
                    "" if rec.test_error is None else repr(rec.test_error)]
            f.write(",".join(row) + "\n")


def write_summary_json(trace: SolverTrace, path) -> None:
    rec = trace.final()
    summary = {
        "solver": trace.solver,
        "f": rec.f_value,
        "stationarity": rec.stationarity,
        "rank": list(rec.rank),
        "iters": rec.iter,
        "wall_time_s": rec.wall_time_s,
        "termination": trace.termination,
    }
    if rec.test_error is not None:
        summary["test_error"] = rec.test_error
    with open(path, "w") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
