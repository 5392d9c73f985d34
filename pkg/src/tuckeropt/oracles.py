"""Brute-force reference implementations for small-scale verification.

Everything here recomputes quantities by naive dense formulas (explicit
Kronecker products, full densification) so that the structured fast paths can
be checked against an independent computational path.  The exact tangent-cone
projection, intractable in general, is approached by multi-start alternating
maximization and reported as a certified lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .completion import CompletionProblem, euclidean_gradient, gen_synthetic, objective, random_tucker
from .geometry import (
    TangentVector,
    ambient_inner,
    angle_constants,
    approx_project,
    choose_singular_complement,
    embed,
    partial_project,
    sample_normal,
    stationarity_measure,
    tangent_norm,
)
from .tensor_core import SparseCooTensor, fold, unfold
from .tucker import TuckerTensor, hosvd, to_dense

__all__ = [
    "OracleReport",
    "exact_tangent_projection_oracle",
    "finite_diff_gradient",
    "dense_reference",
    "run_check_suites",
    "CHECK_SUITES",
]

_ORACLE_MAX_DIM = 6
_ORACLE_MAX_ORDER = 3


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one verification suite."""

    name: str
    instances_run: int
    max_violation: float
    tolerance: float
    margins: tuple

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "instances_run": self.instances_run,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "margins": list(self.margins),
        }


# ---------------------------------------------------------------------------
# Naive dense helpers (independent of the structured fast paths)

def _kron_desc(mats) -> np.ndarray:
    """Kronecker product in descending mode order (matches mode-1-fastest
    vectorization: (X x_j A_j)_(k) = A_k X_(k) (A_d kron ... kron A_1)^T)."""
    mats = list(mats)
    if not mats:
        return np.eye(1)
    return reduce(np.kron, reversed(mats))


def _naive_multi_contract(A: np.ndarray, mats, k: int) -> np.ndarray:
    """(A x_{j != k} mats[j]^T)_(k) by one explicit Kronecker product."""
    others = [np.eye(A.shape[j]) if mats[j] is None else mats[j]
              for j in range(A.ndim) if j != k - 1]
    return unfold(A, k) @ _kron_desc(others)


def _naive_apply_all(A: np.ndarray, mats) -> np.ndarray:
    """A x_k mats[k] over all modes (dense, via the mode-1 unfolding)."""
    out_dims = tuple(M.shape[0] for M in mats)
    M1 = mats[0] @ unfold(A, 1) @ _kron_desc(mats[1:]).T
    return fold(M1, 1, out_dims)


def _dense_tucker(T: TuckerTensor) -> np.ndarray:
    return _naive_apply_all(T.core, list(T.factors))


# ---------------------------------------------------------------------------
# Exact tangent-cone projection (lower bound by alternating maximization)

def _projection_value_sq(A, X, S, E):
    """||P_T(A)||^2 for the tangent space spanned by complements inside S."""
    d = A.ndim
    Csq = float(np.sum(_naive_apply_all(A, [Sk.T for Sk in S]) ** 2))
    total = Csq
    for k in range(d):
        M = E[k] - S[k] @ (S[k].T @ E[k])
        total += float(np.sum(M * M))
    return total


def exact_tangent_projection_oracle(X: TuckerTensor, A: np.ndarray, r,
                                    restarts: int, seed):
    """Best-found exact projection of A onto the tangent cone at X.

    Maximizes the projection norm over the free orthonormal complements by
    multi-start alternating per-mode eigenvector updates.  The returned value
    is a certified lower bound on the true projection norm; the returned
    tensor is the embedded projection achieving it.
    """
    r = tuple(int(x) for x in r)
    d = X.ndim
    dims = X.dims
    if d > _ORACLE_MAX_ORDER or any(n > _ORACLE_MAX_DIM for n in dims):
        raise ValueError(f"oracle limited to order {_ORACLE_MAX_ORDER}, "
                         f"mode size {_ORACLE_MAX_DIM}; got dims {dims}")
    rlow = X.rank
    if any(a > b for a, b in zip(rlow, r)):
        raise ValueError(f"anchor rank {rlow} exceeds bound {r}")
    rng = np.random.default_rng(seed)
    G = X.core
    U = list(X.factors)

    # mode-k data independent of the complements
    E = []
    for k in range(d):
        D = _naive_multi_contract(A, [None if j == k else U[j]
                                      for j in range(d)], k + 1)
        Gk = unfold(G, k + 1)
        E.append(D @ np.linalg.pinv(Gk) @ Gk)

    qs = [r[k] - rlow[k] for k in range(d)]
    perp = []
    for k in range(d):
        full = np.linalg.svd(np.hstack([U[k], np.zeros((dims[k], 0))]),
                             full_matrices=True)[0] if rlow[k] else np.eye(dims[k])
        perp.append(full[:, rlow[k]:])

    def sweep_value(W):
        S = [np.hstack([U[k], W[k]]) for k in range(d)]
        return _projection_value_sq(A, X, S, E)

    best_val = -np.inf
    best_W = None
    for _restart in range(restarts):
        W = []
        for k in range(d):
            if qs[k] == 0:
                W.append(np.zeros((dims[k], 0)))
                continue
            M = rng.standard_normal((dims[k], qs[k]))
            M = M - U[k] @ (U[k].T @ M)
            Q, _ = np.linalg.qr(M)
            W.append(Q[:, :qs[k]])
        val = sweep_value(W)
        for _sweep in range(50):
            for k in range(d):
                if qs[k] == 0:
                    continue
                S = [np.hstack([U[j], W[j]]) for j in range(d)]
                Bmats = [None] * d
                for j in range(d):
                    if j != k:
                        Bmats[j] = S[j] @ S[j].T
                B = _naive_multi_contract(A, Bmats, k + 1)
                Q = perp[k]
                M = Q.T @ (B @ B.T - E[k] @ E[k].T) @ Q
                evals, evecs = np.linalg.eigh((M + M.T) / 2)
                top = evecs[:, ::-1][:, :qs[k]]
                W[k] = Q @ top
            new_val = sweep_value(W)
            if new_val - val <= 1e-12 * max(1.0, abs(val)):
                val = new_val
                break
            val = new_val
        if val > best_val:
            best_val = val
            best_W = [w.copy() for w in W]

    S = [np.hstack([U[k], best_W[k]]) for k in range(d)]
    V = _naive_apply_all(A, [Sk @ Sk.T for Sk in S])
    for k in range(d):
        M = E[k] - S[k] @ (S[k].T @ E[k])
        others = [U[j] for j in range(d) if j != k]
        V = V + fold(M @ _kron_desc(others).T, k + 1, dims)
    return V, float(np.linalg.norm(V.ravel()))


# ---------------------------------------------------------------------------
# Finite differences

def finite_diff_gradient(f, X, coords, h: float):
    """Central differences of f on ambient coordinates of a dense copy of X."""
    if h <= 0:
        raise ValueError("h must be positive")
    dense = to_dense(X) if isinstance(X, TuckerTensor) else np.array(X, dtype=float)
    out = []
    for c in coords:
        at = tuple(int(i) - 1 for i in c)
        orig = dense[at]
        dense[at] = orig + h
        fp = f(dense)
        dense[at] = orig - h
        fm = f(dense)
        dense[at] = orig
        out.append((fp - fm) / (2 * h))
    return out


# ---------------------------------------------------------------------------
# Dense references for the structured operations

def _check_small(dims):
    if int(np.prod(dims, dtype=np.int64)) > 20000:
        raise ValueError(f"instance too large for dense reference: {dims}")


def _ref_approx_project(X: TuckerTensor, A, r, complements) -> np.ndarray:
    dims = X.dims
    _check_small(dims)
    A = A.to_dense() if isinstance(A, SparseCooTensor) else np.asarray(A)
    d = X.ndim
    U = list(X.factors)
    S = [np.hstack([U[k], complements[k]]) for k in range(d)]
    V = _naive_apply_all(A, [Sk @ Sk.T for Sk in S])
    for k in range(d):
        D = _naive_multi_contract(A, [None if j == k else U[j]
                                      for j in range(d)], k + 1)
        Gk = unfold(X.core, k + 1)
        M = D @ np.linalg.pinv(Gk) @ Gk
        M = M - S[k] @ (S[k].T @ M)
        others = [U[j] for j in range(d) if j != k]
        V = V + fold(M @ _kron_desc(others).T, k + 1, dims)
    return V


def _ref_partial_project(X: TuckerTensor, A, r, complements):
    dims = X.dims
    _check_small(dims)
    A = A.to_dense() if isinstance(A, SparseCooTensor) else np.asarray(A)
    d = X.ndim
    U = list(X.factors)
    S = [np.hstack([U[k], complements[k]]) for k in range(d)]
    cands = [_naive_apply_all(A, [Sk @ Sk.T for Sk in S])]
    for k in range(d):
        D = _naive_multi_contract(A, [None if j == k else U[j]
                                      for j in range(d)], k + 1)
        Gk = unfold(X.core, k + 1)
        M = D @ np.linalg.pinv(Gk) @ Gk
        M = M - U[k] @ (U[k].T @ M)
        others = [U[j] for j in range(d) if j != k]
        cands.append(fold(M @ _kron_desc(others).T, k + 1, dims))
    norms = [float(np.linalg.norm(c.ravel())) for c in cands]
    branch = int(np.argmax(norms))
    return cands[branch], branch


def _ref_stationarity(X: TuckerTensor, grad, r) -> float:
    _check_small(X.dims)
    G = grad.to_dense() if isinstance(grad, SparseCooTensor) else np.asarray(grad)
    d = X.ndim
    rlow = X.rank
    r = tuple(int(x) for x in r)
    U = list(X.factors)
    deficient = [k for k in range(d) if rlow[k] < r[k]]
    proj = [None if k in deficient else U[k] @ U[k].T for k in range(d)]
    core_part = _naive_apply_all(
        G, [np.eye(X.dims[k]) if proj[k] is None else proj[k]
            for k in range(d)])
    total = float(np.sum(core_part ** 2))
    for k in range(d):
        if k in deficient:
            continue
        D = _naive_multi_contract(G, [None if j == k else U[j]
                                      for j in range(d)], k + 1)
        M = (D - U[k] @ (U[k].T @ D)) @ unfold(X.core, k + 1).T
        total += float(np.sum(M * M))
    return float(np.sqrt(total))


def _ref_hosvd_truncate(T: TuckerTensor, r) -> np.ndarray:
    _check_small(T.dims)
    A = _dense_tucker(T)
    core = A
    factors = []
    for k in range(1, A.ndim + 1):
        M = unfold(core, k)
        Uk, sig, _ = np.linalg.svd(M, full_matrices=False)
        rk = min(int(r[k - 1]), int(np.sum(sig > 1e-12 * sig[0])) if sig.size and sig[0] > 0 else 0)
        Uk = Uk[:, :rk]
        dims = tuple(rk if j == k - 1 else core.shape[j] for j in range(A.ndim))
        core = fold(Uk.T @ M, k, dims)
        factors.append(Uk)
    return _naive_apply_all(core, factors) if core.size else np.zeros(T.dims)


def _ref_multi_mode_contract(S: SparseCooTensor, factors, skip: int) -> np.ndarray:
    _check_small(S.dims)
    return _naive_multi_contract(S.to_dense(), list(factors), skip)


def _ref_add_scaled_tangent(T: TuckerTensor, s: float, V: TangentVector) -> np.ndarray:
    _check_small(T.dims)
    d = T.ndim
    U = list(T.factors)
    S = []
    for k in range(d):
        Sk = np.hstack([U[k], V.Ucomp[k]])
        if Sk.shape[1] < V.bound[k]:
            Sk = np.hstack([Sk, np.zeros((Sk.shape[0], V.bound[k] - Sk.shape[1]))])
        S.append(Sk)
    out = _dense_tucker(T) + s * _naive_apply_all(V.C, S)
    for k in range(d):
        mats = [V.Udot[j] if j == k else U[j] for j in range(d)]
        out = out + s * _naive_apply_all(T.core, mats)
    return out


def _ref_entries_at(T: TuckerTensor, idx) -> np.ndarray:
    _check_small(T.dims)
    dense = _dense_tucker(T)
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    return np.array([dense[tuple(row - 1)] for row in idx])


_REFERENCES = {
    "approx_project": _ref_approx_project,
    "partial_project": _ref_partial_project,
    "stationarity_measure": _ref_stationarity,
    "hosvd_truncate": _ref_hosvd_truncate,
    "multi_mode_contract": _ref_multi_mode_contract,
    "add_scaled_tangent": _ref_add_scaled_tangent,
    "entries_at": _ref_entries_at,
}


def dense_reference(op_name: str, *inputs):
    """Naive dense recomputation of a structured operation (source of truth)."""
    try:
        ref = _REFERENCES[op_name]
    except KeyError:
        raise ValueError(f"no dense reference for {op_name!r}") from None
    return ref(*inputs)


# ---------------------------------------------------------------------------
# Verification suites (shared by the `check` command and the test suite)

def _random_deficient_instance(rng, dims=(4, 4, 4), rmax=2,
                               ensure_deficient=False):
    d = len(dims)
    r = tuple(int(rng.integers(1, rmax + 1)) for _ in range(d))
    rlow = [int(rng.integers(1, rk + 1)) for rk in r]
    if ensure_deficient and all(a == b for a, b in zip(rlow, r)):
        # force strict deficiency so the angle constants are < 1 (the
        # equality case r_low = r is exercised by the identity checks)
        r = tuple(max(rk, 2) if k == 0 else rk for k, rk in enumerate(r))
        rlow[0] = r[0] - 1
    rlow = tuple(rlow)
    X = random_tucker(dims, rlow, rng)
    A = rng.standard_normal(dims)
    return X, A, r


def suite_angle(seed=0, instances=20, restarts=100) -> OracleReport:
    """Angle conditions of both projections against the oracle lower bound."""
    rng = np.random.default_rng(seed)
    margins = []
    worst = -np.inf
    for i in range(instances):
        X, A, r = _random_deficient_instance(rng, ensure_deficient=True)
        _, value = exact_tangent_projection_oracle(
            X, A, r, restarts=restarts, seed=rng.integers(2 ** 31))
        wt, wh = angle_constants(X.dims, r, X.rank)
        Vt = approx_project(X, A, r)
        Vh, _ = partial_project(X, A, r)
        nt = tangent_norm(Vt)
        nh = tangent_norm(Vh)
        v1 = wt * value - nt                       # must be <= 0
        v2 = wh * value * nh - ambient_inner(A, Vh)  # must be <= 0
        worst = max(worst, v1, v2)
        margins.append(max(v1, v2))
    return OracleReport("angle", instances, float(worst), 0.0, tuple(margins))


def suite_complement(seed=0, instances=50) -> OracleReport:
    """Lower bound satisfied by the constructed singular complements."""
    rng = np.random.default_rng(seed)
    margins = []
    worst = -np.inf
    for i in range(instances):
        X, A, r = _random_deficient_instance(rng, dims=(5, 4, 6), rmax=3)
        comps = choose_singular_complement(X, A, r)
        d = X.ndim
        S = [np.hstack([X.factors[k], comps[k]]) for k in range(d)]
        deficient = [k for k in range(d) if X.rank[k] < r[k]]
        lhs_mats = [S[k] @ S[k].T if k in deficient
                    else X.factors[k] @ X.factors[k].T for k in range(d)]
        rhs_mats = [np.eye(X.dims[k]) if k in deficient
                    else X.factors[k] @ X.factors[k].T for k in range(d)]
        lhs = float(np.linalg.norm(_naive_apply_all(A, lhs_mats).ravel()))
        base = float(np.linalg.norm(_naive_apply_all(A, rhs_mats).ravel()))
        total = int(np.prod(X.dims, dtype=np.int64))
        factor = 1.0
        for k in deficient:
            factor *= np.sqrt((r[k] - X.rank[k])
                              / min(X.dims[k], total // X.dims[k]))
        viol = base * factor - lhs - 1e-12 * max(1.0, base)
        worst = max(worst, viol)
        margins.append(viol)
    return OracleReport("complement", instances, float(worst), 0.0, tuple(margins))


def suite_normal(seed=0, instances=50) -> OracleReport:
    """Sampled normal-cone elements are orthogonal to sampled tangent vectors."""
    rng = np.random.default_rng(seed)
    margins = []
    worst = -np.inf
    for i in range(instances):
        X, A, r = _random_deficient_instance(rng, dims=(5, 5, 5), rmax=3)
        W = sample_normal(X, r, seed=rng.integers(2 ** 31))
        V = approx_project(X, A, r)
        nw = float(np.linalg.norm(W.ravel()))
        nv = tangent_norm(V)
        if nw == 0 or nv == 0:
            margins.append(0.0)
            continue
        rel = abs(ambient_inner(W, V)) / (nw * nv)
        stat = stationarity_measure(X, -W, r).value
        viol = max(rel - 1e-10, stat - 1e-10 * nw)
        worst = max(worst, viol)
        margins.append(viol)
    return OracleReport("normal", instances, float(worst), 0.0, tuple(margins))


def suite_hosvd(seed=0, instances=50) -> OracleReport:
    """Quasi-optimality-style bounds of the sequentially truncated HOSVD."""
    rng = np.random.default_rng(seed)
    margins = []
    worst = -np.inf
    for i in range(instances):
        dims = (6, 5, 6)
        r = tuple(int(rng.integers(1, 4)) for _ in range(3))
        A = rng.standard_normal(dims)
        Y = to_dense(random_tucker(dims, r, rng))
        H = to_dense(hosvd(A, r))
        d = 3
        ref = float(np.linalg.norm((A - Y).ravel()))
        v1 = float(np.linalg.norm((H - Y).ravel())) - (np.sqrt(d) + 1) * ref
        v2 = float(np.linalg.norm((A - H).ravel())) - np.sqrt(d) * ref
        viol = max(v1, v2) - 1e-10
        worst = max(worst, viol)
        margins.append(viol)
    return OracleReport("hosvd", instances, float(worst), 0.0, tuple(margins))


def suite_gradient(seed=0, instances=5) -> OracleReport:
    """Completion gradient vs central finite differences."""
    rng = np.random.default_rng(seed)
    margins = []
    worst = -np.inf
    for i in range(instances):
        P, truth = gen_synthetic((5, 4, 5), (2, 2, 2), 0.4,
                                 seed=int(rng.integers(2 ** 31)))
        X = random_tucker(P.dims, (2, 2, 2), rng)
        g = euclidean_gradient(P, X).to_dense()
        pick = rng.permutation(P.omega.nnz)[:10]
        coords = P.omega.idx[pick]
        dense_X = to_dense(X)
        h = 1e-6 * (1 + float(np.abs(dense_X).max()))

        def f(T):
            vals = np.array([T[tuple(row - 1)] for row in P.omega.idx])
            return 0.5 * float(np.sum((vals - P.omega.vals) ** 2))

        fd = finite_diff_gradient(f, X, coords, h)
        scale = max(1.0, float(np.abs(g).max()))
        rel = max(abs(g[tuple(c - 1)] - v) for c, v in zip(coords, fd)) / scale
        viol = rel - 1e-6
        worst = max(worst, viol)
        margins.append(viol)
    return OracleReport("gradient", instances, float(worst), 0.0, tuple(margins))


CHECK_SUITES = {
    "angle": suite_angle,
    "complement": suite_complement,
    "normal": suite_normal,
    "hosvd": suite_hosvd,
    "gradient": suite_gradient,
}


def run_check_suites(names=None, seed=0, restarts=100):
    """Run the named verification suites (all by default); returns reports."""
    if names is None:
        names = list(CHECK_SUITES)
    reports = []
    for name in names:
        if name not in CHECK_SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from "
                             f"{sorted(CHECK_SUITES)}")
        fn = CHECK_SUITES[name]
        if name == "angle":
            reports.append(fn(seed=seed, restarts=restarts))
        else:
            reports.append(fn(seed=seed))
    return reports
