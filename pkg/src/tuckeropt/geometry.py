"""Variational geometry of the bounded-Tucker-rank set.

Provides tangent-cone vectors in the parametrization (C, Udot_k, Ucomp_k),
the SVD-based approximate projection and the retraction-free partial
projection, the normal-cone stationarity measure, and the angle-condition
constants attached to the two projections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .completion import multi_mode_contract
from .tensor_core import (
    DEFAULT_RANK_TOL,
    SparseCooTensor,
    fold,
    mode_product,
    thin_svd,
    unfold,
)
from .tucker import TuckerTensor, _mixed_eval

__all__ = [
    "TangentVector",
    "StationarityReport",
    "embed",
    "tangent_norm",
    "tangent_entries_at",
    "ambient_inner",
    "choose_singular_complement",
    "approx_project",
    "partial_project",
    "tangent_space_project",
    "stationarity_measure",
    "sample_normal",
    "angle_constants",
]


@dataclass(frozen=True)
class TangentVector:
    """Tangent-cone element at ``anchor`` with rank bound ``bound``.

    Represents C x_k [U_k Ucomp_k] + sum_k G x_k Udot_k x_{j!=k} U_j with the
    orthogonality constraints U_k^T [Ucomp_k Udot_k] = 0, Ucomp_k^T Udot_k = 0.
    """

    anchor: TuckerTensor
    bound: tuple
    C: np.ndarray
    Udot: tuple
    Ucomp: tuple

    def __post_init__(self):
        bound = tuple(int(x) for x in self.bound)
        if self.C.shape != bound:
            raise ValueError(f"coefficient block shape {self.C.shape} != bound {bound}")
        rlow = self.anchor.rank
        for k, (Ud, Uc) in enumerate(zip(self.Udot, self.Ucomp)):
            n = self.anchor.dims[k]
            if Ud.shape != (n, rlow[k]):
                raise ValueError(f"Udot_{k + 1} has shape {Ud.shape}")
            if Uc.shape[0] != n or Uc.shape[1] not in (0, bound[k] - rlow[k]):
                raise ValueError(f"Ucomp_{k + 1} has shape {Uc.shape}")
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "Udot", tuple(self.Udot))
        object.__setattr__(self, "Ucomp", tuple(self.Ucomp))

    def norm(self) -> float:
        return tangent_norm(self)

    def scale(self, c: float) -> "TangentVector":
        return TangentVector(self.anchor, self.bound, c * self.C,
                             tuple(c * Ud for Ud in self.Udot), self.Ucomp)


@dataclass(frozen=True)
class StationarityReport:
    """Residuals of the normal-cone optimality condition at a point."""

    value: float
    core_residual: float
    mode_residuals: tuple
    deficient_modes: tuple


def _widened(V: TangentVector):
    """Per-mode bases [U_k Ucomp_k] (Ucomp may carry zero columns)."""
    out = []
    for U, Uc in zip(V.anchor.factors, V.Ucomp):
        out.append(np.hstack([U, Uc]) if Uc.shape[1] else U)
    return out


def tangent_norm(V: TangentVector) -> float:
    """||embed(V)||_F from the orthogonal decomposition of the parametrization."""
    G = V.anchor.core
    total = float(np.dot(V.C.ravel(), V.C.ravel()))
    for k, Ud in enumerate(V.Udot, start=1):
        M = Ud @ unfold(G, k)
        total += float(np.dot(M.ravel(), M.ravel()))
    return float(np.sqrt(total))


def embed(V: TangentVector) -> np.ndarray:
    """Ambient (dense) tensor represented by V; for oracles and tests."""
    X = V.anchor
    S = _widened(V)
    pad = V.C
    out = pad
    for k in range(X.ndim):
        Sk = S[k]
        if Sk.shape[1] != pad.shape[k]:
            # bound may exceed r_low + comp columns only when Ucomp is empty
            Sk = np.hstack([Sk, np.zeros((Sk.shape[0], pad.shape[k] - Sk.shape[1]))])
        out = mode_product(out, k + 1, Sk)
    for k in range(X.ndim):
        if not V.Udot[k].any():
            continue
        term = mode_product(X.core, k + 1, V.Udot[k])
        for j in range(X.ndim):
            if j != k:
                term = mode_product(term, j + 1, X.factors[j])
        out = out + term
    return out


def _eval_mixed(core: np.ndarray, mats, idx: np.ndarray) -> np.ndarray:
    if core.size == 0 or idx.size == 0:
        return np.zeros(idx.shape[0])
    rows = [M[idx[:, k] - 1] for k, M in enumerate(mats)]
    return _mixed_eval(core, rows)


def tangent_entries_at(V: TangentVector, idx) -> np.ndarray:
    """Entries of embed(V) at 1-based index tuples, without densifying."""
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    if idx.size == 0:
        return np.zeros(0)
    X = V.anchor
    S = _widened(V)
    S = [Sk if Sk.shape[1] == V.bound[k] else
         np.hstack([Sk, np.zeros((Sk.shape[0], V.bound[k] - Sk.shape[1]))])
         for k, Sk in enumerate(S)]
    vals = _eval_mixed(V.C, S, idx)
    for k in range(X.ndim):
        if not V.Udot[k].any():
            continue
        mats = [V.Udot[j] if j == k else X.factors[j] for j in range(X.ndim)]
        vals = vals + _eval_mixed(X.core, mats, idx)
    return vals


def _contract(A, mats):
    """A x_k mats[k]^T over every mode with a matrix (None leaves the mode).

    Accepts a dense array or a SparseCooTensor; returns a dense array whose
    mode-k size is mats[k].shape[1] (or n_k where mats[k] is None).
    """
    if isinstance(A, SparseCooTensor):
        if all(M is None for M in mats):
            return A.to_dense()
        sizes = [A.dims[j] if mats[j] is None else
                 mats[j].shape[1] for j in range(len(mats))]
        skip = int(np.argmax(sizes)) + 1
        M = multi_mode_contract(A, mats, skip)
        if mats[skip - 1] is not None:
            M = mats[skip - 1].T @ M
        out_dims = tuple(A.dims[j] if mats[j] is None else mats[j].shape[1]
                         for j in range(len(mats)))
        return fold(M, skip, out_dims)
    out = np.asarray(A)
    for k, M in enumerate(mats, start=1):
        if M is not None:
            out = mode_product(out, k, M.T)
    return out


def _ambient_norm(A) -> float:
    if isinstance(A, SparseCooTensor):
        return float(np.linalg.norm(A.vals))
    return float(np.linalg.norm(np.asarray(A).ravel()))


def ambient_inner(A, V: TangentVector) -> float:
    """<A, embed(V)> for dense or sparse A, using the structured form of V."""
    X = V.anchor
    S = _widened(V)
    S = [Sk if Sk.shape[1] == V.bound[k] else
         np.hstack([Sk, np.zeros((Sk.shape[0], V.bound[k] - Sk.shape[1]))])
         for k, Sk in enumerate(S)]
    total = float(np.dot(_contract(A, S).ravel(), V.C.ravel()))
    for k in range(X.ndim):
        if not V.Udot[k].any():
            continue
        mats = [None if j == k else X.factors[j] for j in range(X.ndim)]
        D = unfold(_contract(A, mats), k + 1)
        M = V.Udot[k] @ unfold(X.core, k + 1)
        total += float(np.dot(D.ravel(), M.ravel()))
    return total


def _pad_complement(existing: np.ndarray, q: int) -> np.ndarray:
    """Deterministically extend ``existing`` (orthonormal columns) by q more
    orthonormal columns drawn from projected identity columns."""
    n = existing.shape[0]
    basis = existing
    added = []
    for i in range(n):
        if len(added) == q:
            break
        v = np.zeros(n)
        v[i] = 1.0
        v = v - basis @ (basis.T @ v)
        v = v - basis @ (basis.T @ v)      # re-orthogonalize for stability
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v /= nv
            added.append(v)
            basis = np.column_stack([basis] + [v])
    if len(added) != q:
        raise ValueError("cannot pad orthonormal complement")
    return np.column_stack(added) if added else np.zeros((n, 0))


def _orth_complement(U: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(U)^perp (U has orthonormal cols)."""
    n, r = U.shape
    if r == 0:
        return np.eye(n)
    return _pad_complement(U, n - r)


def choose_singular_complement(X: TuckerTensor, A, r):
    """Per-mode complements Ucomp_k spanning dominant left singular directions.

    Deficient modes are processed in ascending order; each complement takes
    the leading left singular vectors of the mode-k unfolding of A after the
    previously chosen subspaces have been applied, projected orthogonal to
    U_k.  Rank-deficient cases are padded with a deterministic orthonormal
    complement.
    """
    rlow = X.rank
    r = tuple(int(x) for x in r)
    d = X.ndim
    if any(rl > rk for rl, rk in zip(rlow, r)):
        raise ValueError(f"anchor rank {rlow} exceeds bound {r}")
    comps = [np.zeros((X.dims[k], 0)) for k in range(d)]
    deficient = [k for k in range(d) if rlow[k] < r[k]]
    for k in deficient:
        mats = []
        for j in range(d):
            if j == k:
                mats.append(None)
            elif j in deficient and j < k:
                mats.append(np.hstack([X.factors[j], comps[j]]))
            elif j in deficient:
                mats.append(None)
            else:
                mats.append(X.factors[j])
        B = unfold(_contract(A, mats), k + 1)
        U = X.factors[k]
        M = B - U @ (U.T @ B)
        q = r[k] - rlow[k]
        f = thin_svd(M)
        keep = int(np.count_nonzero(f.sigma > DEFAULT_RANK_TOL * f.sigma[0])) \
            if f.sigma.size and f.sigma[0] > 0 else 0
        keep = min(keep, q)
        chosen = f.U[:, :keep]
        if keep < q:
            pad = _pad_complement(np.hstack([U, chosen]), q - keep)
            chosen = np.hstack([chosen, pad])
        comps[k] = chosen
    return comps


def _core_pinv(X: TuckerTensor, k: int) -> np.ndarray:
    """Pseudo-inverse of the mode-k core unfolding via thin SVD with cutoff."""
    Gk = unfold(X.core, k)
    f = thin_svd(Gk)
    if f.sigma.size == 0 or f.sigma[0] == 0:
        return np.zeros((Gk.shape[1], Gk.shape[0]))
    keep = f.sigma > DEFAULT_RANK_TOL * f.sigma[0]
    return (f.V[:, keep] / f.sigma[keep]) @ f.U[:, keep].T


def approx_project(X: TuckerTensor, A, r, complements=None) -> TangentVector:
    """SVD-based approximate projection of A onto the tangent cone at X."""
    r = tuple(int(x) for x in r)
    if complements is None:
        complements = choose_singular_complement(X, A, r)
    d = X.ndim
    S = [np.hstack([X.factors[k], complements[k]]) for k in range(d)]
    C = _contract(A, S)
    Udot = []
    for k in range(d):
        mats = [None if j == k else X.factors[j] for j in range(d)]
        D = unfold(_contract(A, mats), k + 1)
        M = D - S[k] @ (S[k].T @ D)
        Udot.append(M @ _core_pinv(X, k + 1))
    return TangentVector(X, r, C, tuple(Udot), tuple(complements))


def partial_project(X: TuckerTensor, A, r, complements=None):
    """Retraction-free partial projection: the largest of d+1 partial terms.

    Returns (TangentVector, branch) where branch 0 is the multilinear-space
    term and branch k keeps only the mode-k factor term; ties go to the
    lowest branch index.
    """
    r = tuple(int(x) for x in r)
    if complements is None:
        complements = choose_singular_complement(X, A, r)
    d = X.ndim
    rlow = X.rank
    S = [np.hstack([X.factors[k], complements[k]]) for k in range(d)]
    C = _contract(A, S)
    norms = [float(np.linalg.norm(C.ravel()))]
    udots = []
    for k in range(d):
        mats = [None if j == k else X.factors[j] for j in range(d)]
        D = unfold(_contract(A, mats), k + 1)
        U = X.factors[k]
        M = (D - U @ (U.T @ D)) @ _core_pinv(X, k + 1)
        udots.append(M)
        norms.append(float(np.linalg.norm(M @ unfold(X.core, k + 1))))
    branch = int(np.argmax(norms))
    zero_udot = tuple(np.zeros((X.dims[k], rlow[k])) for k in range(d))
    if branch == 0:
        return TangentVector(X, r, C, zero_udot, tuple(complements)), 0
    k = branch - 1
    udot = tuple(udots[k] if j == k else zero_udot[j] for j in range(d))
    empty = tuple(np.zeros((X.dims[j], 0)) for j in range(d))
    return TangentVector(X, rlow, np.zeros(rlow), udot, empty), branch


def tangent_space_project(X: TuckerTensor, A) -> TangentVector:
    """Closed-form projection onto the tangent space at a full-bound point."""
    empty = [np.zeros((X.dims[k], 0)) for k in range(X.ndim)]
    return approx_project(X, A, X.rank, complements=empty)


def stationarity_measure(X: TuckerTensor, grad, r) -> StationarityReport:
    """Norm of the component of grad violating the normal-cone condition."""
    r = tuple(int(x) for x in r)
    rlow = X.rank
    d = X.ndim
    deficient = tuple(k + 1 for k in range(d) if rlow[k] < r[k])
    mats = [None if (k + 1) in deficient else X.factors[k] for k in range(d)]
    core_resid = float(np.linalg.norm(_contract(grad, mats).ravel()))
    mode_resid = []
    for k in range(d):
        if (k + 1) in deficient:
            mode_resid.append(0.0)
            continue
        mats = [None if j == k else X.factors[j] for j in range(d)]
        D = unfold(_contract(grad, mats), k + 1)
        U = X.factors[k]
        M = D - U @ (U.T @ D)
        mode_resid.append(float(np.linalg.norm(M @ unfold(X.core, k + 1).T)))
    value = float(np.sqrt(core_resid ** 2 + np.sum(np.square(mode_resid))))
    return StationarityReport(value=value, core_residual=core_resid,
                              mode_residuals=tuple(mode_resid),
                              deficient_modes=deficient)


def sample_normal(X: TuckerTensor, r, seed) -> np.ndarray:
    """Random element of the normal cone at X for rank bound r.

    Builds the block parametrization over {span(U_k), span(U_k)^perp}: blocks
    supported purely on deficient modes vanish, and single-complement blocks
    are constrained to the null space of the matching core unfolding.
    """
    r = tuple(int(x) for x in r)
    rlow = X.rank
    d = X.ndim
    dims = X.dims
    deficient = {k for k in range(d) if rlow[k] < r[k]}
    rng = np.random.default_rng(seed)
    perp = [_orth_complement(U) for U in X.factors]
    W = np.zeros(dims)
    for bits in np.ndindex(*([2] * d)):
        if sum(bits[k] for k in range(d) if k not in deficient) == 0:
            continue
        shape = tuple(rlow[k] if bits[k] == 0 else dims[k] - rlow[k]
                      for k in range(d))
        if 0 in shape:
            continue
        C = rng.standard_normal(shape)
        if sum(bits) == 1:
            k = bits.index(1)
            Gk = unfold(X.core, k + 1)
            P = _core_pinv(X, k + 1) @ Gk          # row-space projector
            Ck = unfold(C, k + 1)
            C = fold(Ck - Ck @ P, k + 1, shape)
        block = C
        for k in range(d):
            B = X.factors[k] if bits[k] == 0 else perp[k]
            block = mode_product(block, k + 1, B)
        W += block
    return W


def angle_constants(dims, r, rlow):
    """(omega_tilde, omega_hat) lower bounds for the two angle conditions."""
    dims = tuple(int(n) for n in dims)
    r = tuple(int(x) for x in r)
    rlow = tuple(int(x) for x in rlow)
    if any(a > b for a, b in zip(rlow, r)):
        raise ValueError(f"rank {rlow} exceeds bound {r}")
    d = len(dims)
    total = int(np.prod(dims, dtype=np.int64))
    deficient = [k for k in range(d) if rlow[k] < r[k]]
    c = 1.0
    for k in deficient:
        c *= (r[k] - rlow[k]) / min(dims[k], total // dims[k])
    omega_tilde = float(np.sqrt(c / (len(deficient) + 1)))
    omega_hat = float(np.sqrt(c / (d + 1)))
    return omega_tilde, omega_hat
