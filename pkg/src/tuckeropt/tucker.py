"""Tucker-format iterates: HOSVD, recompression, and structural queries.

A :class:`TuckerTensor` stores a core tensor together with one orthonormal
factor matrix per mode.  The core unfoldings are kept at full row rank, so the
core dimensions always equal the Tucker rank of the represented tensor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .tensor_core import (
    DEFAULT_RANK_TOL,
    fold,
    mode_product,
    thin_svd,
    unfold,
)

__all__ = [
    "TuckerTensor",
    "hosvd",
    "hosvd_truncate",
    "to_dense",
    "entries_at",
    "tucker_rank",
    "mode_singular_values",
    "add_scaled_tangent",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class TuckerTensor:
    """Core tensor plus orthonormal factors; represents core x_k factors[k]."""

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        factors = tuple(np.asarray(U, dtype=np.float64) for U in self.factors)
        core = np.asarray(self.core, dtype=np.float64)
        if core.ndim != len(factors):
            raise ValueError("core order and factor count disagree")
        for k, U in enumerate(factors):
            if U.shape[1] != core.shape[k]:
                raise ValueError(f"factor {k + 1} has {U.shape[1]} columns, "
                                 f"core mode has size {core.shape[k]}")
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", factors)

    @property
    def dims(self) -> tuple:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def ndim(self) -> int:
        return self.core.ndim

    @property
    def rank(self) -> tuple:
        return self.core.shape

    def fro_norm(self) -> float:
        # factors are orthonormal, so the norm lives in the core
        return float(np.linalg.norm(self.core.ravel()))

    def scale(self, c: float) -> "TuckerTensor":
        return TuckerTensor(c * self.core, self.factors)


def _st_hosvd(A: np.ndarray, r, tau: float = DEFAULT_RANK_TOL):
    """Sequentially truncated HOSVD in ascending mode order.

    Each mode-k step applies the best rank-r_k approximation to the current
    tensor, so the composition equals proj^d(...proj^1(A)).  The requested
    rank is additionally capped at the numerical rank so core unfoldings stay
    at full row rank.
    """
    d = A.ndim
    core = A
    factors = []
    for k in range(1, d + 1):
        M = unfold(core, k)
        f = thin_svd(M)
        sig = f.sigma
        nrank = int(np.count_nonzero(sig > tau * sig[0])) if sig.size and sig[0] > 0 else 0
        rk = min(int(r[k - 1]), nrank)
        factors.append(f.U[:, :rk])
        new_dims = tuple(rk if j == k - 1 else core.shape[j] for j in range(d))
        core = fold(f.U[:, :rk].T @ M, k, new_dims)
    return core, factors


def hosvd(A: np.ndarray, r) -> TuckerTensor:
    """Truncated HOSVD of a dense tensor onto Tucker rank at most r."""
    r = tuple(int(x) for x in r)
    if len(r) != A.ndim:
        raise ValueError("rank tuple length must match tensor order")
    for k, (rk, nk) in enumerate(zip(r, A.shape)):
        nmk = int(np.prod(A.shape, dtype=np.int64)) // nk
        if not 0 <= rk <= min(nk, nmk):
            raise ValueError(f"rank {rk} invalid for mode {k + 1} of dims {A.shape}")
    core, factors = _st_hosvd(A, r)
    return TuckerTensor(core, tuple(factors))


def hosvd_truncate(T: TuckerTensor, r) -> TuckerTensor:
    """Core-only recompression; equals hosvd(to_dense(T), r) without densifying."""
    r = tuple(int(x) for x in r)
    if any(rk > ck for rk, ck in zip(r, T.rank)):
        raise ValueError(f"target rank {r} exceeds current rank {T.rank}")
    core, ws = _st_hosvd(T.core, r)
    return TuckerTensor(core, tuple(U @ W for U, W in zip(T.factors, ws)))


def to_dense(T: TuckerTensor) -> np.ndarray:
    X = T.core
    for k, U in enumerate(T.factors, start=1):
        X = mode_product(X, k, U)
    return X


def _kron_rows(idx: np.ndarray, mats) -> np.ndarray:
    """Per-entry row-wise Kronecker product, mode-1 index fastest.

    idx is (nnz, d) 1-based; mats[k] supplies the mode-k rows.  Output column
    c satisfies c = sum_k c_k * prod_{m<k} q_m with c_1 fastest, matching the
    unfolding column formula over the reduced dimensions.
    """
    nnz = idx.shape[0]
    out = np.ones((nnz, 1))
    for k, M in enumerate(mats):
        rows = M[idx[:, k] - 1]                      # (nnz, q_k)
        out = (rows[:, :, None] * out[:, None, :]).reshape(nnz, -1)
    return out


def _mixed_eval(core: np.ndarray, rows) -> np.ndarray:
    """sum_j core[j] * prod_k rows[k][n, j_k] per entry n, without forming
    the per-entry Kronecker rows (sequential batched contraction)."""
    nnz = rows[0].shape[0]
    d = core.ndim
    # (nnz, rest) with the mode-2 index fastest inside the columns
    T = rows[0] @ unfold(core, 1)
    for k in range(1, d):
        qk = core.shape[k]
        # C-order reshape of fastest-first columns puts mode k last
        T = np.einsum("nrq,nq->nr", T.reshape(nnz, -1, qk), rows[k])
    return T[:, 0]


def entries_at(T: TuckerTensor, idx) -> np.ndarray:
    """Evaluate T at a list of 1-based index tuples without densifying."""
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    if idx.size == 0:
        return np.zeros(0)
    if idx.shape[1] != T.ndim:
        raise ValueError("index tuples have wrong length")
    dims = T.dims
    if (idx < 1).any() or (idx > np.array(dims)).any():
        raise ValueError("index out of range")
    if T.core.size == 0:
        return np.zeros(idx.shape[0])
    rows = [U[idx[:, k] - 1] for k, U in enumerate(T.factors)]
    return _mixed_eval(T.core, rows)


def tucker_rank(A: np.ndarray, tau: float = DEFAULT_RANK_TOL) -> tuple:
    from .tensor_core import numerical_rank

    return tuple(numerical_rank(unfold(A, k), tau) for k in range(1, A.ndim + 1))


def mode_singular_values(T: TuckerTensor):
    """Singular values of every unfolding X_(k), computed from the small core."""
    return [np.linalg.svd(unfold(T.core, k), compute_uv=False)
            for k in range(1, T.ndim + 1)]


def _orthonormalize(M: np.ndarray, tau: float = DEFAULT_RANK_TOL):
    """Deterministic orthonormal basis of span(M) (thin SVD sign convention).

    Returns (Q, R) with M = Q R and Q possibly having fewer columns than M.
    """
    if M.shape[1] == 0 or not M.any():
        return np.zeros((M.shape[0], 0)), np.zeros((0, M.shape[1]))
    f = thin_svd(M)
    q = int(np.count_nonzero(f.sigma > tau * f.sigma[0]))
    Q = f.U[:, :q]
    return Q, Q.T @ M


def add_scaled_tangent(T: TuckerTensor, s: float, V) -> TuckerTensor:
    """Exact Tucker representation of T + s * V for a tangent vector V.

    The mode-k factor is [U_k, Ucomp_k, Q_k] with Q_k an orthonormal basis of
    span(Udot_k); the augmented core collects the core, the scaled coefficient
    block and the scaled Udot contributions.  The result is recompressed at
    its numerical rank so the full-row-rank core invariant is restored.
    """
    if V.anchor is not T:
        if V.anchor.dims != T.dims or V.anchor.rank != T.rank:
            raise ValueError("tangent vector is anchored at a different point")
    d = T.ndim
    rlow = T.rank
    bound = V.bound
    qs, rs = [], []
    for Ud in V.Udot:
        Q, R = _orthonormalize(Ud)
        qs.append(Q)
        rs.append(R)
    blocks = [np.hstack([T.factors[k], V.Ucomp[k], qs[k]]) for k in range(d)]
    aug = tuple(B.shape[1] for B in blocks)
    core = np.zeros(aug)
    # existing point
    core[tuple(slice(0, rlow[k]) for k in range(d))] += T.core
    # coefficient block spans [U_k, Ucomp_k]
    core[tuple(slice(0, bound[k]) for k in range(d))] += s * V.C
    # Udot contributions: G x_k R_k lands in the Q_k block of mode k
    for k in range(d):
        if rs[k].shape[0] == 0:
            continue
        contrib = mode_product(T.core, k + 1, rs[k])
        sl = [slice(0, rlow[j]) for j in range(d)]
        sl[k] = slice(bound[k], bound[k] + rs[k].shape[0])
        core[tuple(sl)] += s * contrib
    out = TuckerTensor(core, tuple(blocks))
    return hosvd_truncate(out, _core_numerical_rank(core))


def _core_numerical_rank(core: np.ndarray, tau: float = DEFAULT_RANK_TOL) -> tuple:
    ranks = []
    for k in range(1, core.ndim + 1):
        s = np.linalg.svd(unfold(core, k), compute_uv=False)
        ranks.append(int(np.count_nonzero(s > tau * s[0])) if s.size and s[0] > 0 else 0)
    return tuple(ranks)


# ---------------------------------------------------------------------------
# Checkpoint format

_CKPT_MAGIC = b"TTKR1"


def save_checkpoint(T: TuckerTensor, path) -> None:
    """Binary checkpoint: magic, dims, core dims, core values, factors."""
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<I", T.ndim))
        f.write(struct.pack(f"<{T.ndim}I", *T.dims))
        f.write(struct.pack(f"<{T.ndim}I", *T.rank))
        f.write(np.asarray(T.core, dtype="<f8").ravel(order="F").tobytes())
        for U in T.factors:
            f.write(np.asarray(U, dtype="<f8").ravel(order="F").tobytes())


def load_checkpoint(path) -> TuckerTensor:
    with open(path, "rb") as f:
        if f.read(5) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a Tucker checkpoint")
        (d,) = struct.unpack("<I", f.read(4))
        dims = struct.unpack(f"<{d}I", f.read(4 * d))
        rank = struct.unpack(f"<{d}I", f.read(4 * d))
        ncore = int(np.prod(rank, dtype=np.int64))
        core = np.frombuffer(f.read(8 * ncore), dtype="<f8").reshape(rank, order="F")
        factors = []
        for k in range(d):
            n = dims[k] * rank[k]
            factors.append(np.frombuffer(f.read(8 * n), dtype="<f8")
                           .reshape((dims[k], rank[k]), order="F"))
    return TuckerTensor(core.copy(), tuple(U.copy() for U in factors))
