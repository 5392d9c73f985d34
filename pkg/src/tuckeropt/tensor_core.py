"""Dense/sparse tensor containers and the low-level multilinear kernels.

Conventions used throughout the package:

* Dense tensors are plain numpy arrays.  Their vectorization order is
  mode-1-fastest (Fortran order), so ``unfold(X, 1)`` is a cheap reshape.
* Modes are 1-based, matching the usual multilinear-algebra notation.
* The mode-k unfolding places entry ``(i_1, ..., i_d)`` at row ``i_k`` and
  column ``1 + sum_{l != k} (i_l - 1) J_l`` with ``J_l = prod_{m < l, m != k} n_m``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SparseCooTensor",
    "SvdResult",
    "unfold",
    "fold",
    "mode_product",
    "inner",
    "fro_norm",
    "thin_svd",
    "best_rank_approx",
    "delta_rank",
    "numerical_rank",
    "save_dense",
    "load_dense",
    "save_coo",
    "load_coo",
]

DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True)
class SparseCooTensor:
    """Coordinate-list tensor with 1-based indices, canonically sorted.

    ``idx`` has shape (nnz, d); ``vals`` has shape (nnz,).  Entries are unique
    and sorted lexicographically so equality and hashing of observation sets
    are deterministic.
    """

    dims: tuple
    idx: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        idx = np.atleast_2d(np.asarray(self.idx, dtype=np.int64))
        vals = np.asarray(self.vals, dtype=np.float64).ravel()
        if idx.size == 0:
            idx = idx.reshape(0, len(dims))
        if idx.shape != (vals.size, len(dims)):
            raise ValueError(f"index array shape {idx.shape} inconsistent with "
                             f"{vals.size} values over {len(dims)} modes")
        if idx.size and (idx.min(axis=0).min() < 1 or (idx > np.array(dims)).any()):
            raise ValueError("sparse index out of range")
        order = np.lexsort(idx.T[::-1])
        idx = idx[order]
        vals = vals[order]
        if idx.shape[0] > 1 and (np.diff(idx, axis=0) == 0).all(axis=1).any():
            raise ValueError("duplicate sparse indices")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "idx", idx)
        object.__setattr__(self, "vals", vals)
        self.idx.setflags(write=False)
        self.vals.setflags(write=False)

    @property
    def nnz(self) -> int:
        return self.vals.size

    def scale(self, c: float) -> "SparseCooTensor":
        return self.with_values(c * self.vals)

    def with_values(self, vals: np.ndarray) -> "SparseCooTensor":
        """Same sparsity pattern, new values; skips re-validation/re-sorting."""
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if vals.size != self.nnz:
            raise ValueError(f"expected {self.nnz} values, got {vals.size}")
        out = object.__new__(SparseCooTensor)
        object.__setattr__(out, "dims", self.dims)
        object.__setattr__(out, "idx", self.idx)
        object.__setattr__(out, "vals", vals)
        out.vals.setflags(write=False)
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        if self.nnz:
            out[tuple(self.idx.T - 1)] = self.vals
        return out


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD with a deterministic sign convention.

    In each left singular vector the entry of largest absolute value (ties
    broken by lowest row index) is non-negative; V is adjusted accordingly.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def unfold(X: np.ndarray, k: int) -> np.ndarray:
    """Mode-k unfolding of X into an (n_k, n_{-k}) matrix."""
    if not 1 <= k <= X.ndim:
        raise ValueError(f"mode {k} out of range for order-{X.ndim} tensor")
    # explicit column count: reshape(n_k, -1) cannot infer it when n_k == 0
    cols = int(np.prod([n for i, n in enumerate(X.shape) if i != k - 1],
                       dtype=np.int64))
    return np.moveaxis(X, k - 1, 0).reshape(X.shape[k - 1], cols, order="F")


def fold(M: np.ndarray, k: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold`; bit-identical reordering."""
    dims = tuple(dims)
    if not 1 <= k <= len(dims):
        raise ValueError(f"mode {k} out of range for dims {dims}")
    rest = dims[:k - 1] + dims[k:]
    if M.shape != (dims[k - 1], int(np.prod(rest, dtype=np.int64))):
        raise ValueError(f"matrix shape {M.shape} inconsistent with dims {dims} at mode {k}")
    return np.moveaxis(M.reshape((dims[k - 1],) + rest, order="F"), 0, k - 1)


def mode_product(X: np.ndarray, k: int, A: np.ndarray) -> np.ndarray:
    """k-mode product X x_k A, satisfying (X x_k A)_(k) = A X_(k)."""
    if A.shape[1] != X.shape[k - 1]:
        raise ValueError(f"matrix with {A.shape[1]} columns cannot multiply mode "
                         f"{k} of size {X.shape[k - 1]}")
    dims = list(X.shape)
    dims[k - 1] = A.shape[0]
    return fold(A @ unfold(X, k), k, dims)


def inner(X: np.ndarray, Y: np.ndarray) -> float:
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    return float(np.dot(X.ravel(), Y.ravel()))


def fro_norm(X) -> float:
    if isinstance(X, SparseCooTensor):
        return float(np.linalg.norm(X.vals))
    return float(np.linalg.norm(np.asarray(X).ravel()))


def thin_svd(M: np.ndarray) -> SvdResult:
    """Thin SVD with the deterministic sign convention of :class:`SvdResult`."""
    if not np.isfinite(M).all():
        raise ValueError("non-finite entries in SVD input")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    V = Vt.T
    if U.shape[1]:
        lead = np.argmax(np.abs(U), axis=0)
        signs = np.sign(U[lead, np.arange(U.shape[1])])
        signs[signs == 0] = 1.0
        U = U * signs
        V = V * signs
    return SvdResult(U=U, sigma=s, V=V)


def best_rank_approx(M: np.ndarray, r: int) -> np.ndarray:
    """Best rank-r approximation (Eckart-Young) via the thin SVD."""
    if not 0 <= r <= min(M.shape):
        raise ValueError(f"rank {r} out of range for {M.shape} matrix")
    if r == 0:
        return np.zeros_like(M)
    f = thin_svd(M)
    return (f.U[:, :r] * f.sigma[:r]) @ f.V[:, :r].T


def delta_rank(sigma, delta: float) -> int:
    """min{i >= 0 : sigma_{i+1} <= delta}, with sigma past the end read as 0."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sigma = np.asarray(sigma, dtype=np.float64)
    below = np.nonzero(sigma <= delta)[0]
    return int(below[0]) if below.size else int(sigma.size)


def numerical_rank(M: np.ndarray, tau: float = DEFAULT_RANK_TOL) -> int:
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tau * s[0]))


# ---------------------------------------------------------------------------
# File formats

_DENSE_MAGIC = b"TDNS1"


def save_dense(X: np.ndarray, path) -> None:
    """Binary dense format: magic, u32 d, u32 dims[d], float64 LE values."""
    with open(path, "wb") as f:
        f.write(_DENSE_MAGIC)
        f.write(struct.pack("<I", X.ndim))
        f.write(struct.pack(f"<{X.ndim}I", *X.shape))
        f.write(np.asarray(X, dtype="<f8").ravel(order="F").tobytes())


def load_dense(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(5) != _DENSE_MAGIC:
            raise ValueError(f"{path}: not a dense tensor file")
        (d,) = struct.unpack("<I", f.read(4))
        dims = struct.unpack(f"<{d}I", f.read(4 * d))
        vals = np.frombuffer(f.read(), dtype="<f8")
    if vals.size != int(np.prod(dims, dtype=np.int64)):
        raise ValueError(f"{path}: truncated dense tensor file")
    return vals.reshape(dims, order="F").copy()


def save_coo(S: SparseCooTensor, path) -> None:
    """Text COO format: header 'd n_1 ... n_d', then 'i_1 ... i_d value' lines."""
    with open(path, "w") as f:
        f.write(" ".join([str(len(S.dims))] + [str(n) for n in S.dims]) + "\n")
        for row, v in zip(S.idx, S.vals):
            f.write(" ".join(str(int(i)) for i in row) + f" {float(v)!r}\n")


def load_coo(path) -> SparseCooTensor:
    with open(path) as f:
        header = f.readline().split()
        if not header:
            raise ValueError(f"{path}: empty COO file")
        d = int(header[0])
        if len(header) != d + 1:
            raise ValueError(f"{path}: malformed COO header")
        dims = tuple(int(n) for n in header[1:])
        idx, vals = [], []
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != d + 1:
                raise ValueError(f"{path}: malformed COO entry {line!r}")
            idx.append([int(p) for p in parts[:d]])
            vals.append(float(parts[d]))
    return SparseCooTensor(dims, np.array(idx, dtype=np.int64).reshape(len(vals), d),
                           np.array(vals))
