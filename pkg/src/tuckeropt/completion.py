"""Tucker tensor completion: objective, sparse gradient, synthetic instances.

The training objective is the half squared error over the observed entries,
f(X) = 1/2 ||P_Omega(X) - P_Omega(A)||_F^2, and performance is tracked by the
relative test error over a disjoint held-out index set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor_core import SparseCooTensor, load_coo, save_coo, thin_svd
from .tucker import TuckerTensor, entries_at, _kron_rows

__all__ = [
    "CompletionProblem",
    "objective",
    "euclidean_gradient",
    "multi_mode_contract",
    "test_error",
    "completion_objective",
    "gen_synthetic",
    "random_tucker",
    "save_problem",
    "load_problem",
]


@dataclass(frozen=True)
class CompletionProblem:
    """Training observations P_Omega(A) and test observations P_Gamma(A)."""

    dims: tuple
    omega: SparseCooTensor
    gamma: SparseCooTensor
    p: float

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if self.omega.dims != dims or self.gamma.dims != dims:
            raise ValueError("observation dims disagree with problem dims")
        if not 0 < self.p <= 1:
            raise ValueError("sampling rate must lie in (0, 1]")
        if self.gamma.nnz:
            both = np.vstack([self.omega.idx, self.gamma.idx])
            if np.unique(both, axis=0).shape[0] != both.shape[0]:
                raise ValueError("training and test index sets overlap")
        object.__setattr__(self, "dims", dims)


def objective(P: CompletionProblem, X: TuckerTensor) -> float:
    if X.dims != P.dims:
        raise ValueError(f"iterate dims {X.dims} do not match problem dims {P.dims}")
    resid = entries_at(X, P.omega.idx) - P.omega.vals
    return 0.5 * float(resid @ resid)


def euclidean_gradient(P: CompletionProblem, X: TuckerTensor) -> SparseCooTensor:
    """Gradient of the training objective; supported on Omega."""
    if X.dims != P.dims:
        raise ValueError(f"iterate dims {X.dims} do not match problem dims {P.dims}")
    resid = entries_at(X, P.omega.idx) - P.omega.vals
    return P.omega.with_values(resid)


def multi_mode_contract(S: SparseCooTensor, factors, skip: int) -> np.ndarray:
    """Compute (S x_{j != skip} U_j^T)_(skip) exploiting sparsity.

    ``factors`` holds one matrix per mode (entry for the skipped mode is
    ignored, and None means the identity).  Cost O(nnz * prod q_j) with q_j
    the retained column counts.
    """
    d = len(S.dims)
    if not 1 <= skip <= d:
        raise ValueError(f"mode {skip} out of range")
    mats = []
    for j in range(d):
        if j == skip - 1:
            continue
        U = factors[j]
        if U is None:
            U = np.eye(S.dims[j])
        elif U.shape[0] != S.dims[j]:
            raise ValueError(f"factor {j + 1} has {U.shape[0]} rows, mode has "
                             f"size {S.dims[j]}")
        mats.append(U)
    ncols = int(np.prod([U.shape[1] for U in mats], dtype=np.int64))
    nrows = S.dims[skip - 1]
    if S.nnz == 0:
        return np.zeros((nrows, ncols))
    reduced_idx = np.delete(S.idx, skip - 1, axis=1)
    rows = _kron_rows(reduced_idx, mats)
    contrib = S.vals[:, None] * rows
    # scatter-add by flattened bincount (much faster than np.add.at)
    flat = ((S.idx[:, skip - 1] - 1)[:, None] * ncols
            + np.arange(ncols)[None, :]).ravel()
    out = np.bincount(flat, weights=contrib.ravel(), minlength=nrows * ncols)
    return out.reshape(nrows, ncols)


def test_error(P: CompletionProblem, X: TuckerTensor) -> float:
    """Relative error over the held-out entries."""
    ref = float(np.linalg.norm(P.gamma.vals))
    if P.gamma.nnz == 0 or ref == 0:
        raise ValueError("test set is empty or identically zero")
    resid = entries_at(X, P.gamma.idx) - P.gamma.vals
    return float(np.linalg.norm(resid)) / ref


def random_tucker(dims, r, rng) -> TuckerTensor:
    """Random Tucker tensor: standard normal core, orthonormalized factors."""
    dims = tuple(int(n) for n in dims)
    r = tuple(int(x) for x in r)
    core = rng.standard_normal(r)
    factors = []
    for n, rk in zip(dims, r):
        f = thin_svd(rng.standard_normal((n, rk)))
        factors.append(f.U[:, :rk])
    return TuckerTensor(core, tuple(factors))


def _sample_disjoint(total: int, m: int, rng) -> np.ndarray:
    """Draw 2m distinct linear indices from range(total) without materializing it."""
    if total <= 4 * 2 * m:
        perm = rng.permutation(total)
        return perm[:2 * m]
    chosen = np.empty(0, dtype=np.int64)
    need = 2 * m
    while chosen.size < need:
        cand = rng.integers(0, total, size=2 * (need - chosen.size))
        chosen = np.unique(np.concatenate([chosen, cand]))
    # unique() sorts; re-shuffle deterministically before splitting
    chosen = chosen[rng.permutation(chosen.size)][:need]
    return chosen


def gen_synthetic(n, r_true, p: float, seed: int, test_size: int | None = None):
    """Synthetic completion instance with a known low-rank ground truth.

    Returns (CompletionProblem, ground_truth).  Omega and Gamma are disjoint
    uniform samples; |Omega| = round(p * prod n), |Gamma| = test_size
    (defaults to |Omega|).
    """
    dims = tuple(int(x) for x in n)
    if not 0 < p <= 1:
        raise ValueError("sampling rate must lie in (0, 1]")
    total = int(np.prod(dims, dtype=np.int64))
    m = int(round(p * total))
    m_test = m if test_size is None else int(test_size)
    if m + m_test > total:
        raise ValueError("sampling rate too large for disjoint train/test sets")
    rng = np.random.default_rng(seed)
    truth = random_tucker(dims, r_true, rng)
    lin = _sample_disjoint(total, max(m, m_test), rng)
    idx = np.column_stack(np.unravel_index(lin, dims, order="F")) + 1
    omega_idx = idx[:m]
    gamma_idx = idx[max(m, m_test):max(m, m_test) + m_test]
    omega = SparseCooTensor(dims, omega_idx, entries_at(truth, omega_idx))
    gamma = SparseCooTensor(dims, gamma_idx, entries_at(truth, gamma_idx))
    return CompletionProblem(dims, omega, gamma, p), truth


def completion_objective(P: CompletionProblem):
    """ObjectiveHandle for P with the exact quadratic initial stepsize.

    Along a tangent direction V the objective is an exactly known parabola,
    so the proposed stepsize is its minimizer ||V||^2 / ||P_Omega(V)||^2
    (None when the direction leaves the observed entries unchanged).
    """
    from .geometry import tangent_entries_at, tangent_norm
    from .solvers import ObjectiveHandle

    def initial_step(X, V):
        masked = tangent_entries_at(V, P.omega.idx)
        denom = float(masked @ masked)
        if denom == 0.0:
            return None
        return tangent_norm(V) ** 2 / denom

    def eval_grad(X):
        resid = entries_at(X, P.omega.idx) - P.omega.vals
        return 0.5 * float(resid @ resid), P.omega.with_values(resid)

    return ObjectiveHandle(
        eval=lambda X: objective(P, X),
        grad=lambda X: euclidean_gradient(P, X),
        dims=P.dims,
        initial_step=initial_step,
        test_metric=(lambda X: test_error(P, X)) if P.gamma.nnz else None,
        eval_grad=eval_grad,
    )


# ---------------------------------------------------------------------------
# Problem bundle directory layout: omega.coo, gamma.coo, meta.json

def save_problem(P: CompletionProblem, directory, seed=None, r_true=None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_coo(P.omega, directory / "omega.coo")
    save_coo(P.gamma, directory / "gamma.coo")
    meta = {"dims": list(P.dims), "p": P.p}
    if seed is not None:
        meta["seed"] = seed
    if r_true is not None:
        meta["r_true"] = list(r_true)
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_problem(directory) -> CompletionProblem:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    omega = load_coo(directory / "omega.coo")
    gamma = load_coo(directory / "gamma.coo")
    return CompletionProblem(tuple(meta["dims"]), omega, gamma, meta["p"])
