"""Unit tests for the Tucker representation, HOSVD, and the exact step."""

import numpy as np
import pytest

from tuckeropt import (
    TuckerTensor,
    add_scaled_tangent,
    approx_project,
    embed,
    entries_at,
    fro_norm,
    hosvd,
    hosvd_truncate,
    load_checkpoint,
    mode_singular_values,
    save_checkpoint,
    to_dense,
    tucker_rank,
    unfold,
)
from tuckeropt.completion import random_tucker

RNG = np.random.default_rng(99)


def _rand_low_rank(dims, r, rng=RNG):
    return to_dense(random_tucker(dims, r, rng))


def test_tucker_validation():
    core = RNG.standard_normal((2, 3))
    with pytest.raises(ValueError):
        TuckerTensor(core, (np.eye(4)[:, :2],))
    with pytest.raises(ValueError):
        TuckerTensor(core, (np.eye(4)[:, :3], np.eye(5)[:, :3]))


def test_hosvd_exact_recovery():
    A = _rand_low_rank((6, 7, 5), (2, 3, 2))
    T = hosvd(A, (2, 3, 2))
    assert T.rank == (2, 3, 2)
    assert np.allclose(to_dense(T), A, atol=1e-12)


def test_hosvd_caps_at_numerical_rank():
    A = _rand_low_rank((6, 6, 6), (2, 2, 2))
    T = hosvd(A, (4, 4, 4))
    assert T.rank == (2, 2, 2)


def test_hosvd_quasi_optimality():
    # each mode-k singular tail lower-bounds the best rank-r error, and the
    # truncation error is sandwiched: max_k tail_k <= err <= sqrt(sum tails^2)
    A = RNG.standard_normal((6, 6, 6))
    r = (3, 3, 3)
    T = hosvd(A, r)
    err = fro_norm(A - to_dense(T))
    tails = [np.sqrt(np.sum(
        np.linalg.svd(unfold(A, k), compute_uv=False)[r[k - 1]:] ** 2))
        for k in (1, 2, 3)]
    assert max(tails) - 1e-12 <= err <= np.sqrt(np.sum(np.square(tails))) + 1e-12
    # so err <= sqrt(d) * max tail <= sqrt(d) * best possible error
    assert err <= np.sqrt(3) * max(tails) + 1e-12


def test_hosvd_matches_sequential_best_approx():
    # ascending sweep: mode-k step is the best rank-r_k matrix approximation
    from tuckeropt.tensor_core import best_rank_approx, fold

    A = RNG.standard_normal((5, 4, 6))
    r = (2, 2, 3)
    cur = A
    for k in (1, 2, 3):
        cur = fold(best_rank_approx(unfold(cur, k), r[k - 1]), k, cur.shape)
    T = hosvd(A, r)
    assert np.allclose(to_dense(T), cur, atol=1e-10)


def test_hosvd_truncate_equals_dense_hosvd():
    A = RNG.standard_normal((6, 5, 4))
    T = hosvd(A, (4, 4, 4))
    small = hosvd_truncate(T, (2, 2, 2))
    ref = hosvd(to_dense(T), (2, 2, 2))
    assert np.allclose(to_dense(small), to_dense(ref), atol=1e-10)


def test_hosvd_truncate_rejects_growth():
    T = random_tucker((5, 5, 5), (2, 2, 2), RNG)
    with pytest.raises(ValueError):
        hosvd_truncate(T, (3, 2, 2))


def test_entries_at_matches_dense():
    T = random_tucker((5, 6, 4), (2, 3, 2), RNG)
    A = to_dense(T)
    idx = np.column_stack([RNG.integers(1, n + 1, size=30) for n in T.dims])
    vals = entries_at(T, idx)
    ref = A[tuple(idx.T - 1)]
    assert np.allclose(vals, ref, atol=1e-12)


def test_entries_at_bounds_check():
    T = random_tucker((3, 3, 3), (2, 2, 2), RNG)
    with pytest.raises(ValueError):
        entries_at(T, np.array([[0, 1, 1]]))
    with pytest.raises(ValueError):
        entries_at(T, np.array([[4, 1, 1]]))


def test_tucker_rank_and_mode_singular_values():
    T = random_tucker((6, 6, 6), (2, 3, 2), RNG)
    A = to_dense(T)
    assert tucker_rank(A) == (2, 3, 2)
    for k, sig in enumerate(mode_singular_values(T), start=1):
        ref = np.linalg.svd(unfold(A, k), compute_uv=False)
        assert np.allclose(sig, ref[:sig.size], atol=1e-10)


def test_add_scaled_tangent_exact():
    X = random_tucker((6, 6, 6), (2, 2, 2), RNG)
    A = RNG.standard_normal((6, 6, 6))
    V = approx_project(X, A, (3, 3, 3))
    for s in (0.3, 1.7):
        Y = add_scaled_tangent(X, s, V)
        assert np.allclose(to_dense(Y), to_dense(X) + s * embed(V), atol=1e-10)
        # exact representation: each mode stacks at most r + r_low directions
        assert all(a <= 5 for a in Y.rank)


def test_add_scaled_tangent_full_bound():
    # no complement columns: the step stays inside rank <= r_low in each mode
    X = random_tucker((5, 5, 5), (3, 3, 3), RNG)
    A = RNG.standard_normal((5, 5, 5))
    V = approx_project(X, A, (3, 3, 3))
    Y = add_scaled_tangent(X, 0.5, V)
    assert np.allclose(to_dense(Y), to_dense(X) + 0.5 * embed(V), atol=1e-10)


def test_checkpoint_roundtrip(tmp_path):
    T = random_tucker((5, 4, 6), (2, 3, 2), RNG)
    path = tmp_path / "x.ttkr"
    save_checkpoint(T, path)
    S = load_checkpoint(path)
    assert S.dims == T.dims and S.rank == T.rank
    assert np.array_equal(S.core, T.core)
    for a, b in zip(S.factors, T.factors):
        assert np.array_equal(a, b)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ttkr"
    path.write_bytes(b"WRONG" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_checkpoint(path)
