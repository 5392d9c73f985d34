"""Unit tests for the tensor-completion objective and synthetic instances."""

import numpy as np
import pytest

from tuckeropt import (
    CompletionProblem,
    SparseCooTensor,
    completion_objective,
    entries_at,
    euclidean_gradient,
    gen_synthetic,
    load_problem,
    multi_mode_contract,
    objective,
    random_tucker,
    save_problem,
    to_dense,
)
from tuckeropt import test_error as completion_test_error
from tuckeropt.tensor_core import fold, mode_product, unfold

RNG = np.random.default_rng(21)


def _problem(dims=(6, 6, 6), r=(2, 2, 2), p=0.3, seed=3):
    return gen_synthetic(dims, r, p, seed=seed)


def test_gen_synthetic_structure():
    P, truth = _problem()
    total = 6 ** 3
    assert P.omega.nnz == round(0.3 * total)
    assert P.gamma.nnz == P.omega.nnz
    both = np.vstack([P.omega.idx, P.gamma.idx])
    assert np.unique(both, axis=0).shape[0] == both.shape[0]
    # observed values agree with the ground truth
    assert np.allclose(P.omega.vals, entries_at(truth, P.omega.idx))
    assert np.allclose(P.gamma.vals, entries_at(truth, P.gamma.idx))


def test_gen_synthetic_deterministic():
    P1, t1 = _problem(seed=9)
    P2, t2 = _problem(seed=9)
    assert np.array_equal(P1.omega.idx, P2.omega.idx)
    assert np.array_equal(P1.omega.vals, P2.omega.vals)
    assert np.array_equal(t1.core, t2.core)


def test_problem_rejects_overlap():
    idx = np.array([[1, 1, 1], [2, 2, 2]])
    S = SparseCooTensor((3, 3, 3), idx, np.ones(2))
    with pytest.raises(ValueError):
        CompletionProblem((3, 3, 3), S, S, 0.1)


def test_objective_and_gradient_consistent():
    P, truth = _problem()
    X = random_tucker(P.dims, (2, 2, 2), RNG)
    f = objective(P, X)
    resid = entries_at(X, P.omega.idx) - P.omega.vals
    assert f == pytest.approx(0.5 * resid @ resid)
    g = euclidean_gradient(P, X)
    assert np.array_equal(g.idx, P.omega.idx)
    assert np.allclose(g.vals, resid)
    # zero at the ground truth
    assert objective(P, truth) < 1e-20
    assert np.linalg.norm(euclidean_gradient(P, truth).vals) < 1e-10


def test_objective_gradient_finite_difference():
    P, _ = _problem(dims=(4, 4, 4), p=0.4)
    X = random_tucker(P.dims, (2, 2, 2), RNG)
    g = euclidean_gradient(P, X).to_dense()
    dense = to_dense(X)

    def f(A):
        vals = A[tuple(P.omega.idx.T - 1)] - P.omega.vals
        return 0.5 * vals @ vals

    h = 1e-6
    rng = np.random.default_rng(0)
    for _ in range(10):
        i = tuple(int(rng.integers(0, n)) for n in P.dims)
        Ap = dense.copy()
        Ap[i] += h
        Am = dense.copy()
        Am[i] -= h
        fd = (f(Ap) - f(Am)) / (2 * h)
        assert fd == pytest.approx(g[i], abs=1e-6)


def test_multi_mode_contract_matches_dense():
    P, _ = _problem(dims=(5, 4, 6), p=0.4)
    S = P.omega
    U = [RNG.standard_normal((n, 2)) for n in S.dims]
    for skip in (1, 2, 3):
        got = multi_mode_contract(S, U, skip)
        ref = S.to_dense()
        for j in range(3):
            if j != skip - 1:
                ref = mode_product(ref, j + 1, U[j].T)
        assert np.allclose(got, unfold(ref, skip), atol=1e-12)


def test_multi_mode_contract_identity_factor():
    P, _ = _problem(dims=(4, 4, 4), p=0.5)
    S = P.omega
    U = [None, RNG.standard_normal((4, 2)), RNG.standard_normal((4, 3))]
    got = multi_mode_contract(S, U, 1)
    ref = mode_product(mode_product(S.to_dense(), 2, U[1].T), 3, U[2].T)
    assert np.allclose(got, unfold(ref, 1), atol=1e-12)


def test_test_error():
    P, truth = _problem()
    assert completion_test_error(P, truth) < 1e-12
    other = random_tucker(P.dims, (2, 2, 2), RNG)
    assert completion_test_error(P, other) > 1e-2


def test_completion_objective_handle():
    P, truth = _problem()
    obj = completion_objective(P)
    X = random_tucker(P.dims, (2, 2, 2), RNG)
    assert obj.eval(X) == pytest.approx(objective(P, X))
    assert obj.test_metric is not None
    assert obj.test_metric(X) == pytest.approx(completion_test_error(P, X))


def test_initial_step_minimizes_parabola():
    from tuckeropt.geometry import approx_project
    from tuckeropt.solvers import _negate
    from tuckeropt.tucker import add_scaled_tangent

    P, _ = _problem()
    obj = completion_objective(P)
    X = random_tucker(P.dims, (2, 2, 2), RNG)
    V = approx_project(X, _negate(obj.grad(X)), (3, 3, 3))
    s = obj.initial_step(X, V)
    assert s > 0

    def phi(t):
        # objective along the un-truncated step (exact parabola)
        Y = add_scaled_tangent(X, t, V)
        return obj.eval(Y)

    eps = 1e-4 * s
    assert phi(s) <= phi(s + eps) + 1e-12
    assert phi(s) <= phi(s - eps) + 1e-12


def test_problem_bundle_roundtrip(tmp_path):
    P, _ = _problem()
    save_problem(P, tmp_path / "prob", seed=3, r_true=(2, 2, 2))
    Q = load_problem(tmp_path / "prob")
    assert Q.dims == P.dims and Q.p == P.p
    assert np.array_equal(Q.omega.idx, P.omega.idx)
    assert np.array_equal(Q.omega.vals, P.omega.vals)
    assert np.array_equal(Q.gamma.idx, P.gamma.idx)
