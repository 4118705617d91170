import numpy as np
import pytest

from iccbf.qp import (INFEASIBLE, OPTIMAL, QPInfeasibleError, QPProblem, kkt_residual, solve,
                      solve_or_raise)


def test_clamped_scalar():
    # min (u - 0.5)^2 over [-0.25, 0.25]
    sol = solve(QPProblem([[2.0]], [-1.0], lb=[-0.25], ub=[0.25]))
    assert sol.status == OPTIMAL
    assert sol.z[0] == pytest.approx(0.25)


def test_single_active_row():
    sol = solve(QPProblem([[1.0]], [0.0], A=[[-1.0]], b=[-1.0]))
    assert sol.z[0] == pytest.approx(1.0)
    assert sol.active_set == (0,)
    assert sol.multipliers[0] == pytest.approx(1.0)


def test_symmetric_two_variable():
    sol = solve(QPProblem(np.eye(2), np.zeros(2), A=[[-1.0, -1.0]], b=[-2.0]))
    np.testing.assert_allclose(sol.z, [1.0, 1.0], atol=1e-12)


def test_unconstrained():
    sol = solve(QPProblem(np.diag([2.0, 4.0]), [2.0, -4.0]))
    np.testing.assert_allclose(sol.z, [-1.0, 1.0])
    assert sol.active_set == ()


def test_infeasible_has_farkas_certificate():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    b = np.array([-1.0, -1.0])  # x <= -1 and x >= 1
    p = QPProblem(np.eye(2), np.zeros(2), A, b)
    sol = solve(p)
    assert sol.status == INFEASIBLE
    y = sol.farkas
    assert np.all(y >= -1e-12)
    Ar, br = p.rows()
    np.testing.assert_allclose(y @ Ar, 0.0, atol=1e-12)
    assert y @ br < 0
    with pytest.raises(QPInfeasibleError):
        solve_or_raise(p)


def test_degenerate_rows():
    # duplicated and redundant constraints through the same vertex
    A = np.array([[-1.0, 0.0], [-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0]])
    b = np.array([-1.0, -1.0, -1.0, -2.0])
    sol = solve(QPProblem(np.eye(2), np.zeros(2), A, b))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.z, [1.0, 1.0], atol=1e-10)
    assert sol.kkt_residual <= 1e-8


def test_semidefinite_objective():
    # linear cost in the second coordinate, bounded by the constraints
    sol = solve(QPProblem(np.diag([1.0, 0.0]), [0.0, 1.0], lb=[-1, 0.0], ub=[1, 2.0]))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.z, [0.0, 0.0], atol=1e-8)


def test_rejects_bad_hessian():
    with pytest.raises(ValueError):
        QPProblem([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        QPProblem([[-1.0]], [0.0])
    with pytest.raises(ValueError):
        QPProblem(np.eye(2), [0.0, 0.0], A=[[1.0, 0.0]], b=[1.0, 2.0])


def test_deterministic():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(6, 3))
    p = QPProblem(np.eye(3), rng.normal(size=3), A, rng.uniform(-0.5, 1, 6))
    s1, s2 = solve(p), solve(p)
    assert s1.status == s2.status
    np.testing.assert_array_equal(s1.z, s2.z)
    assert s1.active_set == s2.active_set


def test_kkt_residual_of_optimum(rng):
    for _ in range(200):
        n, q = rng.integers(1, 6), rng.integers(0, 10)
        M = rng.normal(size=(n, n))
        H = M @ M.T + 0.1 * np.eye(n)
        A = rng.normal(size=(q, n))
        b = A @ rng.normal(size=n) + rng.uniform(0, 1, q)
        p = QPProblem(H, rng.normal(size=n), A, b)
        sol = solve(p)
        assert sol.status == OPTIMAL
        assert sol.kkt_residual <= 1e-8
        assert kkt_residual(p, sol.z, sol.multipliers) == sol.kkt_residual


def test_max_iterations_status():
    # the optimum (1, 1) has two active rows, so one iteration cannot reach it
    A = np.array([[-1.0, 0.0], [0.0, -1.0]])
    sol = solve(QPProblem(np.eye(2), np.zeros(2), A, [-1.0, -1.0]), max_iter=1)
    assert sol.status == "max-iterations"
