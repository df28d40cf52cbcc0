"""Tests for the exact small-QP solver."""

import numpy as np
import pytest

from dopcbf.error import ContractViolation, Infeasible
from dopcbf.qp import QpProblem, check_kkt, solve_qp

from .conftest import enumeration_oracle


def test_unconstrained_minimum():
    """Without constraints the solution is -H^-1 f."""
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = np.array([1.0, -1.0])
    sol = solve_qp(QpProblem(H=H, f=f, G=np.zeros((0, 2)), e=np.zeros(0)))
    np.testing.assert_allclose(sol.z, -np.linalg.solve(H, f), atol=1e-12)
    assert sol.active_set == ()


def test_projection_onto_bound():
    """min 1/2 z^2 - 2 z s.t. z <= 1 sits on the bound with multiplier 1."""
    sol = solve_qp(QpProblem(H=[[1.0]], f=[-2.0], G=[[1.0]], e=[1.0]))
    assert sol.z[0] == pytest.approx(1.0)
    assert sol.active_set == (0,)
    assert sol.multipliers[0] == pytest.approx(1.0)
    assert sol.kkt_residual <= 1e-12


def test_duplicate_rows_pick_lowest_index():
    """Equivalent active sets resolve to the lexicographically first."""
    sol = solve_qp(QpProblem(H=[[1.0]], f=[-2.0], G=[[1.0], [1.0]], e=[1.0, 1.0]))
    assert sol.active_set == (0,)


def test_infeasible_constraints():
    """z <= -1 together with z >= 1 has no solution."""
    with pytest.raises(Infeasible):
        solve_qp(QpProblem(H=[[1.0]], f=[0.0], G=[[1.0], [-1.0]], e=[-1.0, -1.0]))


def test_rejects_bad_hessian():
    """Non-symmetric or indefinite H breaks the problem contract."""
    with pytest.raises(ContractViolation):
        QpProblem(H=[[1.0, 1.0], [0.0, 1.0]], f=[0.0, 0.0], G=np.zeros((0, 2)), e=[])
    with pytest.raises(ContractViolation):
        QpProblem(H=[[1.0, 0.0], [0.0, -1.0]], f=[0.0, 0.0], G=np.zeros((0, 2)), e=[])
    with pytest.raises(ContractViolation):
        QpProblem(H=[[1.0]], f=[0.0, 0.0], G=np.zeros((0, 2)), e=[])


def test_rejects_oversized_problem():
    """More than 16 constraints is outside the solver's range."""
    with pytest.raises(ContractViolation):
        QpProblem(H=[[1.0]], f=[0.0], G=np.ones((17, 1)), e=np.ones(17))


def test_matches_enumeration_oracle():
    """Random feasible QPs agree with the independent enumeration oracle."""
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(0, 7))
        A = rng.normal(size=(n, n))
        H = A.T @ A + np.eye(n)
        f = rng.normal(size=n)
        G = rng.normal(size=(m, n))
        e = G @ rng.normal(size=n) + rng.uniform(0.0, 1.0, size=m)
        p = QpProblem(H=H, f=f, G=G, e=e)

        sol = solve_qp(p)
        z_ref = enumeration_oracle(H, f, G, e)
        assert z_ref is not None
        assert np.all(G @ z_ref <= e + 1e-9 * (1.0 + np.abs(e)))
        ref = p.objective(z_ref)
        assert abs(sol.objective - ref) <= 1e-6 * max(1.0, abs(ref))
        assert sol.kkt_residual <= 1e-8


def test_second_row_binding():
    """Only the second of two half-lines binds; the optimum sits on it."""
    H, f = [[7.402]], [0.717]
    G, e = [[1.264], [0.542]], [-0.258, -0.171]
    p = QpProblem(H=H, f=f, G=G, e=e)
    sol = solve_qp(p)
    assert sol.active_set == (1,)
    assert sol.z[0] == pytest.approx(-0.171 / 0.542, rel=1e-12)
    assert sol.multipliers[0] > 0.0
    assert np.all(p.G @ sol.z <= p.e + 1e-12)
    z_ref = enumeration_oracle(H, f, G, e)
    assert z_ref[0] == pytest.approx(sol.z[0], rel=1e-9)


def test_scaling_the_problem_keeps_the_minimizer():
    """Multiplying the cost by a > 0 and any row by b > 0 leaves z unchanged."""
    rng = np.random.default_rng(19)
    for _ in range(200):
        n, m = 2, 3
        A = rng.normal(size=(n, n))
        H = A.T @ A + np.eye(n)
        f = rng.normal(size=n)
        G = rng.normal(size=(m, n))
        e = G @ rng.normal(size=n) + rng.uniform(0.0, 1.0, size=m)
        a = rng.uniform(0.1, 10.0)
        b = rng.uniform(0.1, 10.0, size=m)
        base = solve_qp(QpProblem(H=H, f=f, G=G, e=e))
        scaled = solve_qp(QpProblem(H=a * H, f=a * f, G=b[:, None] * G, e=b * e))
        np.testing.assert_allclose(scaled.z, base.z, rtol=1e-9, atol=1e-9)
        assert scaled.objective == pytest.approx(a * base.objective, rel=1e-9, abs=1e-9)


def test_non_binding_row_changes_nothing():
    """A constraint slack at the optimum can be added without moving z."""
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        A = rng.normal(size=(n, n))
        H = A.T @ A + np.eye(n)
        f = rng.normal(size=n)
        G = rng.normal(size=(2, n))
        e = G @ rng.normal(size=n) + rng.uniform(0.0, 1.0, size=2)
        base = solve_qp(QpProblem(H=H, f=f, G=G, e=e))
        row = rng.normal(size=(1, n))
        bound = float(row @ base.z) + rng.uniform(0.1, 5.0)
        extended = solve_qp(QpProblem(H=H, f=f, G=np.vstack((G, row)), e=np.append(e, bound)))
        np.testing.assert_allclose(extended.z, base.z, rtol=1e-9, atol=1e-10)
        assert 2 not in extended.active_set


def test_check_kkt_flags_wrong_point():
    """An interior point of a problem whose optimum is on the bound is not KKT."""
    p = QpProblem(H=[[1.0]], f=[-2.0], G=[[1.0]], e=[1.0])
    assert check_kkt(p, [0.0], ()) > 1.0
    assert check_kkt(p, [1.0], (0,)) <= 1e-12
