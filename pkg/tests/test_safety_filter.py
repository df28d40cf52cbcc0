"""Tests for constraint rows, QP assembly and the invariance certificate."""

import math

import numpy as np
import pytest

from dopcbf.acc import baseline_barrier, braking_distance, dop_barrier, nominal_barrier, speed_clf
from dopcbf.error import ConfigurationError
from dopcbf.qp import solve_qp
from dopcbf.safety_filter import (
    BarrierSpec, ConstraintRow, RobustnessParams, assemble_qp, cbf_row_regular, certificate_square,
    clf_row, docbf_row, dopcbf_row, hdot_lower_bound, iota,
)


def _rp(omega=0.0):
    return RobustnessParams(sigma=1.0, omega=omega, nu=1.0, alpha_d=2.5)


def test_clf_row_at_reference_speed(params, plant):
    """V = 0 with zero gradient leaves only the slack."""
    row = clf_row(speed_clf(params), plant, [70.0, params.v_r], [0.0])
    np.testing.assert_allclose(row.coeff_u, [0.0])
    assert row.coeff_slack == -1.0
    assert row.bound == pytest.approx(0.0)


def test_clf_row_uses_estimate(params, plant):
    """L_g2 V d_hat moves the bound."""
    clf = speed_clf(params)
    x = np.array([70.0, 20.0])
    base = clf_row(clf, plant, x, [0.0])
    shifted = clf_row(clf, plant, x, [1.0])
    assert base.bound - shifted.bound == pytest.approx(2.0 * (20.0 - params.v_r))


def test_regular_cbf_row_by_hand(params, plant):
    """-L_g1 h u <= L_f h + alpha h for the flat-road barrier."""
    x = np.array([70.0, 20.0])
    row = cbf_row_regular(nominal_barrier(params, 1.0), plant, x)
    dh_dv = -20.0 / (params.mu * params.g) - params.T
    h = 70.0 - 400.0 / (2 * params.mu * params.g) - 40.0
    lf = (params.v_l - 20.0) + dh_dv * (-params.c * 400.0 / params.M)
    np.testing.assert_allclose(row.coeff_u, [-dh_dv / params.M])
    assert row.bound == pytest.approx(lf + h)


def test_docbf_iota(params, plant):
    """DO-CBF margin is |L_g2 h|^2 / (4 (sigma alpha_d - sigma alpha / 2))."""
    x = np.array([80.0, 20.0])
    spec = baseline_barrier(params, 1.0)
    q = -20.0 / (params.g * (params.mu - math.sin(params.theta_dm))) - params.T
    with_iota = docbf_row(spec, _rp(), plant, x, [0.0])
    plain = cbf_row_regular(spec, plant, x)
    assert plain.bound - with_iota.bound == pytest.approx(q * q / 8.0)


def test_constant_delta_reduces_to_docbf(params, plant, obs_cfg):
    """A constant delta gives the DO-CBF row of the shifted barrier."""
    rng = np.random.default_rng(3)
    base = baseline_barrier(params, 1.0)
    rp = _rp(omega=0.3)
    for _ in range(1000):
        c0 = rng.uniform(-5.0, 5.0)
        x = np.array([rng.uniform(10.0, 120.0), rng.uniform(0.0, 35.0)])
        d_hat = np.array([rng.uniform(-2.0, 2.0)])
        param = BarrierSpec(h=base.h, grad_h=base.grad_h, alpha=1.0,
                            delta=lambda x, d, c0=c0: c0,
                            grad_delta_x=lambda x, d: np.zeros(2),
                            grad_delta_d=lambda x, d: np.zeros(1))
        shifted = BarrierSpec(h=lambda x, c0=c0: base.h(x) + c0, grad_h=base.grad_h, alpha=1.0)
        a = dopcbf_row(param, rp, plant, obs_cfg, x, d_hat)
        b = docbf_row(shifted, rp, plant, x, d_hat)
        np.testing.assert_allclose(a.coeff_u, b.coeff_u, rtol=1e-12, atol=0.0)
        assert a.bound == pytest.approx(b.bound, rel=1e-12, abs=1e-12)


def test_iota_positive_and_includes_gain_term(params, plant, obs_cfg):
    """The estimate-dependent delta adds its observer-gain term to q."""
    x = np.array([100.0, 20.0])
    with_delta = iota(dop_barrier(params, 1.0), _rp(), plant, obs_cfg, x, [0.0])
    without = iota(nominal_barrier(params, 1.0), _rp(), plant, obs_cfg, x, [0.0])
    assert with_delta > without > 0.0


def test_certificate_on_boundary_states(params, plant, obs_cfg):
    """On h_dhat - sigma V_e = 0 with the row tight, the lower bound is the perfect square."""
    rng = np.random.default_rng(11)
    spec = dop_barrier(params, 1.0)
    rp = _rp(omega=0.2)
    for _ in range(10000):
        v = rng.uniform(0.0, 35.0)
        theta_hat = rng.uniform(-0.2, 0.2)
        d_hat = np.array([-params.g * math.sin(theta_hat)])
        e_d = np.array([rng.uniform(-2.0, 2.0)])
        D = rp.sigma * 0.5 * e_d[0] ** 2 + braking_distance(v, theta_hat, params) + params.T * v
        x = np.array([D, v])
        row = dopcbf_row(spec, rp, plant, obs_cfg, x, d_hat)
        u = np.array([row.bound / row.coeff_u[0]])
        lb = hdot_lower_bound(spec, rp, plant, obs_cfg, x, u, d_hat, e_d)
        sq = certificate_square(spec, rp, plant, obs_cfg, x, d_hat, e_d)
        scale = 1.0 + abs(row.bound) + iota(spec, rp, plant, obs_cfg, x, d_hat)
        assert sq >= 0.0
        assert abs(lb - sq) <= 1e-9 * scale


def test_assemble_qp_layout():
    """z = [u, s] with diagonal weights and the s >= 0 row appended."""
    rows = [ConstraintRow(coeff_u=np.array([2.0]), coeff_slack=-1.0, bound=3.0)]
    p = assemble_qp(rows, [5.0], 0.5, 100.0)
    np.testing.assert_allclose(p.H, np.diag([0.5, 100.0]))
    np.testing.assert_allclose(p.f, [-2.5, 0.0])
    np.testing.assert_allclose(p.G, [[2.0, -1.0], [0.0, -1.0]])
    np.testing.assert_allclose(p.e, [3.0, 0.0])
    with pytest.raises(ConfigurationError):
        assemble_qp(rows, [5.0], 0.0, 1.0)


def test_robustness_check(params):
    """alpha must stay below 2 alpha_d."""
    with pytest.raises(ConfigurationError) as exc:
        _rp().check(nominal_barrier(params, 6.0))
    assert exc.value.path == "alpha"
    _rp().check(nominal_barrier(params, 1.0))


def test_larger_sigma_shrinks_iota_and_widens_the_row(params, plant, obs_cfg):
    """With omega = 0, iota falls and the admissible force interval grows with sigma."""
    spec = dop_barrier(params, 1.0)
    x, d_hat = np.array([70.0, 20.0]), np.array([0.5])
    iotas, u_max = [], []
    for sigma in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0):
        rp = RobustnessParams(sigma=sigma, omega=0.0, nu=1.0, alpha_d=2.5)
        iotas.append(iota(spec, rp, plant, obs_cfg, x, d_hat))
        row = dopcbf_row(spec, rp, plant, obs_cfg, x, d_hat)
        assert row.coeff_u[0] > 0.0
        u_max.append(row.bound / row.coeff_u[0])
    assert all(a > b > 0.0 for a, b in zip(iotas, iotas[1:]))
    assert all(a < b for a, b in zip(u_max, u_max[1:]))
    assert iotas[3] == pytest.approx(iotas[2] / 2.0, rel=1e-12)


def test_single_row_qp_is_halfspace_projection():
    """Without a CLF row the input is u_ref projected onto a u <= b, and s = 0."""
    rng = np.random.default_rng(29)
    for _ in range(500):
        a = rng.normal(size=2)
        b = rng.normal()
        u_ref = rng.normal(scale=3.0, size=2)
        w_u = rng.uniform(0.1, 10.0)
        p = assemble_qp([ConstraintRow(coeff_u=a, coeff_slack=0.0, bound=b)], u_ref, w_u, 100.0)
        sol = solve_qp(p)
        expected = u_ref - max(0.0, a @ u_ref - b) / (a @ a) * a
        np.testing.assert_allclose(sol.z[:2], expected, rtol=1e-9, atol=1e-9)
        assert sol.z[2] == pytest.approx(0.0, abs=1e-12)


def test_conflicting_rows_relax_only_the_clf(params, plant, obs_cfg):
    """Below the reference speed and inside the barrier: the CBF row binds exactly, the slack absorbs the CLF."""
    x, d_hat = np.array([60.0, 20.0]), np.array([0.0])
    clf = clf_row(speed_clf(params), plant, x, d_hat)
    cbf = dopcbf_row(dop_barrier(params, 1.0), _rp(), plant, obs_cfg, x, d_hat)
    sol = solve_qp(assemble_qp([clf, cbf], [params.c * 400.0], 1.0 / params.M ** 2, 100.0))
    u, s = sol.z[:1], float(sol.z[1])
    assert s > 0.0
    assert float(cbf.coeff_u @ u) == pytest.approx(cbf.bound, abs=1e-8)
    assert float(clf.coeff_u @ u) + clf.coeff_slack * s == pytest.approx(clf.bound, abs=1e-8)
    assert u[0] < params.c * 400.0
    assert sol.active_set == (0, 1)


@pytest.mark.parametrize("theta_hat", [0.0, -0.1, 0.12])
def test_dopcbf_row_against_hand_derivation(params, plant, obs_cfg, theta_hat):
    """Row at D = 70, v = 20 from the Lie derivatives written out by hand."""
    p = params
    D, v = 70.0, 20.0
    d_hat = -p.g * math.sin(theta_hat)
    a = p.mu + math.sin(theta_hat)
    h = D - v * v / (2.0 * a * p.g) - p.T * v
    dh_dv = -v / (a * p.g) - p.T
    # d/d d_hat through theta_hat = asin(-d_hat / g)
    dh_dd = -v * v / (2.0 * a * a * p.g * p.g)
    lf = (p.v_l - v) + dh_dv * (-p.c * v * v / p.M)
    lg1 = dh_dv / p.M
    lg2 = dh_dv
    q = lg2 + dh_dd * 3.0
    sigma, alpha, a_d = 1.0, 1.0, 2.5
    iota_hand = q * q / (4.0 * (sigma * a_d - sigma * alpha / 2.0))

    row = dopcbf_row(dop_barrier(p, alpha), _rp(), plant, obs_cfg, [D, v], [d_hat])
    np.testing.assert_allclose(row.coeff_u, [-lg1], rtol=1e-12)
    assert row.coeff_slack == 0.0
    assert row.bound == pytest.approx(lf + lg2 * d_hat + alpha * h - iota_hand, rel=1e-10)
    if theta_hat == 0.0:
        assert q == pytest.approx(-14.29, abs=5e-3)
        assert iota_hand == pytest.approx(25.53, abs=5e-3)
