"""Tests for RK4 stepping and the zero-order-hold closed loop."""

import logging
import math

import numpy as np
import pytest

from dopcbf.acc import (
    AccParams, FilterParams, acc_closed_loop_rhs, acc_observer_config, acc_plant, disturbance_from_grade,
)
from dopcbf.core import AffinePlant, ControlSample
from dopcbf.error import ConfigurationError, Infeasible, IntegrationError
from dopcbf.integrator import SimConfig, rk4_step, simulate
from dopcbf.observer import DisturbanceObserver, ObserverConfig
from dopcbf.scenarios import three_section_profile


def _integrator_plant():
    """x' = u + d with a single state."""
    one = np.ones((1, 1))
    return AffinePlant(n_x=1, n_u=1, n_d=1, f=lambda x: np.zeros(1), g1=lambda x: one, g2=lambda x: one)


def _blind_observer(plant):
    cfg = ObserverConfig(p=lambda x: np.zeros(1), l=lambda x: np.zeros((1, 1)))
    return DisturbanceObserver(cfg, plant)


def test_sim_config_validation():
    """Step sizes must be positive, nested and dividing."""
    with pytest.raises(ConfigurationError) as exc:
        SimConfig(dt_ctrl=0.01, dt_int=0.02)
    assert exc.value.path == "dt_int"
    with pytest.raises(ConfigurationError):
        SimConfig(t_end=1.0, dt_ctrl=0.3, dt_int=0.1)
    with pytest.raises(ConfigurationError):
        SimConfig(dt_ctrl=0.01, dt_int=0.003)
    with pytest.raises(ConfigurationError):
        SimConfig(record_every=0)
    cfg = SimConfig()
    assert cfg.n_periods == 10000
    assert cfg.n_substeps == 10


def test_rk4_single_step_on_exponential():
    """One step of x' = x matches the degree-4 Taylor polynomial."""
    h = 0.1
    x = rk4_step(lambda t, y: y, 0.0, np.array([1.0]), h)
    assert x[0] == pytest.approx(1 + h + h ** 2 / 2 + h ** 3 / 6 + h ** 4 / 24, abs=1e-15)


def test_rk4_non_finite_derivative():
    """A NaN stage aborts with the time and state."""
    with pytest.raises(IntegrationError):
        rk4_step(lambda t, y: y * math.nan, 0.0, np.array([1.0]), 0.1)


def test_zero_order_hold():
    """u = tick time is held over each period: x(1) = 0.1 * (0 + 0.1 + ... + 0.9)."""
    plant = _integrator_plant()
    cfg = SimConfig(t_end=1.0, dt_ctrl=0.1, dt_int=0.01)
    traj = simulate(plant, lambda t, x, obs: ControlSample(t=t, u=np.array([t])),
                    _blind_observer(plant), lambda t: np.zeros(1), [0.0], cfg)
    assert len(traj) == 11
    assert traj.states[-1, 0] == pytest.approx(0.45, abs=1e-12)
    np.testing.assert_allclose(traj.controls[:-1, 0], np.arange(10) * 0.1, atol=1e-12)


def test_controller_failure_holds_previous_control():
    """A failing tick is recorded and the last control stays applied."""
    plant = _integrator_plant()
    cfg = SimConfig(t_end=1.0, dt_ctrl=0.1, dt_int=0.05)

    def controller(t, x, obs):
        if t > 0.45:
            raise Infeasible()
        return ControlSample(t=t, u=np.array([1.0]))

    traj = simulate(plant, controller, _blind_observer(plant), lambda t: np.zeros(1), [0.0], cfg)
    assert len(traj.failures) == 5
    assert traj.failures[0].t == pytest.approx(0.5)
    assert traj.states[-1, 0] == pytest.approx(1.0, abs=1e-12)


def test_record_every_keeps_final_sample():
    """Decimated output still ends at t_end."""
    plant = _integrator_plant()
    cfg = SimConfig(t_end=1.0, dt_ctrl=0.1, dt_int=0.1, record_every=3)
    traj = simulate(plant, lambda t, x, obs: ControlSample(t=t, u=np.zeros(1)),
                    _blind_observer(plant), lambda t: np.zeros(1), [0.0], cfg)
    np.testing.assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-12)


def test_rk4_fourth_order_convergence():
    """Halving the substep shrinks successive differences about 16-fold."""
    p = AccParams()
    plant = acc_plant(p)
    observer = DisturbanceObserver(acc_observer_config(p, [3.0, 3.0], FilterParams()), plant)

    def controller(t, x, obs):
        v = x[1]
        return ControlSample(t=t, u=np.array([p.c * v * v + p.M * 0.1 * (p.v_r - v)]))

    finals = []
    for dt_int in (0.05, 0.025, 0.0125):
        cfg = SimConfig(t_end=10.0, dt_ctrl=0.05, dt_int=dt_int)
        traj = simulate(plant, controller, observer, lambda t: np.array([2.0 * math.sin(2.0 * t)]),
                        [70.0, 20.0], cfg)
        finals.append(np.concatenate((traj.states[-1], traj.estimates[-1])))
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert 12.0 <= ratio <= 20.0


def test_period_controls_survive_decimation():
    """Every period's input is kept even when samples are thinned out."""
    plant = _integrator_plant()
    cfg = SimConfig(t_end=1.0, dt_ctrl=0.1, dt_int=0.05, record_every=4)
    traj = simulate(plant, lambda t, x, obs: ControlSample(t=t, u=np.array([t])),
                    _blind_observer(plant), lambda t: np.zeros(1), [0.0], cfg)
    assert len(traj) == 4
    assert traj.dt_ctrl == 0.1
    assert traj.period_controls.shape == (10, 1)
    np.testing.assert_allclose(traj.period_controls[:, 0], np.arange(10) * 0.1, atol=1e-12)


def test_float_path_matches_array_path():
    p = AccParams()
    plant = acc_plant(p)
    Lr = [3.0, 3.0]
    observer = DisturbanceObserver(acc_observer_config(p, Lr, FilterParams()), plant)
    road = three_section_profile()

    def controller(t, x, obs):
        v = x[1]
        return ControlSample(t=t, u=np.array([p.c * v * v + p.M * 0.2 * (p.v_r - v)]))

    def disturbance(t):
        return np.array([disturbance_from_grade(road.theta(t), p)])

    cfg = SimConfig(t_end=30.0, dt_ctrl=0.01, dt_int=0.005, record_every=10)
    slow = simulate(plant, controller, observer, disturbance, [70.0, 20.0], cfg)
    fast = simulate(plant, controller, observer, disturbance, [70.0, 20.0], cfg,
                    fast_rhs=acc_closed_loop_rhs(p, Lr, road.theta))
    np.testing.assert_allclose(fast.states, slow.states, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(fast.estimates, slow.estimates, rtol=1e-9, atol=1e-8)
    np.testing.assert_allclose(fast.period_controls, slow.period_controls, rtol=1e-9)


@pytest.mark.parametrize("use_float_path", [False, True])
def test_projection_is_flagged_and_reported_once(use_float_path, caplog):
    """Braking through zero speed clamps v; the run warns a single time."""
    p = AccParams()
    plant = acc_plant(p)
    Lr = [3.0, 3.0]
    observer = DisturbanceObserver(acc_observer_config(p, Lr, FilterParams()), plant)
    fast = acc_closed_loop_rhs(p, Lr, lambda t: 0.0) if use_float_path else None
    cfg = SimConfig(t_end=2.0, dt_ctrl=0.1, dt_int=0.01)
    with caplog.at_level(logging.WARNING, logger="dopcbf.integrator"):
        traj = simulate(plant, lambda t, x, obs: ControlSample(t=t, u=np.array([-5.0 * p.M])),
                        observer, lambda t: np.zeros(1), [50.0, 2.0], cfg, fast_rhs=fast)
    assert np.all(traj.states[:, 1] >= 0.0)
    assert traj.states[-1, 1] == 0.0
    assert not traj.clamped[0]
    assert traj.clamped[-1]
    first = int(np.argmax(traj.clamped))
    assert 3 <= first <= 6
    assert np.all(traj.clamped[first:])
    projected = [r for r in caplog.records if "projected" in r.getMessage()]
    assert len(projected) == 1
