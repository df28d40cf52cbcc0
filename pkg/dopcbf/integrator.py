"""Fixed-step closed-loop simulation with zero-order-hold control.

The plant state and the observer's internal state are integrated together
with classical RK4 on `dt_int` substeps; the controller runs once per
`dt_ctrl` period and its output is held over the whole period.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np

from .core import AffinePlant, ControlSample, StateVec, Vector, as_vector, eval_affine_dynamics
from .error import ConfigurationError, ContractViolation, ControlFailure, IntegrationError

logger = logging.getLogger(__name__)

_DIVISOR_TOL = 1e-9


def _divides(step: float, span: float) -> bool:
    ratio = span / step
    return abs(ratio - round(ratio)) <= _DIVISOR_TOL * max(1.0, ratio)


@dataclass(frozen=True)
class SimConfig:
    """Horizon, controller period, integration substep and output decimation."""
    t_end: float = 100.0
    dt_ctrl: float = 0.01
    dt_int: float = 0.001
    record_every: int = 1

    def __post_init__(self):
        if not self.t_end > 0.0:
            raise ConfigurationError("t_end", "must be > 0")
        if not self.dt_ctrl > 0.0:
            raise ConfigurationError("dt_ctrl", "must be > 0")
        if not 0.0 < self.dt_int <= self.dt_ctrl:
            raise ConfigurationError("dt_int", "must satisfy 0 < dt_int <= dt_ctrl")
        if not _divides(self.dt_ctrl, self.t_end):
            raise ConfigurationError("dt_ctrl", "must divide t_end")
        if not _divides(self.dt_int, self.dt_ctrl):
            raise ConfigurationError("dt_int", "must divide dt_ctrl")
        if isinstance(self.record_every, bool) or int(self.record_every) != self.record_every \
                or self.record_every < 1:
            raise ConfigurationError("record_every", "must be an integer >= 1")

    @property
    def n_periods(self) -> int:
        return int(round(self.t_end / self.dt_ctrl))

    @property
    def n_substeps(self) -> int:
        return int(round(self.dt_ctrl / self.dt_int))


@dataclass(frozen=True)
class RunFailure:
    """A controller tick that produced no admissible control."""
    t: float
    message: str


@dataclass
class Trajectory:
    """Sampled closed-loop run; every series has one row per sample.

    `period_controls` holds the input applied in every controller period
    (one row per period, spacing `dt_ctrl`) and is kept whole even when the
    samples are decimated. `clamped` marks samples reached through a period
    in which the plant projection moved the state.
    """
    times: Vector
    states: np.ndarray
    controls: np.ndarray
    slacks: Vector
    disturbances: np.ndarray
    estimates: np.ndarray
    barrier_values: np.ndarray
    failures: List[RunFailure] = field(default_factory=list)
    clamped: Optional[np.ndarray] = None
    period_controls: Optional[np.ndarray] = None
    dt_ctrl: Optional[float] = None

    def __post_init__(self):
        n = len(self.times)
        if self.clamped is None:
            self.clamped = np.zeros(n, dtype=bool)
        for name in ("states", "controls", "slacks", "disturbances", "estimates", "barrier_values", "clamped"):
            if len(getattr(self, name)) != n:
                raise ContractViolation(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ContractViolation("times must be strictly increasing")
        if (self.period_controls is None) != (self.dt_ctrl is None):
            raise ContractViolation("period_controls and dt_ctrl go together")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def h(self) -> Vector:
        return self.barrier_values[:, 0]

    @property
    def h_de(self) -> Vector:
        return self.barrier_values[:, 1]


class ObserverStepper(Protocol):
    """What `simulate` needs from a disturbance observer."""

    def initial_state(self, x0: StateVec): ...

    def refresh(self, z: Vector, x: StateVec): ...

    def rhs(self, x: StateVec, u: Vector, z: Vector) -> Vector: ...


Controller = Callable[[float, StateVec, object], ControlSample]
Monitor = Callable[[float, StateVec, Vector, object], Tuple[float, float]]
# (t, [x, z], u) -> d[x, z]/dt, all plain floats
FloatRhs = Callable[[float, List[float], List[float]], List[float]]


def rk4_step(deriv: Callable, t: float, x, dt: float):
    """Advance `x` by one classical fourth-order Runge-Kutta step."""
    if not dt > 0.0:
        raise ContractViolation(f"dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)

    def stage(tau, y):
        k = np.asarray(deriv(tau, y), dtype=float)
        if not np.all(np.isfinite(k)):
            raise IntegrationError(tau, np.atleast_1d(y))
        return k

    half = 0.5 * dt
    k1 = stage(t, x)
    k2 = stage(t + half, x + half * k1)
    k3 = stage(t + half, x + half * k2)
    k4 = stage(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_floats(rhs: FloatRhs, t: float, y: List[float], u: List[float], dt: float) -> List[float]:
    """`rk4_step` on plain float lists with the input held."""
    half = 0.5 * dt
    k1 = rhs(t, y, u)
    k2 = rhs(t + half, [a + half * b for a, b in zip(y, k1)], u)
    k3 = rhs(t + half, [a + half * b for a, b in zip(y, k2)], u)
    k4 = rhs(t + dt, [a + dt * b for a, b in zip(y, k3)], u)
    sixth = dt / 6.0
    return [a + sixth * (b1 + 2.0 * (b2 + b3) + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]


def _project(plant: AffinePlant, xs: Vector) -> Tuple[Vector, bool]:
    projected = plant.project(xs)
    if projected is xs:
        return xs, False
    projected = np.asarray(projected, dtype=float)
    return projected, not np.array_equal(projected, xs)


def simulate(
    plant: AffinePlant,
    controller: Controller,
    observer: ObserverStepper,
    disturbance: Callable[[float], Vector],
    x0,
    cfg: SimConfig,
    monitor: Optional[Monitor] = None,
    fast_rhs: Optional[FloatRhs] = None,
) -> Trajectory:
    """Run the closed loop from `x0` to `cfg.t_end`.

    Barrier violations are only recorded. A controller raising `ControlFailure` is
    logged as a `RunFailure` and the previous control is held for that
    period; a non-finite state raises `IntegrationError`.

    `fast_rhs`, when given, must compute the same stacked plant and observer
    derivative as `plant`, `observer` and `disturbance` do, on plain floats;
    the substeps then skip the array machinery.
    """
    x = as_vector(x0, plant.n_x, "x0").copy()
    n_x = plant.n_x
    obs = observer.initial_state(x)
    z = np.array(obs.z, dtype=float)

    n_periods = cfg.n_periods
    n_sub = cfg.n_substeps
    h_sub = cfg.dt_ctrl / n_sub

    times, states, controls, slacks = [], [], [], []
    dists, estimates, barriers, clamped = [], [], [], []
    period_controls = np.zeros((n_periods, plant.n_u))
    failures: List[RunFailure] = []
    held = ControlSample(t=0.0, u=np.zeros(plant.n_u), slack=0.0)
    clamp_periods = 0
    first_clamp: Optional[float] = None
    clamped_since_record = False

    for k in range(n_periods + 1):
        t = k * cfg.dt_ctrl
        obs = observer.refresh(z, x)
        if k < n_periods:
            try:
                sample = controller(t, x, obs)
                u = as_vector(sample.u, plant.n_u, "u")
                if not (np.all(np.isfinite(u)) and math.isfinite(sample.slack)):
                    raise ContractViolation(f"controller returned non-finite output at t={t:.6g}")
                held = ControlSample(t=t, u=u, slack=float(sample.slack))
            except ControlFailure as exc:
                logger.debug("controller failed at t=%.4f: %s", t, exc)
                failures.append(RunFailure(t=t, message=str(exc)))
                held = ControlSample(t=t, u=held.u, slack=held.slack)
            period_controls[k] = held.u

        if k % cfg.record_every == 0 or k == n_periods:
            d_now = as_vector(disturbance(t), plant.n_d, "d")
            times.append(t)
            states.append(x.copy())
            controls.append(held.u.copy())
            slacks.append(held.slack)
            dists.append(d_now)
            estimates.append(np.array(obs.d_hat, dtype=float))
            barriers.append(monitor(t, x, d_now, obs) if monitor is not None else (math.nan, math.nan))
            clamped.append(clamped_since_record)
            clamped_since_record = False

        if k == n_periods:
            break

        u_hold = held.u
        hit = False
        if fast_rhs is not None:
            y = [*x.tolist(), *z.tolist()]
            u_list = u_hold.tolist()
            for j in range(n_sub):
                y = rk4_step_floats(fast_rhs, t + j * h_sub, y, u_list, h_sub)
                if plant.project is not None:
                    xs, moved = _project(plant, np.array(y[:n_x]))
                    if moved:
                        y[:n_x] = xs.tolist()
                        hit = True
            y = np.array(y)
        else:
            def deriv(tau, y):
                xs, zs = y[:n_x], y[n_x:]
                dx = eval_affine_dynamics(plant, xs, u_hold, disturbance(tau))
                return np.concatenate((dx, observer.rhs(xs, u_hold, zs)))

            y = np.concatenate((x, z))
            for j in range(n_sub):
                y = rk4_step(deriv, t + j * h_sub, y, h_sub)
                if plant.project is not None:
                    y[:n_x], moved = _project(plant, y[:n_x])
                    hit = hit or moved
        if not np.all(np.isfinite(y)):
            raise IntegrationError(t + cfg.dt_ctrl, y[:n_x], "non-finite state")
        if hit:
            clamp_periods += 1
            clamped_since_record = True
            if first_clamp is None:
                first_clamp = t
        x, z = y[:n_x].copy(), y[n_x:].copy()

    if failures:
        logger.warning("%d controller failures during run (first at t=%.3f)",
                       len(failures), failures[0].t)
    if clamp_periods:
        logger.warning("state projected in %d control periods (first at t=%.3f)",
                       clamp_periods, first_clamp)

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        controls=np.array(controls),
        slacks=np.array(slacks),
        disturbances=np.array(dists),
        estimates=np.array(estimates),
        barrier_values=np.array(barriers, dtype=float),
        failures=failures,
        clamped=np.array(clamped, dtype=bool),
        period_controls=period_controls,
        dt_ctrl=cfg.dt_ctrl,
    )
