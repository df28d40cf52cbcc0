"""Adaptive cruise control under road-grade disturbances.

State `x = [D, v]`: gap to the lead vehicle (m) and ego speed (m/s). The
input is the longitudinal force (N). Grades are positive uphill and the
along-road gravity disturbance is `d = -g sin(theta)`, entering the speed
equation directly as an acceleration.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .core import AffinePlant, ControlSample, StateVec, Vector
from .error import ConfigurationError, ContractViolation, DegenerateGrade
from .observer import ObserverConfig, ObserverState, grade_from_estimate
from .qp import solve_qp
from .safety_filter import (
    BarrierSpec, ClfSpec, RobustnessParams,
    assemble_qp, cbf_row_regular, clf_row, docbf_row, dopcbf_row,
)

logger = logging.getLogger(__name__)

GRADE_GUARD = 0.05
SCENARIO_BOX = ((10.0, 120.0), (0.0, 35.0))
CONTROLLERS = ("cbf", "docbf", "dopcbf")


@dataclass(frozen=True)
class AccParams:
    """Vehicle, road and reference parameters; defaults are the case-study values."""
    M: float = 1650.0
    c: float = 0.99428
    T: float = 2.0
    mu: float = 0.8
    g: float = 9.81
    v_l: float = 20.0
    v_r: float = 25.0
    theta_dm: float = 0.2
    gamma: float = 0.006
    mass_scaled_grade: bool = False

    def __post_init__(self):
        for name in ("M", "T", "g", "gamma"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(name, "must be > 0")
        for name in ("c", "v_l", "v_r", "theta_dm"):
            if not getattr(self, name) >= 0.0:
                raise ConfigurationError(name, "must be >= 0")
        if not 0.0 < self.mu <= 1.5:
            raise ConfigurationError("mu", "must satisfy 0 < mu <= 1.5")
        if not self.mu - math.sin(self.theta_dm) > 0.0:
            raise ConfigurationError("theta_dm", "mu - sin(theta_dm) must be > 0")

    @property
    def grade_sign(self) -> float:
        """Sign s in `d = s g sin(theta)`."""
        return 1.0 if self.mass_scaled_grade else -1.0


@dataclass(frozen=True)
class FilterParams:
    """Safety-filter and QP tuning."""
    alpha: float = 2.0
    sigma: float = 5.0
    nu: float = 1.0
    omega: float = 0.0
    w_s: float = 100.0
    fixed_alpha_d: bool = False

    def __post_init__(self):
        for name in ("alpha", "sigma", "nu", "w_s"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(name, "must be > 0")
        if not self.omega >= 0.0:
            raise ConfigurationError("omega", "must be >= 0")


def disturbance_from_grade(theta: float, p: AccParams) -> float:
    return p.grade_sign * p.g * math.sin(theta)


def grade_from_disturbance(d: float, p: AccParams) -> float:
    return grade_from_estimate(d, p.g, p.grade_sign)


def _speed(v: float) -> float:
    if not math.isfinite(v):
        raise ContractViolation(f"non-finite speed {v}")
    if v < 0.0:
        logger.debug("speed %.4g below zero, clamped", v)
        return 0.0
    return v


def vehicle_rhs(x, u: float, theta: float, p: AccParams) -> Vector:
    """`[v_l - v, (u - c v^2)/M - g sin(theta)]` (speed clamped at 0)."""
    D, v = float(x[0]), _speed(float(x[1]))
    u = float(np.asarray(u, dtype=float).reshape(-1)[0])
    if not (math.isfinite(D) and math.isfinite(u) and math.isfinite(theta)):
        raise ContractViolation("non-finite input to vehicle_rhs")
    grade = p.g * math.sin(theta)
    if p.mass_scaled_grade:
        accel = (u - p.c * v * v) / p.M + grade / p.M
    else:
        accel = (u - p.c * v * v) / p.M - grade
    return np.array([p.v_l - v, accel])


def clamp_speed(x: Vector) -> Vector:
    """Speed floored at 0; `x` itself comes back when nothing changes.

    `simulate` counts the periods where this bites and warns once per run.
    """
    if x[1] < 0.0:
        x = x.copy()
        x[1] = 0.0
    return x


def acc_plant(p: AccParams) -> AffinePlant:
    """Control-affine form of `vehicle_rhs` with `d` as the disturbance."""
    g1 = np.array([[0.0], [1.0 / p.M]])
    g2 = np.array([[0.0], [1.0 / p.M if p.mass_scaled_grade else 1.0]])

    def f(x):
        v = x[1]
        return np.array([p.v_l - v, -p.c * v * v / p.M])

    return AffinePlant(n_x=2, n_u=1, n_d=1, f=f, g1=lambda x: g1, g2=lambda x: g2,
                       project=clamp_speed)


def acc_closed_loop_rhs(p: AccParams, Lr: Sequence[float], theta: Callable[[float], float]):
    """Float derivative of `[D, v, z]` under a held force.

    Matches `acc_plant` driven by `disturbance_from_grade(theta(t))` together
    with the observer of `acc_observer_config(p, Lr, ...)`; `simulate` takes
    it as `fast_rhs`.
    """
    l0, l1 = (float(k) for k in Lr)
    inv_m, drag, v_l = 1.0 / p.M, p.c / p.M, p.v_l
    g2 = inv_m if p.mass_scaled_grade else 1.0
    grade_scale = g2 * p.grade_sign * p.g

    def rhs(t: float, y, u):
        D, v, z = y
        driven = u[0] * inv_m - drag * v * v
        d_hat = z + l0 * D + l1 * v
        return [v_l - v,
                driven + grade_scale * math.sin(theta(t)),
                -(l0 * (v_l - v) + l1 * (driven + g2 * d_hat))]

    return rhs


def _adhesion(theta_hat: float, p: AccParams) -> float:
    margin = p.mu + math.sin(theta_hat)
    if margin < GRADE_GUARD:
        raise DegenerateGrade(theta_hat, margin)
    return margin


def braking_distance(v: float, theta_hat: float, p: AccParams) -> float:
    """`v^2 / (2 (mu + sin(theta_hat)) g)`."""
    return v * v / (2.0 * _adhesion(theta_hat, p) * p.g)


def braking_distance_gradient(v: float, theta_hat: float, p: AccParams) -> Tuple[float, float]:
    """Partial derivatives of the braking distance in `(v, theta_hat)`."""
    a = _adhesion(theta_hat, p)
    return v / (a * p.g), -v * v * math.cos(theta_hat) / (2.0 * a * a * p.g)


def h_dop_acc(x, theta_hat: float, p: AccParams) -> float:
    """Gap minus braking and reaction distance at the estimated grade."""
    D, v = float(x[0]), float(x[1])
    return D - braking_distance(v, theta_hat, p) - p.T * v


def h_dop_acc_gradient(x, theta_hat: float, p: AccParams) -> Tuple[float, float, float]:
    """`(dh/dD, dh/dv, dh/dtheta_hat)`."""
    v = float(x[1])
    dv, dtheta = braking_distance_gradient(v, theta_hat, p)
    return 1.0, -dv - p.T, -dtheta


def h_docbf_baseline(x, p: AccParams) -> float:
    """Barrier sized for the steepest decline `-theta_dm`."""
    D, v = float(x[0]), float(x[1])
    return D - v * v / (2.0 * p.g * (p.mu - math.sin(p.theta_dm))) - p.T * v


def h_docbf_baseline_gradient(x, p: AccParams) -> Vector:
    v = float(x[1])
    return np.array([1.0, -v / (p.g * (p.mu - math.sin(p.theta_dm))) - p.T])


def nominal_barrier(p: AccParams, alpha: float) -> BarrierSpec:
    """Flat-road barrier; the regular CBF uses it with the disturbance ignored."""
    return BarrierSpec(
        h=lambda x: h_dop_acc(x, 0.0, p),
        grad_h=lambda x: np.array(h_dop_acc_gradient(x, 0.0, p)[:2]),
        alpha=alpha,
    )


def baseline_barrier(p: AccParams, alpha: float) -> BarrierSpec:
    return BarrierSpec(
        h=lambda x: h_docbf_baseline(x, p),
        grad_h=lambda x: h_docbf_baseline_gradient(x, p),
        alpha=alpha,
    )


def dop_barrier(p: AccParams, alpha: float) -> BarrierSpec:
    """`h(x) + delta(x, d_hat) = h_dop_acc(x, theta_hat(d_hat))`.

    `delta` moves the braking distance from the flat road to the estimated
    grade; its `d_hat` derivative goes through `theta_hat = asin(s d_hat / g)`.
    """

    def theta_of(d_hat) -> float:
        return grade_from_disturbance(float(d_hat[0]), p)

    def delta(x, d_hat):
        v = float(x[1])
        return braking_distance(v, 0.0, p) - braking_distance(v, theta_of(d_hat), p)

    def grad_delta_x(x, d_hat):
        v = float(x[1])
        flat, _ = braking_distance_gradient(v, 0.0, p)
        graded, _ = braking_distance_gradient(v, theta_of(d_hat), p)
        return np.array([0.0, flat - graded])

    def grad_delta_d(x, d_hat):
        ratio = p.grade_sign * float(d_hat[0]) / p.g
        if abs(ratio) >= 1.0:
            return np.zeros(1)
        a = _adhesion(math.asin(ratio), p)
        v = float(x[1])
        return np.array([p.grade_sign * v * v / (2.0 * a * a * p.g * p.g)])

    base = nominal_barrier(p, alpha)
    return BarrierSpec(h=base.h, grad_h=base.grad_h, alpha=alpha, delta=delta,
                       grad_delta_x=grad_delta_x, grad_delta_d=grad_delta_d)


def speed_clf(p: AccParams) -> ClfSpec:
    """`V = (v - v_r)^2`."""
    return ClfSpec(
        V=lambda x: (x[1] - p.v_r) ** 2,
        grad_V=lambda x: np.array([0.0, 2.0 * (x[1] - p.v_r)]),
        gamma=p.gamma,
    )


def acc_observer_config(p: AccParams, Lr: Sequence[float], fp: FilterParams) -> ObserverConfig:
    """Road-grade observer with `p(x) = L_r x`."""
    gain = np.asarray(Lr, dtype=float).reshape(-1)
    if gain.shape != (2,):
        raise ConfigurationError("Lr", f"needs 2 entries, got {gain.shape[0]}")
    jac = gain.reshape(1, 2)
    return ObserverConfig(
        p=lambda x: np.array([gain @ x]),
        l=lambda x: jac,
        omega=fp.omega,
        nu=fp.nu,
        state_box=SCENARIO_BOX,
        fixed_alpha_d=fp.fixed_alpha_d,
    )


Controller = Callable[[float, StateVec, ObserverState], ControlSample]


def build_acc_controllers(p: AccParams, fp: FilterParams, obs: ObserverConfig,
                          plant: AffinePlant = None) -> Dict[str, Controller]:
    """The regular CBF, DO-CBF and DOp-CBF controllers as closures.

    Each maps `(t, x, observer state)` to the QP solution `(u, slack)`; the
    reference force `c v^2` cancels drag so the unconstrained optimum holds
    speed.
    """
    plant = plant if plant is not None else acc_plant(p)
    clf = speed_clf(p)
    nominal = nominal_barrier(p, fp.alpha)
    baseline = baseline_barrier(p, fp.alpha)
    dop = dop_barrier(p, fp.alpha)
    rp = RobustnessParams.from_observer(fp.sigma, obs, plant)
    try:
        rp.check(dop)
    except ConfigurationError as exc:
        raise exc.prefixed("filter") from None
    w_u = 1.0 / (p.M * p.M)
    no_estimate = np.zeros(1)

    def solve(t, x, rows) -> ControlSample:
        v = float(x[1])
        sol = solve_qp(assemble_qp(rows, [p.c * v * v], w_u, fp.w_s))
        return ControlSample(t=t, u=sol.z[:1].copy(), slack=max(0.0, float(sol.z[1])))

    def regular_cbf(t, x, state):
        rows = [clf_row(clf, plant, x, no_estimate), cbf_row_regular(nominal, plant, x)]
        return solve(t, x, rows)

    def docbf(t, x, state):
        rows = [clf_row(clf, plant, x, state.d_hat),
                docbf_row(baseline, rp, plant, x, state.d_hat)]
        return solve(t, x, rows)

    def dopcbf(t, x, state):
        rows = [clf_row(clf, plant, x, state.d_hat),
                dopcbf_row(dop, rp, plant, obs, x, state.d_hat)]
        return solve(t, x, rows)

    return {"cbf": regular_cbf, "docbf": docbf, "dopcbf": dopcbf}


def acc_monitor(p: AccParams, sigma: float):
    """Barrier monitor for `simulate`: `(h at the true grade, h at theta_hat - sigma V_e)`."""

    def monitor(t, x, d, state) -> Tuple[float, float]:
        theta = grade_from_disturbance(float(d[0]), p)
        e_d = float(d[0]) - float(state.d_hat[0])
        try:
            h_true = h_dop_acc(x, theta, p)
        except DegenerateGrade:
            h_true = -math.inf
        try:
            h_est = h_dop_acc(x, grade_from_disturbance(float(state.d_hat[0]), p), p)
        except DegenerateGrade:
            h_est = -math.inf
        return h_true, h_est - sigma * 0.5 * e_d * e_d

    return monitor
