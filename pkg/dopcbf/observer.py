"""Nonlinear disturbance observer and its error envelope.

    z'    = -l(x) (f(x) + g1(x) u + g2(x) d_hat)
    d_hat = z + p(x),        l(x) = dp/dx

With `e_d = d - d_hat` the error obeys `e_d' = d' - l(x) g2(x) e_d`, so for
`|d'| <= omega` the energy `V_e = e_d^T e_d / 2` satisfies
`V_e' <= -2 alpha_d V_e + omega^2 / (2 nu)`.
"""

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .core import AffinePlant, Matrix, StateVec, Vector, as_vector
from .error import ConfigurationError

GRID_POINTS = 50


@dataclass(frozen=True)
class ObserverConfig:
    """Observer gain function, its Jacobian and the envelope parameters.

    `state_box` is the region over which `inf l(x) g2(x)` is sampled; an
    empty box evaluates at the origin only (enough for constant gains).
    """
    p: Callable[[Vector], Vector]
    l: Callable[[Vector], Matrix]
    omega: float = 0.0
    nu: float = 1.0
    state_box: Tuple[Tuple[float, float], ...] = ()
    fixed_alpha_d: bool = False

    def __post_init__(self):
        if not self.omega >= 0.0:
            raise ConfigurationError("omega", "must be >= 0")
        if not self.nu > 0.0:
            raise ConfigurationError("nu", "must be > 0")
        for lo, hi in self.state_box:
            if not lo <= hi:
                raise ConfigurationError("state_box", f"empty interval [{lo}, {hi}]")


@dataclass(frozen=True)
class ObserverState:
    z: Vector
    d_hat: Vector


def _box_grid(box, n_x: int):
    if not box:
        yield np.zeros(n_x)
        return
    axes = [np.linspace(lo, hi, GRID_POINTS) if hi > lo else np.array([lo]) for lo, hi in box]
    for point in itertools.product(*axes):
        yield np.array(point, dtype=float)


@functools.lru_cache(maxsize=64)
def _inf_gain(cfg: ObserverConfig, plant: AffinePlant) -> float:
    worst = math.inf
    for x in _box_grid(cfg.state_box, plant.n_x):
        m = np.atleast_2d(cfg.l(x) @ plant.g2(x))
        worst = min(worst, float(np.min(np.linalg.eigvalsh(0.5 * (m + m.T)))))
    return worst


def alpha_d(cfg: ObserverConfig, plant: AffinePlant) -> float:
    """Error decay rate of the envelope.

    Default: `inf_x l(x) g2(x) - nu/2`, the value Young's inequality gives.
    With `fixed_alpha_d` the fixed rate `1 - nu/4` is used instead.
    """
    if cfg.fixed_alpha_d:
        return 1.0 - cfg.nu / 4.0
    return _inf_gain(cfg, plant) - cfg.nu / 2.0


def observer_rhs(cfg: ObserverConfig, plant: AffinePlant, x, u, z) -> Vector:
    """Return z' = -l(x) (f(x) + g1(x) u + g2(x) (z + p(x)))."""
    x = as_vector(x, plant.n_x, "x")
    u = as_vector(u, plant.n_u, "u")
    z = as_vector(z, plant.n_d, "z")
    d_hat = z + cfg.p(x)
    return -(cfg.l(x) @ (plant.f(x) + plant.g1(x) @ u + plant.g2(x) @ d_hat))


def envelope(cfg: ObserverConfig, plant: AffinePlant, Ve0: float, t):
    """Comparison-lemma bound on V_e(t) starting from V_e(0) = Ve0."""
    if Ve0 < 0.0:
        raise ConfigurationError("Ve0", "must be >= 0")
    rate = alpha_d(cfg, plant)
    if not rate > 0.0:
        raise ConfigurationError("alpha_d", f"must be > 0, got {rate:.6g}")
    t = np.asarray(t, dtype=float)
    asymptote = cfg.omega ** 2 / (4.0 * cfg.nu * rate)
    if Ve0 > asymptote:
        bound = (Ve0 - asymptote) * np.exp(-2.0 * rate * t) + asymptote
    else:
        bound = np.full_like(t, asymptote)
    return float(bound) if bound.ndim == 0 else bound


class DisturbanceObserver:
    """Observer stepper used by the simulator.

    The initial internal state is `z(0) = -p(x(0))`, i.e. `d_hat(0) = 0`.
    """

    def __init__(self, cfg: ObserverConfig, plant: AffinePlant):
        self.cfg = cfg
        self.plant = plant

    def initial_state(self, x0: StateVec) -> ObserverState:
        z = -np.asarray(self.cfg.p(x0), dtype=float).reshape(self.plant.n_d)
        return self.refresh(z, x0)

    def refresh(self, z: Vector, x: StateVec) -> ObserverState:
        z = np.array(z, dtype=float)
        return ObserverState(z=z, d_hat=z + self.cfg.p(x))

    def rhs(self, x: StateVec, u: Vector, z: Vector) -> Vector:
        return observer_rhs(self.cfg, self.plant, x, u, z)


def grade_from_estimate(d_hat: float, g: float, sign: float = -1.0) -> float:
    """Road grade whose along-road gravity equals `d_hat`.

    With the default sign, uphill grades are positive and `d = -g sin(theta)`;
    the ratio is clamped to [-1, 1] so the result stays in [-pi/2, pi/2].
    """
    ratio = min(1.0, max(-1.0, sign * d_hat / g))
    return math.asin(ratio)


def road_grade_estimate(xi, x, Lr, g: float, sign: float = -1.0) -> Tuple[float, float]:
    """Road-grade observer output `(theta_hat, d_hat)` for internal state `xi`."""
    xi = float(np.asarray(xi, dtype=float).reshape(-1)[0])
    d_hat = xi + float(np.dot(np.asarray(Lr, dtype=float).reshape(-1), np.asarray(x, dtype=float)))
    return grade_from_estimate(d_hat, g, sign), d_hat
