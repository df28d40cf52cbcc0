"""CLF and barrier constraint rows and the CLF-CBF quadratic program.

Every row is stored in the canonical form `coeff_u . u + coeff_slack * s <= bound`
over the decision vector `z = [u, s]`. Only the CLF row carries the slack;
barrier rows are hard.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import AffinePlant, Vector, as_vector
from .error import ConfigurationError
from .observer import ObserverConfig, alpha_d
from .qp import QpProblem


@dataclass(frozen=True)
class BarrierSpec:
    """Nominal barrier `h`, disturbance impact `delta` and the rate `alpha`.

    The DOp-CBF barrier is `h_dhat(x, d_hat) = h(x) + delta(x, d_hat)`. A
    spec with `delta` left out is a plain barrier (`delta = 0`).
    """
    h: Callable[[Vector], float]
    grad_h: Callable[[Vector], Vector]
    alpha: float = 1.0
    delta: Callable[[Vector, Vector], float] = None
    grad_delta_x: Callable[[Vector, Vector], Vector] = None
    grad_delta_d: Callable[[Vector, Vector], Vector] = None

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ConfigurationError("alpha", "must be > 0")

    @property
    def has_delta(self) -> bool:
        return self.delta is not None

    def value(self, x: Vector, d_hat: Vector) -> float:
        if not self.has_delta:
            return float(self.h(x))
        return float(self.h(x)) + float(self.delta(x, d_hat))

    def gradient_x(self, x: Vector, d_hat: Vector) -> Vector:
        grad = np.asarray(self.grad_h(x), dtype=float)
        if self.has_delta:
            grad = grad + np.asarray(self.grad_delta_x(x, d_hat), dtype=float)
        return grad

    def gradient_d(self, x: Vector, d_hat: Vector) -> Vector:
        if not self.has_delta:
            return np.zeros_like(np.asarray(d_hat, dtype=float))
        return np.asarray(self.grad_delta_d(x, d_hat), dtype=float)


@dataclass(frozen=True)
class RobustnessParams:
    """Observer-error weight sigma together with the observer envelope data."""
    sigma: float
    omega: float
    nu: float
    alpha_d: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ConfigurationError("sigma", "must be > 0")
        if not self.nu > 0.0:
            raise ConfigurationError("nu", "must be > 0")
        if not self.omega >= 0.0:
            raise ConfigurationError("omega", "must be >= 0")

    @staticmethod
    def from_observer(sigma: float, obs: ObserverConfig, plant: AffinePlant) -> 'RobustnessParams':
        return RobustnessParams(sigma=sigma, omega=obs.omega, nu=obs.nu,
                                alpha_d=alpha_d(obs, plant))

    def margin(self, alpha: float) -> float:
        """sigma * alpha_d - sigma * alpha / 2; must be positive."""
        return self.sigma * self.alpha_d - self.sigma * alpha / 2.0

    def check(self, spec: BarrierSpec) -> None:
        if not self.alpha_d > 0.0:
            raise ConfigurationError("alpha_d", f"must be > 0, got {self.alpha_d:.6g}")
        if not 2.0 * self.alpha_d > spec.alpha:
            raise ConfigurationError(
                "alpha", f"needs 2*alpha_d > alpha (alpha_d={self.alpha_d:.6g}, alpha={spec.alpha:.6g})")
        if not self.margin(spec.alpha) > 0.0:
            raise ConfigurationError("sigma", "sigma*alpha_d - sigma*alpha/2 must be > 0")


@dataclass(frozen=True)
class ClfSpec:
    V: Callable[[Vector], float]
    grad_V: Callable[[Vector], Vector]
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ConfigurationError("gamma", "must be > 0")


@dataclass(frozen=True)
class ConstraintRow:
    """`coeff_u . u + coeff_slack * s <= bound`."""
    coeff_u: Vector
    coeff_slack: float
    bound: float


def _lie(grad: Vector, plant: AffinePlant, x: Vector):
    return (float(grad @ plant.f(x)),
            np.asarray(grad @ plant.g1(x), dtype=float).reshape(plant.n_u),
            np.asarray(grad @ plant.g2(x), dtype=float).reshape(plant.n_d))


def clf_row(clf: ClfSpec, plant: AffinePlant, x, d_hat) -> ConstraintRow:
    """`L_g1 V u - s <= -gamma V - L_f V - L_g2 V d_hat`."""
    x = as_vector(x, plant.n_x, "x")
    d_hat = as_vector(d_hat, plant.n_d, "d_hat")
    lf, lg1, lg2 = _lie(np.asarray(clf.grad_V(x), dtype=float), plant, x)
    bound = -clf.gamma * float(clf.V(x)) - lf - float(lg2 @ d_hat)
    return ConstraintRow(coeff_u=lg1, coeff_slack=-1.0, bound=bound)


def cbf_row_regular(spec: BarrierSpec, plant: AffinePlant, x) -> ConstraintRow:
    """`-L_g1 h u <= L_f h + alpha h`; the disturbance is ignored."""
    x = as_vector(x, plant.n_x, "x")
    lf, lg1, _ = _lie(np.asarray(spec.grad_h(x), dtype=float), plant, x)
    return ConstraintRow(coeff_u=-lg1, coeff_slack=0.0, bound=lf + spec.alpha * float(spec.h(x)))


def _gain_term(spec: BarrierSpec, plant: AffinePlant, obs: ObserverConfig,
               x: Vector, d_hat: Vector) -> Vector:
    """q = L_g2 h_dhat + (d delta / d d_hat) l(x) g2(x)."""
    grad_x = spec.gradient_x(x, d_hat)
    q = np.asarray(grad_x @ plant.g2(x), dtype=float).reshape(plant.n_d)
    if spec.has_delta:
        dd = spec.gradient_d(x, d_hat).reshape(plant.n_d)
        q = q + dd @ (obs.l(x) @ plant.g2(x))
    return q


def _iota_from_q(q: Vector, spec: BarrierSpec, rp: RobustnessParams) -> float:
    margin = rp.margin(spec.alpha)
    if not margin > 0.0:
        raise ConfigurationError("sigma", "sigma*alpha_d - sigma*alpha/2 must be > 0")
    return float(q @ q) / (4.0 * margin) + rp.sigma * rp.omega ** 2 / (2.0 * rp.nu)


def iota(spec: BarrierSpec, rp: RobustnessParams, plant: AffinePlant,
         obs: ObserverConfig, x, d_hat) -> float:
    """Observer error mitigation term `|q|^2 / (4 (sigma alpha_d - sigma alpha/2)) + sigma omega^2 / (2 nu)`."""
    x = as_vector(x, plant.n_x, "x")
    d_hat = as_vector(d_hat, plant.n_d, "d_hat")
    return _iota_from_q(_gain_term(spec, plant, obs, x, d_hat), spec, rp)


def dopcbf_row(spec: BarrierSpec, rp: RobustnessParams, plant: AffinePlant,
               obs: ObserverConfig, x, d_hat) -> ConstraintRow:
    """`-L_g1 h_dhat u <= L_f h_dhat + L_g2 h_dhat d_hat + alpha h_dhat - iota`."""
    x = as_vector(x, plant.n_x, "x")
    d_hat = as_vector(d_hat, plant.n_d, "d_hat")
    lf, lg1, lg2 = _lie(spec.gradient_x(x, d_hat), plant, x)
    slack_free = lf + float(lg2 @ d_hat) + spec.alpha * spec.value(x, d_hat)
    bound = slack_free - _iota_from_q(_gain_term(spec, plant, obs, x, d_hat), spec, rp)
    return ConstraintRow(coeff_u=-lg1, coeff_slack=0.0, bound=bound)


def docbf_row(spec: BarrierSpec, rp: RobustnessParams, plant: AffinePlant, x, d_hat) -> ConstraintRow:
    """DO-CBF row for a barrier that does not depend on the estimate.

    `-L_g1 h u <= L_f h + L_g2 h d_hat + alpha h - |L_g2 h|^2 / (4 (sigma alpha_d - sigma alpha/2))
    - sigma omega^2 / (2 nu)`
    """
    x = as_vector(x, plant.n_x, "x")
    d_hat = as_vector(d_hat, plant.n_d, "d_hat")
    lf, lg1, lg2 = _lie(np.asarray(spec.grad_h(x), dtype=float), plant, x)
    bound = lf + float(lg2 @ d_hat) + spec.alpha * float(spec.h(x)) - _iota_from_q(lg2, spec, rp)
    return ConstraintRow(coeff_u=-lg1, coeff_slack=0.0, bound=bound)


def assemble_qp(rows: Sequence[ConstraintRow], u_ref, w_u: float, w_s: float) -> QpProblem:
    """QP over `z = [u, s]` with cost `w_u/2 |u - u_ref|^2 + w_s/2 s^2` and `s >= 0`."""
    if not (w_u > 0.0 and w_s > 0.0):
        raise ConfigurationError("weights", "w_u and w_s must be > 0")
    u_ref = np.asarray(u_ref, dtype=float).reshape(-1)
    n_u = u_ref.shape[0]
    H = np.diag(np.concatenate((np.full(n_u, w_u), [w_s])))
    f = np.concatenate((-w_u * u_ref, [0.0]))
    G = [np.concatenate((as_vector(r.coeff_u, n_u, "coeff_u"), [r.coeff_slack])) for r in rows]
    e = [r.bound for r in rows]
    G.append(np.concatenate((np.zeros(n_u), [-1.0])))
    e.append(0.0)
    return QpProblem(H=H, f=f, G=np.array(G), e=np.array(e))


def hdot_lower_bound(spec: BarrierSpec, rp: RobustnessParams, plant: AffinePlant,
                     obs: ObserverConfig, x, u, d_hat, e_d) -> float:
    """Lower bound on the time derivative of `h_dhat - sigma V_e` under input `u`.

    `L_f h_dhat + L_g1 h_dhat u + L_g2 h_dhat d_hat + q e_d + sigma (2 alpha_d V_e - omega^2/(2 nu))`
    """
    x = as_vector(x, plant.n_x, "x")
    u = as_vector(u, plant.n_u, "u")
    d_hat = as_vector(d_hat, plant.n_d, "d_hat")
    e_d = as_vector(e_d, plant.n_d, "e_d")
    lf, lg1, lg2 = _lie(spec.gradient_x(x, d_hat), plant, x)
    q = _gain_term(spec, plant, obs, x, d_hat)
    v_e = 0.5 * float(e_d @ e_d)
    return (lf + float(lg1 @ u) + float(lg2 @ d_hat) + float(q @ e_d)
            + rp.sigma * (2.0 * rp.alpha_d * v_e - rp.omega ** 2 / (2.0 * rp.nu)))


def certificate_square(spec: BarrierSpec, rp: RobustnessParams, plant: AffinePlant,
                       obs: ObserverConfig, x, d_hat, e_d) -> float:
    """`|sqrt(k) e_d + q / (2 sqrt(k))|^2` with `k = sigma alpha_d - sigma alpha / 2`."""
    x = as_vector(x, plant.n_x, "x")
    d_hat = as_vector(d_hat, plant.n_d, "d_hat")
    e_d = as_vector(e_d, plant.n_d, "e_d")
    k = rp.margin(spec.alpha)
    if not k > 0.0:
        raise ConfigurationError("sigma", "sigma*alpha_d - sigma*alpha/2 must be > 0")
    root = math.sqrt(k)
    vec = root * e_d + _gain_term(spec, plant, obs, x, d_hat) / (2.0 * root)
    return float(vec @ vec)
