"""Exact solver for small dense strictly convex QPs.

    minimize    1/2 z^T H z + f^T z
    subject to  G z <= e

Subsets S of constraints with |S| <= n_z are tried as the active set: the
equality-constrained KKT system is solved and the candidate is accepted when
it is primal feasible with nonnegative multipliers. For a strictly convex
problem any such point is the global optimum, so the search is exact.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .core import Matrix, Vector
from .error import ContractViolation, IllConditioned, Infeasible

logger = logging.getLogger(__name__)

MAX_VARIABLES = 6
MAX_CONSTRAINTS = 16
FEAS_TOL = 1e-9
MULTIPLIER_TOL = -1e-10


@dataclass(frozen=True)
class QpProblem:
    H: Matrix
    f: Vector
    G: Matrix
    e: Vector

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        f = np.asarray(self.f, dtype=float).reshape(-1)
        n = f.shape[0]
        G = np.asarray(self.G, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
        e = np.asarray(self.e, dtype=float).reshape(-1)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "e", e)

        if H.shape != (n, n):
            raise ContractViolation(f"H has shape {H.shape}, expected {(n, n)}")
        if G.shape[0] != e.shape[0]:
            raise ContractViolation(f"G has {G.shape[0]} rows but e has {e.shape[0]} entries")
        if not 1 <= n <= MAX_VARIABLES:
            raise ContractViolation(f"n_z={n} outside 1..{MAX_VARIABLES}")
        if G.shape[0] > MAX_CONSTRAINTS:
            raise ContractViolation(f"m={G.shape[0]} exceeds {MAX_CONSTRAINTS}")
        scale = max(1.0, float(np.max(np.abs(H))))
        if float(np.max(np.abs(H - H.T))) > 1e-12 * scale:
            raise ContractViolation("H is not symmetric")
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise ContractViolation("H is not positive definite")

    @property
    def n_z(self) -> int:
        return self.f.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[0]

    def objective(self, z: Vector) -> float:
        return float(0.5 * z @ self.H @ z + self.f @ z)


@dataclass(frozen=True)
class QpSolution:
    z: Vector
    active_set: Tuple[int, ...]
    objective: float
    kkt_residual: float
    multipliers: Vector


def _solve_kkt(p: QpProblem, active: Sequence[int]) -> Optional[Tuple[Vector, Vector]]:
    n = p.n_z
    k = len(active)
    if k == 0:
        return np.linalg.solve(p.H, -p.f), np.zeros(0)
    Ga = p.G[list(active)]
    if k > 1 and np.linalg.matrix_rank(Ga) < k:
        return None
    if k == 1 and not np.any(Ga):
        return None
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = p.H
    kkt[:n, n:] = Ga.T
    kkt[n:, :n] = Ga
    rhs = np.concatenate((-p.f, p.e[list(active)]))
    sol = np.linalg.solve(kkt, rhs)
    return sol[:n], sol[n:]


def _multipliers(p: QpProblem, z: Vector, active: Sequence[int]) -> Vector:
    if not active:
        return np.zeros(0)
    Ga = p.G[list(active)]
    lam, *_ = np.linalg.lstsq(Ga.T, -(p.H @ z + p.f), rcond=None)
    return lam


def check_kkt(p: QpProblem, z, active: Sequence[int]) -> float:
    """Max of stationarity, primal infeasibility and negative-multiplier size."""
    z = np.asarray(z, dtype=float).reshape(-1)
    active = list(active)
    lam = _multipliers(p, z, active)
    grad = p.H @ z + p.f
    if active:
        grad = grad + p.G[active].T @ lam
    stationarity = float(np.max(np.abs(grad))) if grad.size else 0.0
    primal = float(np.max(p.G @ z - p.e, initial=0.0))
    dual = float(max(0.0, -np.min(lam))) if lam.size else 0.0
    return max(stationarity, primal, dual)


def _lp_feasible(p: QpProblem) -> bool:
    res = linprog(
        c=np.zeros(p.n_z),
        A_ub=p.G,
        b_ub=p.e,
        bounds=[(None, None)] * p.n_z,
        method="highs",
    )
    return res.status == 0


def solve_qp(p: QpProblem) -> QpSolution:
    """Global optimizer of the QP by active-set enumeration.

    Sets are tried by size, then lexicographically, and the first one whose
    KKT point is primal feasible with nonnegative multipliers is returned:
    with `H` positive definite that point is the unique optimum, and among
    equivalent sets this order keeps the smallest, lowest one.
    """
    solved_any = False
    for size in range(0, min(p.n_z, p.m) + 1):
        for active in itertools.combinations(range(p.m), size):
            try:
                candidate = _solve_kkt(p, active)
            except np.linalg.LinAlgError:
                continue
            if candidate is None:
                continue
            solved_any = True
            z, lam = candidate
            if not np.all(np.isfinite(z)):
                continue
            if p.m and np.any(p.G @ z > p.e + FEAS_TOL):
                continue
            if lam.size and np.any(lam < MULTIPLIER_TOL):
                continue
            return QpSolution(
                z=z,
                active_set=tuple(active),
                objective=p.objective(z),
                kkt_residual=check_kkt(p, z, active),
                multipliers=lam,
            )

    if p.m and not _lp_feasible(p):
        raise Infeasible()
    if not solved_any:
        raise IllConditioned()
    raise IllConditioned("feasible set is nonempty but no KKT candidate was accepted")
