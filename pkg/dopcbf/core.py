"""Disturbed control-affine plants.

A plant is `x' = f(x) + g1(x) u + g2(x) d` with fixed dimensions. The
functions are plain callables; every type here is immutable so one plant can
be shared by concurrent batch runs.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .error import ContractViolation

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

# [D, v] for the cruise-control plant; any length n_x in general.
StateVec = Vector


@dataclass(frozen=True)
class AffinePlant:
    """The disturbed model `x' = f(x) + g1(x) u + g2(x) d`.

    `project` optionally maps a state back onto the simulation domain after
    each integration substep (the cruise-control plant clamps speed at 0).
    """
    n_x: int
    n_u: int
    n_d: int
    f: Callable[[Vector], Vector]
    g1: Callable[[Vector], Matrix]
    g2: Callable[[Vector], Matrix]
    project: Optional[Callable[[Vector], Vector]] = None

    def __post_init__(self):
        for name in ("n_x", "n_u", "n_d"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be >= 1")


@dataclass(frozen=True)
class ControlSample:
    """The control applied over one controller period and its CLF slack."""
    t: float
    u: Vector
    slack: float = 0.0

    def __post_init__(self):
        if not self.slack >= 0.0:
            raise ContractViolation(f"slack must be >= 0, got {self.slack}")


def as_vector(values, n: int, name: str) -> Vector:
    """Coerce to a float vector of length n, raising ContractViolation otherwise."""
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape[0] != n:
        raise ContractViolation(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def eval_affine_dynamics(plant: AffinePlant, x, u, d) -> Vector:
    """Return f(x) + g1(x) u + g2(x) d."""
    x = as_vector(x, plant.n_x, "x")
    u = as_vector(u, plant.n_u, "u")
    d = as_vector(d, plant.n_d, "d")
    return plant.f(x) + plant.g1(x) @ u + plant.g2(x) @ d


def lipschitz_estimate(
    fn: Callable[[Vector], NDArray],
    box: Sequence[Tuple[float, float]],
    samples: int = 200,
    seed: int = 0,
) -> float:
    """Largest finite-difference slope of `fn` over random pairs in `box`.

    Used to sample the local Lipschitz property of plant functions on a
    scenario state box; the result is a lower estimate of the constant.
    """
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    best = 0.0
    for _ in range(samples):
        a = lo + (hi - lo) * rng.random(lo.shape)
        b = lo + (hi - lo) * rng.random(lo.shape)
        dist = float(np.linalg.norm(a - b))
        if dist == 0.0:
            continue
        diff = np.asarray(fn(a), dtype=float) - np.asarray(fn(b), dtype=float)
        best = max(best, float(np.linalg.norm(diff)) / dist)
    return best
