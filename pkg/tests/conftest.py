"""Shared fixtures and the independent QP oracle."""

import itertools

import numpy as np
import pytest
import scipy.linalg

from dopcbf.acc import AccParams, FilterParams, acc_observer_config, acc_plant
from dopcbf.integrator import Trajectory


@pytest.fixture
def params():
    return AccParams()


@pytest.fixture
def filter_params():
    return FilterParams()


@pytest.fixture
def plant(params):
    return acc_plant(params)


@pytest.fixture
def obs_cfg(params, filter_params):
    return acc_observer_config(params, [3.0, 3.0], filter_params)


def enumeration_oracle(H, f, G, e, tol=1e-9):
    """Minimizer of 1/2 z^T H z + f^T z s.t. G z <= e, or None if infeasible.

    Every row subset is made an equality set and the objective is minimized
    over its affine solution set by a null-space parameterization; the
    cheapest candidate satisfying all rows wins. No multipliers are used,
    so this shares nothing with the solver's acceptance test.
    """
    H, f = np.asarray(H, float), np.asarray(f, float)
    G, e = np.asarray(G, float).reshape(-1, f.size), np.asarray(e, float)
    n, m = f.size, G.shape[0]
    best, best_obj = None, np.inf
    for size in range(0, min(n, m) + 1):
        for rows in itertools.combinations(range(m), size):
            if rows:
                Ga, ea = G[list(rows)], e[list(rows)]
                z0, *_ = scipy.linalg.lstsq(Ga, ea)
                if np.max(np.abs(Ga @ z0 - ea)) > tol * (1.0 + np.max(np.abs(ea))):
                    continue
                N = scipy.linalg.null_space(Ga)
            else:
                z0, N = np.zeros(n), np.eye(n)
            if N.shape[1]:
                y = np.linalg.solve(N.T @ H @ N, -N.T @ (H @ z0 + f))
                z = z0 + N @ y
            else:
                z = z0
            if m and np.any(G @ z - e > tol * (1.0 + np.abs(e))):
                continue
            obj = 0.5 * z @ H @ z + f @ z
            if obj < best_obj:
                best, best_obj = z, obj
    return best


def make_trajectory(times, h, h_de=None, controls=None, d=None, d_hat=None, clamped=None):
    times = np.asarray(times, float)
    n = len(times)
    h = np.asarray(h, float)
    h_de = h if h_de is None else np.asarray(h_de, float)
    u = np.zeros((n, 1)) if controls is None else np.asarray(controls, float).reshape(n, -1)
    return Trajectory(
        times=times,
        states=np.zeros((n, 2)),
        controls=u,
        slacks=np.zeros(n),
        disturbances=np.zeros((n, 1)) if d is None else np.asarray(d, float).reshape(n, 1),
        estimates=np.zeros((n, 1)) if d_hat is None else np.asarray(d_hat, float).reshape(n, 1),
        barrier_values=np.column_stack((h, h_de)),
        clamped=None if clamped is None else np.asarray(clamped, bool),
        period_controls=u[:-1],
        dt_ctrl=float(times[1] - times[0]) if n > 1 else 1.0,
    )
