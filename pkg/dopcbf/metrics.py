"""Run and batch metrics: control smoothness, barrier minima, observer envelope."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import AffinePlant
from .error import ConfigurationError, ContractViolation, InsufficientSamples
from .integrator import Trajectory
from .observer import ObserverConfig, envelope

logger = logging.getLogger(__name__)

MIN_SAMPLES = 3
ENVELOPE_FLOOR = 1e-12


@dataclass(frozen=True)
class BarrierMinimum:
    value: float
    time: float
    first_violation: Optional[float] = None

    @property
    def violated(self) -> bool:
        return self.first_violation is not None


@dataclass(frozen=True)
class RunReport:
    """Summary of one closed-loop run."""
    controller: str
    rms_du: float
    min_h: float
    min_h_time: float
    min_hde: float
    violation: bool
    violation_time: Optional[float]
    qp_failures: int
    seed: Optional[int] = None
    envelope_ratio: Optional[float] = None

    def __post_init__(self):
        if self.violation != (self.min_h < 0.0):
            raise ContractViolation("violation flag must equal min_h < 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BatchComparison:
    """Paired RMS improvement of controller `b` over controller `a`, in percent."""
    n_pairs: int
    n_skipped: int
    mean_improvement: Optional[float]
    max_improvement: Optional[float]
    min_improvement: Optional[float]
    win_rate: Optional[float]
    violations_a: int
    violations_b: int

    def to_dict(self) -> dict:
        return asdict(self)


def window_start(skip: float, dt: float) -> int:
    """Index of the first sample at `t >= skip` on a grid of spacing `dt`."""
    return int(math.ceil(skip / dt - 1e-9))


def rms_control_rate(u, dt: float, skip: float = 0.0) -> float:
    """RMS of the forward-difference control rate over samples at `t >= skip`.

    `u` is sampled on a uniform grid of spacing `dt` starting at t = 0; a
    2-D `u` (one column per input) uses the Euclidean norm of the rate.
    """
    if not dt > 0.0:
        raise ConfigurationError("dt", "must be > 0")
    if skip < 0.0:
        raise ConfigurationError("skip", "must be >= 0")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    tail = u[window_start(skip, dt):]
    if len(tail) < MIN_SAMPLES:
        raise InsufficientSamples(MIN_SAMPLES, len(tail))
    rate = np.diff(tail, axis=0) / dt
    return float(np.sqrt(np.mean(np.sum(rate * rate, axis=1))))


def min_barrier(traj: Trajectory, which: str = "h") -> BarrierMinimum:
    """Minimum of the `h` or `h_de` column and the first sample where it is negative."""
    if which not in ("h", "h_de"):
        raise ContractViolation(f"unknown barrier column '{which}'")
    if len(traj) == 0:
        raise ContractViolation("empty trajectory")
    values = traj.h if which == "h" else traj.h_de
    if np.all(np.isnan(values)):
        raise ContractViolation(f"trajectory has no {which} samples")
    idx = int(np.nanargmin(values))
    negative = np.flatnonzero(values < 0.0)
    first = float(traj.times[negative[0]]) if negative.size else None
    return BarrierMinimum(value=float(values[idx]), time=float(traj.times[idx]), first_violation=first)


def _unclamped_runs(clamped) -> List[Tuple[int, int]]:
    """`[start, stop)` index ranges of consecutive unclamped samples."""
    ok = np.concatenate(([0], ~np.asarray(clamped, dtype=bool), [0])).astype(np.int8)
    edges = np.flatnonzero(np.diff(ok))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def envelope_margin(traj: Trajectory, obs: ObserverConfig, plant: AffinePlant) -> float:
    """Largest ratio of the measured `V_e` to its envelope over the run.

    Values at or below 1 mean the envelope held. Samples flagged in
    `traj.clamped` are not scored, and the envelope restarts from the
    measured `V_e` at the first sample after each clamped stretch. Envelope
    values below `ENVELOPE_FLOOR` are raised to it, so a vanishing bound
    with a round-off sized error does not report infinity. NaN when every
    sample is clamped.
    """
    err = traj.disturbances - traj.estimates
    v_e = 0.5 * np.sum(err * err, axis=1)
    runs = _unclamped_runs(traj.clamped)
    if len(runs) > 1:
        logger.info("observer envelope restarted %d times after state projection", len(runs) - 1)
    worst = math.nan
    for start, stop in runs:
        t = traj.times[start:stop] - traj.times[start]
        bound = np.atleast_1d(envelope(obs, plant, float(v_e[start]), t))
        ratio = float(np.max(v_e[start:stop] / np.maximum(bound, ENVELOPE_FLOOR)))
        worst = ratio if math.isnan(worst) else max(worst, ratio)
    return worst


def summarize_run(traj: Trajectory, controller: str, skip: float,
                  seed: Optional[int] = None, envelope_ratio: Optional[float] = None) -> RunReport:
    """Report of one run; the control rate is taken over every controller period."""
    if traj.period_controls is None:
        raise ContractViolation("trajectory carries no per-period controls")
    h_min = min_barrier(traj, "h")
    hde_min = min_barrier(traj, "h_de")
    return RunReport(
        controller=controller,
        rms_du=rms_control_rate(traj.period_controls, traj.dt_ctrl, skip),
        min_h=h_min.value,
        min_h_time=h_min.time,
        min_hde=hde_min.value,
        violation=h_min.value < 0.0,
        violation_time=h_min.first_violation,
        qp_failures=len(traj.failures),
        seed=seed,
        envelope_ratio=envelope_ratio,
    )


def compare_batch(reports_a: Sequence[RunReport], reports_b: Sequence[RunReport]) -> BatchComparison:
    """Per-pair `(rms_a - rms_b) / rms_a * 100`, aggregated.

    Pairs with `rms_a == 0` are skipped with a warning.
    """
    if len(reports_a) != len(reports_b):
        raise ContractViolation(f"unpaired reports: {len(reports_a)} vs {len(reports_b)}")
    improvements = []
    skipped = 0
    for i, (a, b) in enumerate(zip(reports_a, reports_b)):
        if a.rms_du == 0.0:
            logger.warning("pair %d skipped: baseline RMS is zero", i)
            skipped += 1
            continue
        improvements.append((a.rms_du - b.rms_du) / a.rms_du * 100.0)

    if improvements:
        imp = np.array(improvements)
        stats = dict(mean_improvement=float(np.mean(imp)), max_improvement=float(np.max(imp)),
                     min_improvement=float(np.min(imp)), win_rate=float(np.mean(imp > 0.0)))
    else:
        stats = dict(mean_improvement=None, max_improvement=None, min_improvement=None, win_rate=None)
    return BatchComparison(
        n_pairs=len(improvements),
        n_skipped=skipped,
        violations_a=sum(r.violation for r in reports_a),
        violations_b=sum(r.violation for r in reports_b),
        **stats,
    )
