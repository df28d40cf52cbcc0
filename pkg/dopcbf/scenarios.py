"""Road-grade profiles.

Every profile is piecewise linear through `(t, theta)` knots and holds its
end values outside the knot range. Random roads are generated from a
PCG64 stream seeded by `SeedSequence([master, index])`, so a batch is
reproducible from its master seed alone.
"""

import bisect
import functools
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .error import ConfigurationError

logger = logging.getLogger(__name__)

MAX_GRADE = 0.2
DEFAULT_RATE_BOUND = 0.02
DEFAULT_KNOT_INTERVAL = 10.0
# batch roads change grade on this slower cadence
BATCH_KNOT_INTERVAL = 30.0
KINDS = ("three_section", "random", "constant", "table")

_TOL = 1e-12

THREE_SECTION_KNOTS = (
    (0.0, 0.0),
    (30.0, 0.0),
    (40.0, -0.15),
    (65.0, -0.15),
    (80.0, 0.15),
    (100.0, 0.15),
)


@dataclass(frozen=True)
class RoadProfile:
    """Grade `theta(t)` in rad (positive uphill) through knots."""
    kind: str
    knots: Tuple[Tuple[float, float], ...]
    rate_bound: float = DEFAULT_RATE_BOUND

    def __post_init__(self):
        knots = tuple((float(t), float(th)) for t, th in self.knots)
        object.__setattr__(self, "knots", knots)
        if self.kind not in KINDS:
            raise ConfigurationError("kind", f"unknown road kind '{self.kind}'")
        if not knots:
            raise ConfigurationError("knots", "need at least one knot")
        if not self.rate_bound > 0.0:
            raise ConfigurationError("rate_bound", "must be > 0")
        times = [t for t, _ in knots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("knots", "times must be strictly increasing")
        for t, th in knots:
            if not (math.isfinite(t) and math.isfinite(th)):
                raise ConfigurationError("knots", f"non-finite knot ({t}, {th})")
            if abs(th) > MAX_GRADE + _TOL:
                raise ConfigurationError("knots", f"|theta| = {abs(th):.6g} at t={t:g} exceeds {MAX_GRADE}")
        rate = self.max_rate
        if rate > self.rate_bound * (1.0 + 1e-9) + _TOL:
            raise ConfigurationError("knots", f"slope {rate:.6g} rad/s exceeds rate_bound {self.rate_bound:g}")

    @functools.cached_property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.knots])

    @functools.cached_property
    def grades(self) -> np.ndarray:
        return np.array([th for _, th in self.knots])

    @property
    def max_rate(self) -> float:
        """Largest `|d theta / dt|` between consecutive knots."""
        if len(self.knots) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.grades) / np.diff(self.times))))

    @functools.cached_property
    def _knot_times(self) -> Tuple[float, ...]:
        return tuple(t for t, _ in self.knots)

    def theta(self, t):
        """Grade at time `t`; vectorized over arrays."""
        if isinstance(t, (float, int)):
            return self.grade_at(float(t))
        out = np.interp(t, self.times, self.grades)
        return float(out) if np.ndim(out) == 0 else out

    def grade_at(self, t: float) -> float:
        """Scalar `theta`, linear between the knots around `t`."""
        i = bisect.bisect_right(self._knot_times, t)
        if i == 0:
            return self.knots[0][1]
        if i == len(self.knots):
            return self.knots[-1][1]
        (t0, th0), (t1, th1) = self.knots[i - 1], self.knots[i]
        return th0 + (th1 - th0) * (t - t0) / (t1 - t0)

    def to_table(self) -> str:
        """Two-column text table `t theta`, one knot per line."""
        lines = ["# t theta"]
        lines += [f"{t!r} {th!r}" for t, th in self.knots]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_table(text: str, rate_bound: float = DEFAULT_RATE_BOUND) -> 'RoadProfile':
        knots: List[Tuple[float, float]] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            cols = line.replace(',', ' ').split()
            if len(cols) != 2:
                raise ConfigurationError("table", f"line {lineno}: expected 2 columns, got {len(cols)}")
            try:
                knots.append((float(cols[0]), float(cols[1])))
            except ValueError:
                raise ConfigurationError("table", f"line {lineno}: not a number") from None
        return RoadProfile(kind="table", knots=tuple(knots), rate_bound=rate_bound)


def three_section_profile(rate_bound: float = DEFAULT_RATE_BOUND) -> RoadProfile:
    """Flat until 30 s, decline to -0.15 rad by 40 s, incline to +0.15 rad from 65 to 80 s."""
    return RoadProfile(kind="three_section", knots=THREE_SECTION_KNOTS, rate_bound=rate_bound)


def three_section_road(t: float) -> float:
    if t < 0.0:
        raise ConfigurationError("t", "must be >= 0")
    return three_section_profile().theta(t)


def constant_road(theta: float, rate_bound: float = DEFAULT_RATE_BOUND) -> RoadProfile:
    return RoadProfile(kind="constant", knots=((0.0, theta),), rate_bound=rate_bound)


def run_seed(master: int, index: int) -> int:
    """64-bit seed of run `index` in a batch started from `master`."""
    if master < 0 or index < 0:
        raise ConfigurationError("seed", "must be >= 0")
    return int(np.random.SeedSequence([master, index]).generate_state(1, dtype=np.uint64)[0])


def random_road(seed: int, t_end: float, rate_bound: float = DEFAULT_RATE_BOUND,
                knot_interval: float = DEFAULT_KNOT_INTERVAL) -> RoadProfile:
    """Random road starting flat with a uniform target grade per knot.

    Knots sit at whole multiples of `knot_interval` up to `t_end`; each
    target is drawn from [-0.2, 0.2] and the step from the previous knot is
    clipped to `rate_bound * knot_interval`. A final stretch shorter than
    one interval holds the last grade.
    """
    if not rate_bound > 0.0:
        raise ConfigurationError("rate_bound", "must be > 0")
    if not knot_interval > 0.0:
        raise ConfigurationError("knot_interval", "must be > 0")
    if not t_end > 0.0:
        raise ConfigurationError("t_end", "must be > 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_knots = int(math.floor(t_end / knot_interval + 1e-9))
    times = [i * knot_interval for i in range(n_knots + 1)]
    knots = [(0.0, 0.0)]
    for t_prev, t_next in zip(times, times[1:]):
        target = rng.uniform(-MAX_GRADE, MAX_GRADE)
        max_step = rate_bound * (t_next - t_prev)
        prev = knots[-1][1]
        theta = prev + float(np.clip(target - prev, -max_step, max_step))
        knots.append((float(t_next), float(np.clip(theta, -MAX_GRADE, MAX_GRADE))))
    logger.debug("random road seed=%d with %d knots", seed, len(knots))
    return RoadProfile(kind="random", knots=tuple(knots), rate_bound=rate_bound)

