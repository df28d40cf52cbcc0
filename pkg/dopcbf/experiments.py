"""Single runs, randomized batches and sigma sweeps, plus their file outputs."""

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from itertools import repeat
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .acc import (
    acc_closed_loop_rhs, acc_monitor, acc_observer_config, acc_plant, build_acc_controllers,
    disturbance_from_grade, grade_from_disturbance,
)
from .config import ExperimentConfig, config_to_plain, resolve_road, validate
from .error import ConfigurationError, DopcbfError
from .integrator import Trajectory, simulate
from .metrics import BatchComparison, RunReport, compare_batch, envelope_margin, summarize_run
from .observer import DisturbanceObserver
from .scenarios import RoadProfile, random_road, run_seed
from .plots import Panel, Series, render_panels

logger = logging.getLogger(__name__)

BATCH_CONTROLLERS = ("docbf", "dopcbf")
TRAJECTORY_COLUMNS = ("t", "D", "v", "u", "slack", "theta", "theta_hat", "d_true", "d_hat", "h", "h_de")


@dataclass
class RunResult:
    controller: str
    road: RoadProfile
    trajectory: Trajectory
    report: RunReport


def run_single(cfg: ExperimentConfig, controller: Optional[str] = None,
               road: Optional[RoadProfile] = None, seed: Optional[int] = None) -> RunResult:
    """One closed-loop run; `controller`, `road` and `seed` default to the config."""
    controller = controller or cfg.controller
    seed = cfg.seed if seed is None else seed
    road = road if road is not None else resolve_road(cfg.road, seed, cfg.sim.t_end)
    p, fp = cfg.acc, cfg.filter
    plant = acc_plant(p)
    obs = acc_observer_config(p, cfg.observer.Lr, fp)
    law = build_acc_controllers(p, fp, obs, plant)[controller]

    def disturbance(t):
        return np.array([disturbance_from_grade(road.theta(t), p)])

    logger.info("run %s on %s road (seed %d)", controller, road.kind, seed)
    traj = simulate(plant, law, DisturbanceObserver(obs, plant), disturbance,
                    [cfg.initial.D, cfg.initial.v], cfg.sim, monitor=acc_monitor(p, fp.sigma),
                    fast_rhs=acc_closed_loop_rhs(p, cfg.observer.Lr, road.theta))
    report = summarize_run(traj, controller, cfg.metrics.transient_skip,
                           seed=seed, envelope_ratio=envelope_margin(traj, obs, plant))
    logger.info("finished %s: min_h=%.4g rms_du=%.4g qp_failures=%d",
                controller, report.min_h, report.rms_du, report.qp_failures)
    return RunResult(controller=controller, road=road, trajectory=traj, report=report)


@dataclass(frozen=True)
class BatchRun:
    """One (road, controller) pair of a batch; `report` is None if the run aborted."""
    index: int
    seed: int
    controller: str
    report: Optional[RunReport]
    error: Optional[str] = None


@dataclass
class BatchResult:
    master_seed: int
    n: int
    controllers: Sequence[str]
    runs: List[BatchRun]
    comparison: BatchComparison

    def summary(self) -> dict:
        counts: Dict[str, dict] = {}
        for c in self.controllers:
            mine = [r for r in self.runs if r.controller == c]
            counts[c] = {
                "violations": sum(1 for r in mine if r.report is not None and r.report.violation),
                "run_failures": sum(1 for r in mine if r.report is None),
                "qp_failures": sum(r.report.qp_failures for r in mine if r.report is not None),
            }
        return {
            "master_seed": self.master_seed,
            "n": self.n,
            "baseline": self.controllers[0],
            "candidate": self.controllers[1],
            "comparison": self.comparison.to_dict(),
            "controllers": counts,
        }


def _batch_task(cfg: ExperimentConfig, index: int, seed: int, controller: str) -> BatchRun:
    road = random_road(seed, cfg.sim.t_end, cfg.road.rate_bound, cfg.road.knot_interval)
    try:
        result = run_single(cfg, controller=controller, road=road, seed=seed)
    except DopcbfError as exc:
        logger.warning("run %d (%s) aborted: %s", index, controller, exc)
        return BatchRun(index=index, seed=seed, controller=controller, report=None, error=str(exc))
    return BatchRun(index=index, seed=seed, controller=controller, report=result.report)


def run_batch(cfg: ExperimentConfig, n: int, master_seed: int, workers: int = 1,
              controllers: Sequence[str] = BATCH_CONTROLLERS) -> BatchResult:
    """Run every controller on the same `n` random roads.

    Road `i` is generated from `run_seed(master_seed, i)`. With `workers > 1`
    the runs are spread over a process pool; results come back in run order
    either way, so the output does not depend on `workers`.
    """
    if n < 1:
        raise ConfigurationError("n", "must be >= 1")
    if workers < 1:
        raise ConfigurationError("workers", "must be >= 1")
    if len(controllers) != 2:
        raise ConfigurationError("controllers", "a batch compares exactly two controllers")
    validate(cfg)
    tasks = [(i, run_seed(master_seed, i), c) for i in range(n) for c in controllers]
    indices, seeds, names = zip(*tasks)
    if workers == 1:
        runs = [_batch_task(cfg, i, s, c) for i, s, c in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_batch_task, repeat(cfg), indices, seeds, names))

    by_key = {(r.index, r.controller): r for r in runs}
    paired_a, paired_b = [], []
    for i in range(n):
        a, b = by_key[(i, controllers[0])], by_key[(i, controllers[1])]
        if a.report is not None and b.report is not None:
            paired_a.append(a.report)
            paired_b.append(b.report)
    return BatchResult(master_seed=master_seed, n=n, controllers=tuple(controllers), runs=runs,
                       comparison=compare_batch(paired_a, paired_b))


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    min_h: Optional[float]
    min_hde: Optional[float]
    rms_du: Optional[float]
    status: str = "ok"
    message: str = ""


def sweep_sigma(cfg: ExperimentConfig, sigmas: Sequence[float]) -> List[SweepRow]:
    """One run per sigma; inadmissible values give a `skipped` row and no run."""
    rows = []
    for sigma in sigmas:
        try:
            trial = cfg.replace(filter=replace(cfg.filter, sigma=float(sigma)))
            validate(trial)
        except ConfigurationError as exc:
            logger.warning("sigma=%g skipped: %s", sigma, exc)
            rows.append(SweepRow(sigma=float(sigma), min_h=None, min_hde=None, rms_du=None,
                                 status="skipped", message=str(exc)))
            continue
        rep = run_single(trial).report
        rows.append(SweepRow(sigma=float(sigma), min_h=rep.min_h, min_hde=rep.min_hde, rms_du=rep.rms_du))
    return rows


def _num(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def trajectory_table(result: RunResult, cfg: ExperimentConfig) -> str:
    """CSV text of a run with the fixed `TRAJECTORY_COLUMNS` header."""
    traj, p = result.trajectory, cfg.acc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for k, t in enumerate(traj.times):
        d_true = float(traj.disturbances[k, 0])
        d_hat = float(traj.estimates[k, 0])
        w.writerow([_num(t), _num(traj.states[k, 0]), _num(traj.states[k, 1]),
                    _num(traj.controls[k, 0]), _num(traj.slacks[k]),
                    _num(result.road.theta(t)), _num(grade_from_disturbance(d_hat, p)),
                    _num(d_true), _num(d_hat), _num(traj.h[k]), _num(traj.h_de[k])])
    return buf.getvalue()


def run_document(result: RunResult, cfg: ExperimentConfig) -> dict:
    return {
        "report": result.report.to_dict(),
        "failures": [asdict(f) for f in result.trajectory.failures],
        "config": config_to_plain(cfg),
    }


def run_plot(result: RunResult, cfg: ExperimentConfig) -> str:
    """Barrier, grade, gap and speed panels of one run."""
    traj = result.trajectory
    t = traj.times
    theta_hat = np.array([grade_from_disturbance(float(d), cfg.acc) for d in traj.estimates[:, 0]])
    panels = [
        Panel("barrier", "m", [Series("h", t, traj.h), Series("h_de", t, traj.h_de)], zero_line=True),
        Panel("road grade", "rad", [Series("theta", t, result.road.theta(t)), Series("theta_hat", t, theta_hat)]),
        Panel("gap D", "m", [Series("D", t, traj.states[:, 0])]),
        Panel("speed v", "m/s", [Series("v", t, traj.states[:, 1])]),
    ]
    return render_panels(panels, title=f"{result.controller} run")


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def write_run(result: RunResult, cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trajectory.csv").write_text(trajectory_table(result, cfg), encoding="utf-8")
    write_json(out_dir / "report.json", run_document(result, cfg))
    (out_dir / "plot.svg").write_text(run_plot(result, cfg), encoding="utf-8")


def write_batch(batch: BatchResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "summary.json", batch.summary())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("index", "seed", "controller", "rms_du", "min_h", "min_hde", "violation",
                "qp_failures", "error"))
    for r in batch.runs:
        rep = r.report
        if rep is None:
            w.writerow((r.index, r.seed, r.controller, "", "", "", "", "", r.error))
        else:
            w.writerow((r.index, r.seed, r.controller, _num(rep.rms_du), _num(rep.min_h), _num(rep.min_hde),
                        str(rep.violation).lower(), rep.qp_failures, ""))
    (out_dir / "per_run.csv").write_text(buf.getvalue(), encoding="utf-8")


def write_sweep(rows: Sequence[SweepRow], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sigma", "min_h", "min_hde", "rms_du", "status"))
    for r in rows:
        w.writerow((_num(r.sigma), _num(r.min_h), _num(r.min_hde), _num(r.rms_du), r.status))
    (out_dir / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")

    ok = [r for r in rows if r.status == "ok"]
    xs = np.log10([r.sigma for r in ok]) if ok else np.zeros(0)
    panels = [
        Panel("min h", "m", [Series("min_h", xs, [r.min_h for r in ok]),
                             Series("min_hde", xs, [r.min_hde for r in ok])], zero_line=True, x_label="log10 sigma"),
        Panel("RMS du/dt", "N/s", [Series("rms_du", xs, [r.rms_du for r in ok])], x_label="log10 sigma"),
    ]
    (out_dir / "sweep.svg").write_text(render_panels(panels, title="sigma sweep", markers=True), encoding="utf-8")
