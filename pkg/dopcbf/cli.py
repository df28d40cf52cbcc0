"""Command-line entry point.

    dopcbf simulate    [--config F] [--controller C] [--set k=v ...] [--out DIR]
    dopcbf batch       [--config F] [--n N] [--seed S] [--workers W] [--out DIR]
    dopcbf sweep-sigma [--config F] [--sigmas 0.1,1,10] [--out DIR]
    dopcbf config      [--config F] [--set k=v ...]

Exit codes: 0 success, 1 run failure, 2 configuration error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from colorama import Fore, Style, just_fix_windows_console

from .acc import CONTROLLERS
from .config import ExperimentConfig, config_to_document, config_to_plain, load_config
from .error import ConfigurationError, DopcbfError, NotationError
from .experiments import run_batch, run_single, sweep_sigma, write_batch, write_json, write_run, write_sweep
from .ser import to_string_pretty

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG = 2


def _error(message: str) -> None:
    print(f"{Fore.RED}error:{Style.RESET_ALL} {message}", file=sys.stderr)


def _sigmas(text: str) -> List[float]:
    try:
        return [float(s) for s in text.split(',') if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from None


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="dopcbf", description="Disturbance-observer-parameterized CBF experiments")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="experiment file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                       help="override one field, e.g. --set acc.M=1800 (repeatable)")

    p = sub.add_parser("simulate", help="one closed-loop run")
    common(p)
    p.add_argument("--controller", choices=CONTROLLERS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("batch", help="randomized roads, DO-CBF against DOp-CBF")
    common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, help="master seed (default: config seed)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sweep-sigma", help="one run per sigma value")
    common(p)
    p.add_argument("--sigmas", type=_sigmas, default=[0.1, 1.0, 10.0])
    p.add_argument("--out", type=Path)

    p = sub.add_parser("config", help="print the resolved configuration")
    common(p)
    return parser.parse_args(argv)


def _load(args) -> ExperimentConfig:
    overrides = list(args.overrides)
    if getattr(args, "controller", None):
        overrides.append(f"controller={args.controller}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(str(args.config) if args.config else None, overrides)


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    out = args.out or Path(cfg.output_dir)
    try:
        result = run_single(cfg)
    except ConfigurationError:
        raise
    except DopcbfError as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", {"error": str(exc), "t": getattr(exc, "t", None),
                                        "config": config_to_plain(cfg)})
        _error(str(exc))
        return EXIT_RUN_FAILURE
    write_run(result, cfg, out)
    rep = result.report
    print(f"{rep.controller}: min_h={rep.min_h:.4f} min_hde={rep.min_hde:.4f} "
          f"rms_du={rep.rms_du:.6g} violation={rep.violation} -> {out}")
    if rep.qp_failures:
        _error(f"{rep.qp_failures} controller failures (first at t={result.trajectory.failures[0].t:.3f})")
        return EXIT_RUN_FAILURE
    return EXIT_OK


def cmd_batch(args, cfg: ExperimentConfig) -> int:
    out = args.out or Path(cfg.output_dir)
    batch = run_batch(cfg, args.n, cfg.seed, workers=args.workers)
    write_batch(batch, out)
    cmp = batch.comparison
    summary = batch.summary()
    print(f"{batch.n} roads: violations " +
          ", ".join(f"{c}={summary['controllers'][c]['violations']}" for c in batch.controllers) +
          (f", mean improvement {cmp.mean_improvement:.2f}%" if cmp.mean_improvement is not None else "") +
          f" -> {out}")
    failed = any(v["run_failures"] or v["qp_failures"] for v in summary["controllers"].values())
    return EXIT_RUN_FAILURE if failed else EXIT_OK


def cmd_sweep_sigma(args, cfg: ExperimentConfig) -> int:
    out = args.out or Path(cfg.output_dir)
    rows = sweep_sigma(cfg, args.sigmas)
    write_sweep(rows, out)
    for r in rows:
        if r.status == "ok":
            print(f"sigma={r.sigma:g}: min_h={r.min_h:.4f} min_hde={r.min_hde:.4f} rms_du={r.rms_du:.6g}")
        else:
            print(f"sigma={r.sigma:g}: {r.status}")
    return EXIT_OK


def cmd_config(args, cfg: ExperimentConfig) -> int:
    sys.stdout.write(to_string_pretty(config_to_document(cfg)))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "batch": cmd_batch,
    "sweep-sigma": cmd_sweep_sigma,
    "config": cmd_config,
}


def main(argv: Optional[List[str]] = None) -> int:
    just_fix_windows_console()
    args = _parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigurationError, NotationError) as exc:
        _error(str(exc))
        return EXIT_CONFIG
    except DopcbfError as exc:
        _error(str(exc))
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
