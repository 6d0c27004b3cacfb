"""
Command-line entry point: run one episode, validate a scenario, or sweep a parameter
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from itertools import product
from pathlib import Path
from typing import List, Optional
import argparse
import logging
import sys

import pandas as pd

from src.cli.scenario import ScenarioConfig, validate_scenario
from src.config.settings import settings
from src.controller.safety_filter import ControllerKind
from src.exceptions import (
    ConvergenceError,
    ExpressionError,
    InfeasibleInputSet,
    InitialConditionError,
    RelativeDegreeError,
    SafetyFilterError,
    ScenarioError,
)
from src.sim.episode import run_episode
from src.sim.noise import NoiseMode

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_UNSAFE = 3

SWEEP_AXES = ("eps_x", "eps_u", "rate", "dt", "seed", "taylor_order", "pop_budget")
_INTEGER_AXES = ("seed", "taylor_order", "pop_budget")


def configure_logging(level: Optional[str] = None):
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )


def load_config(args) -> ScenarioConfig:
    """Scenario file with command-line overrides applied"""
    config = ScenarioConfig.from_file(args.scenario)
    return config.with_overrides(
        eps_x=args.eps_x,
        eps_u=args.eps_u,
        rate=args.rate,
        dt=args.dt,
        seed=args.seed,
        noise_mode=args.noise_mode,
        taylor_order=args.taylor_order,
        pop_budget=args.pop_budget,
    )


def episode_exit_code(kind: ControllerKind, summary) -> int:
    """Naive runs always succeed; certified runs fail on violation or early stop"""
    if kind == ControllerKind.NAIVE:
        return EXIT_OK
    if summary.violated or summary.status != "completed":
        return EXIT_UNSAFE
    return EXIT_OK


def run_single(config: ScenarioConfig, controller: str, out_dir: Path, audit_samples: int = 0) -> dict:
    """
    Run one episode and write its artifacts

    Returns:
        Row describing the outcome, including the exit code
    """
    kind = ControllerKind(controller)
    row = {"scenario": config.name, "controller": kind.value}
    try:
        scenario = config.build()
        log = run_episode(scenario, kind, audit_samples=audit_samples)
    except InitialConditionError as e:
        logger.warning(f"Episode refused: {str(e)}")
        row.update({"status": "refused", "violated": False, "exit_code": EXIT_UNSAFE})
        return row
    except (InfeasibleInputSet, ConvergenceError) as e:
        logger.error(f"Cannot certify {config.name}/{kind.value}: {str(e)}")
        code = EXIT_OK if kind == ControllerKind.NAIVE else EXIT_UNSAFE
        row.update({"status": "infeasible", "violated": False, "exit_code": code})
        return row

    log.write(out_dir)
    summary = log.summary
    row.update({
        "status": summary.status,
        "steps_completed": summary.steps_completed,
        "violated": summary.violated,
        "min_h": summary.min_h_overall,
        "qp_infeasible": summary.qp_infeasible,
        "p95_step_time": log.timing.p95,
        "exit_code": episode_exit_code(kind, summary),
    })
    row.update({f"min_h_{name}": value for name, value in summary.min_h.items()})
    return row


def run_command(args) -> int:
    config = load_config(args)
    out_dir = Path(args.out or Path(settings.output_dir) / config.name / args.controller)
    row = run_single(config, args.controller, out_dir, args.audit_samples)
    logger.info(
        f"{config.name}/{args.controller}: status={row['status']}, violated={row['violated']}, "
        f"min h={row.get('min_h', float('nan')):.6g}"
    )
    return row["exit_code"]


def validate_command(args) -> int:
    report = validate_scenario(args.scenario)
    print(report.render())
    return EXIT_OK if report.ok else EXIT_CONFIG


def parse_values(axis: str, text: str) -> List[float]:
    """Comma-separated sweep values for an axis"""
    parts = [p.strip() for p in (text or "").split(",") if p.strip()]
    if not parts:
        raise ScenarioError(f"Sweep over {axis} needs at least one value", field="--values")
    try:
        if axis in _INTEGER_AXES:
            return [int(p) for p in parts]
        return [float(p) for p in parts]
    except ValueError:
        raise ScenarioError(f"Invalid sweep values '{text}' for {axis}", field="--values")


def _sweep_cell(config_text: str, axis: str, value, controller: str, out_dir: str, audit_samples: int, realtime: bool) -> dict:
    """Worker body for one sweep cell; must stay importable for process pools"""
    if realtime:
        settings.realtime_budget_fraction = settings.realtime_budget_fraction or 0.5
    try:
        config = ScenarioConfig.from_text(config_text).with_overrides(**{axis: value})
        row = run_single(config, controller, Path(out_dir), audit_samples)
    except SafetyFilterError as e:
        logger.error(f"Error during sweep cell {axis}={value}/{controller}: {str(e)}", exc_info=True)
        row = {"controller": controller, "status": "error", "violated": False, "exit_code": EXIT_CONFIG}
    row.update({"axis": axis, "value": value})
    return row


def sweep_command(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise ScenarioError(f"Unknown sweep axis '{args.axis}'; expected one of {', '.join(SWEEP_AXES)}", field="--axis")
    values = parse_values(args.axis, args.values)
    controllers = [ControllerKind(c.strip()).value for c in args.controllers.split(",") if c.strip()]
    if not controllers:
        raise ScenarioError("Sweep needs at least one controller", field="--controllers")

    config = load_config(args)
    text = config.to_text()
    out_root = Path(args.out or Path(settings.output_dir) / f"{config.name}-sweep-{args.axis}")
    cells = list(product(values, controllers))
    workers = args.workers or settings.workers
    logger.info(f"Sweeping {args.axis} over {values} for {controllers}: {len(cells)} episodes on {workers} workers")

    rows = []
    if workers <= 1:
        for value, controller in cells:
            rows.append(_sweep_cell(
                text, args.axis, value, controller,
                str(out_root / f"{args.axis}={value}" / controller), args.audit_samples, args.realtime,
            ))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(
                    _sweep_cell, text, args.axis, value, controller,
                    str(out_root / f"{args.axis}={value}" / controller), args.audit_samples, args.realtime,
                )
                for value, controller in cells
            ]
            for future in as_completed(futures):
                rows.append(future.result())

    table = pd.DataFrame(rows)
    order = {c: i for i, c in enumerate(controllers)}
    table = table.sort_values(by=["value", "controller"], key=lambda col: col.map(order) if col.name == "controller" else col)
    leading = ["axis", "value", "controller", "status", "violated"]
    table = table[leading + [c for c in table.columns if c not in leading]]
    out_root.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_root / "comparison.csv", index=False, float_format="%.17g")
    logger.info(f"Wrote {out_root / 'comparison.csv'}")

    certified = table[table["controller"] != ControllerKind.NAIVE.value]
    if (certified["exit_code"] == EXIT_CONFIG).any():
        return EXIT_CONFIG
    if (certified["exit_code"] == EXIT_UNSAFE).any():
        return EXIT_UNSAFE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Sampled-data CBF safety filter experiments")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=str, required=True, help="Scenario file")
    common.add_argument("--log-level", type=str, default=None, help="Logging level (default from settings)")

    overrides = argparse.ArgumentParser(add_help=False)
    overrides.add_argument("--out", type=str, default=None, help="Output directory")
    overrides.add_argument("--seed", type=int, default=None, help="Noise seed")
    overrides.add_argument("--eps-x", type=float, default=None, help="Measurement noise radius")
    overrides.add_argument("--eps-u", type=float, default=None, help="Actuation noise radius")
    overrides.add_argument(
        "--noise-mode",
        type=str,
        default=None,
        choices=[mode.value for mode in NoiseMode],
        help="Disturbance model (default from the scenario)",
    )
    overrides.add_argument("--rate", type=float, default=None, help="Sampling rate in Hz")
    overrides.add_argument("--dt", type=float, default=None, help="Sampling period in seconds")
    overrides.add_argument("--taylor-order", type=int, default=None, help="Taylor model order")
    overrides.add_argument("--pop-budget", type=int, default=None, help="Branch-and-bound node budget")
    overrides.add_argument("--audit-samples", type=int, default=0, help="Monte Carlo audit samples per step")
    overrides.add_argument("--realtime", action="store_true", help="Bound margin computation time by half the period")

    run = subparsers.add_parser("run", parents=[common, overrides], help="Run one episode")
    run.add_argument(
        "--controller",
        type=str,
        default=ControllerKind.USDCBF.value,
        choices=[k.value for k in ControllerKind],
        help="Filter variant",
    )

    subparsers.add_parser("validate", parents=[common], help="Check a scenario without simulating")

    sweep = subparsers.add_parser("sweep", parents=[common, overrides], help="Sweep one parameter")
    sweep.add_argument("--axis", type=str, required=True, choices=SWEEP_AXES, help="Swept parameter")
    sweep.add_argument("--values", type=str, required=True, help="Comma-separated values")
    sweep.add_argument(
        "--controllers",
        type=str,
        default=f"{ControllerKind.NAIVE.value},{ControllerKind.USDCBF.value}",
        help="Comma-separated filter variants",
    )
    sweep.add_argument("--workers", type=int, default=None, help="Worker processes")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    if getattr(args, "realtime", False):
        settings.realtime_budget_fraction = settings.realtime_budget_fraction or 0.5

    commands = {"run": run_command, "validate": validate_command, "sweep": sweep_command}
    try:
        return commands[args.command](args)
    except (ScenarioError, ExpressionError, RelativeDegreeError) as e:
        logger.error(f"Configuration error: {str(e)}")
        return EXIT_CONFIG
    except (InfeasibleInputSet, InitialConditionError) as e:
        logger.error(f"Safety check failed: {str(e)}")
        return EXIT_UNSAFE
    except ValueError as e:
        logger.error(f"Invalid argument: {str(e)}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Error during {args.command}: {str(e)}", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
