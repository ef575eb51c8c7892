"""Shared plumbing for run subcommands."""

import argparse
import logging
import sys
from functools import partial
from pathlib import Path
from typing import Any, TextIO

from core.constants import ExitCode, ExperimentKind
from core.exceptions import ConfigError, LabError
from schemas.run_config import RunConfig, RunSummary, load_config
from services.run_service import execute, exit_code_for

logger = logging.getLogger(__name__)


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """Config path plus the two overrides a run accepts."""
    parser.add_argument("config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Override the master seed")
    parser.add_argument(
        "--out", type=Path, default=None, help="Override the output directory"
    )


def prepare_config(args: argparse.Namespace, kind: ExperimentKind) -> RunConfig:
    """Load the config named on the command line and apply --seed and --out."""
    try:
        config = load_config(args.config)
    except OSError as e:
        raise ConfigError(f"Cannot read config {args.config} ({e.strerror})") from e
    if config.kind is not kind:
        raise ConfigError(
            f"Config describes a {config.kind.value} run, not {kind.value}",
            {"kind": config.kind.value},
        )
    update: dict[str, object] = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
        update["seed"] = args.seed
    if args.out is not None:
        update["output_dir"] = args.out
    return config.model_copy(update=update) if update else config


def print_summary(summary: RunSummary, stream: TextIO = sys.stdout) -> None:
    """Human-readable fit summary."""
    print(f"{summary.kind.value} (seed {summary.seed}) -> {summary.csv_path}", file=stream)
    for name, stat in summary.statistics.items():
        parts = []
        if stat.slope is not None:
            parts.append(f"slope {stat.slope:.4f}")
        if stat.r_squared is not None:
            parts.append(f"r^2 {stat.r_squared:.4f}")
        if stat.reference_slope is not None:
            parts.append(f"reference {stat.reference_slope:.4f}")
        if stat.max_value is not None:
            parts.append(f"max {stat.max_value:.6g}")
        if stat.passed is not None:
            parts.append("ok" if stat.passed else "FAILED")
        if stat.flagged:
            parts.append("flagged")
        print(f"  {name}: {', '.join(parts) or '-'}", file=stream)
    for result in summary.assertions:
        a = result.assertion
        verdict = "PASS" if result.passed else "FAIL"
        print(
            f"  assert {a.statistic} {a.metric.value} in [{a.lower}, {a.upper}]: "
            f"{result.observed} {verdict}",
            file=stream,
        )


def run_command(args: argparse.Namespace, kind: ExperimentKind) -> int:
    """Run one subcommand end to end and return the process exit status."""
    try:
        config = prepare_config(args, kind)
        summary = execute(config)
    except LabError as e:
        code = exit_code_for(e)
        logger.error(f"{kind.value} failed ({code.name}): {e.message}")
        return int(code)
    print_summary(summary)
    return int(ExitCode.OK if summary.passed else ExitCode.ASSERTION_FAILED)


def add_commands(
    subparsers: "argparse._SubParsersAction[Any]", commands: dict[ExperimentKind, str]
) -> None:
    """One run subcommand per experiment kind, named by its kind."""
    for kind, help_text in commands.items():
        parser = subparsers.add_parser(kind.value, help=help_text)
        add_run_arguments(parser)
        parser.set_defaults(handler=partial(run_command, kind=kind))
