"""Command dispatcher."""

import argparse
from collections.abc import Sequence

from cli.commands import experiments as experiment_commands
from cli.commands import maps as map_commands
from cli.commands import renewal as renewal_commands
from core.config import settings
from core.constants import LogLevel
from core.logging_setup import configure_logging


def create_parser() -> argparse.ArgumentParser:
    """Build the parser with every subcommand registered."""
    parser = argparse.ArgumentParser(
        prog="lsvlab",
        description=f"{settings.app_name} {settings.version}: nonstationary LSV experiments",
    )
    parser.add_argument(
        "--log-level",
        type=LogLevel,
        choices=list(LogLevel),
        default=None,
        help="Override LSVLAB_LOG_LEVEL",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    map_commands.register(subparsers)
    experiment_commands.register(subparsers)
    renewal_commands.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, configure logging and run the chosen subcommand."""
    args = create_parser().parse_args(argv)
    configure_logging(args.log_level)
    status: int = args.handler(args)
    return status
