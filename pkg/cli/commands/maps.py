"""Map-level subcommands: partition and density."""

import argparse
from typing import Any

from cli.common import add_commands
from core.constants import ExperimentKind

_COMMANDS = {
    ExperimentKind.PARTITION: "First-entry and first-return partitions, gap checks",
    ExperimentKind.DENSITY: "Density evolution with mass and cone checks",
}


def register(subparsers: "argparse._SubParsersAction[Any]") -> None:
    add_commands(subparsers, _COMMANDS)
