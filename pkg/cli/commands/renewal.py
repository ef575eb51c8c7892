"""Renewal tail verifications and quadratic-variation checks."""

import argparse
from typing import Any

from cli.common import add_commands
from core.constants import ExperimentKind

_COMMANDS = {
    ExperimentKind.RENEWAL_TAILS: "Exact and Monte Carlo renewal tails against their bounds",
    ExperimentKind.QV_CHECK: "Norms of the block quadratic variations",
}


def register(subparsers: "argparse._SubParsersAction[Any]") -> None:
    add_commands(subparsers, _COMMANDS)
