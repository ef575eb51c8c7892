"""Rate experiments and the Markov counterexample."""

import argparse
from typing import Any

from cli.common import add_commands
from core.constants import ExperimentKind

_COMMANDS = {
    ExperimentKind.MEMORY_LOSS: "Total variation decay between two pushforwards",
    ExperimentKind.MOMENTS: "Moment growth of centered sums",
    ExperimentKind.TAILS: "Tail of the running maximum at fixed n",
    ExperimentKind.DEVIATIONS: "Large and moderate deviation probabilities",
    ExperimentKind.COUNTEREXAMPLE: "Non-mixing three-state chain",
}


def register(subparsers: "argparse._SubParsersAction[Any]") -> None:
    add_commands(subparsers, _COMMANDS)
