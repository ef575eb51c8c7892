"""Schemas package for domain types and run configuration."""

from .density import GridDensity, TailFunction
from .experiment import ExperimentReport, ObservableSpec
from .partition import PartitionPoints
from .renewal import RenewalReport, RenewalSpec
from .run_config import RunConfig, RunSummary
from .sequence import LsvMap, ParameterSequence

__all__ = [
    "ExperimentReport",
    "GridDensity",
    "LsvMap",
    "ObservableSpec",
    "ParameterSequence",
    "PartitionPoints",
    "RenewalReport",
    "RenewalSpec",
    "RunConfig",
    "RunSummary",
    "TailFunction",
]
