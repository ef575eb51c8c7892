"""Custom exceptions for the laboratory."""

from typing import Any


class LabError(Exception):
    """Base exception for LSV Lab."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class DomainError(LabError):
    """Raised when a point or parameter lies outside its mathematical domain."""


class SequenceIndexError(LabError):
    """Raised when a composition reaches past the end of a parameter sequence."""

    def __init__(self, index: int, length: int):
        self.index = index
        self.length = length
        super().__init__(
            f"Index {index} exceeds parameter sequence length {length}",
            {"index": index, "length": length},
        )


class GridMismatchError(LabError):
    """Raised when two densities live on different grids."""


class PartitionMismatchError(LabError):
    """Raised when entry and return partitions come from different sequences."""


class ParameterError(LabError):
    """Raised when a numerical parameter violates its documented constraint."""


class ConvergenceError(LabError):
    """Raised when an iterative method exhausts its iteration cap."""

    def __init__(self, method: str, iterations: int, residual: float):
        self.method = method
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"{method} did not converge after {iterations} iterations "
            f"(residual {residual:.3e})",
            {"method": method, "iterations": iterations, "residual": residual},
        )


class ResourceBudgetError(LabError):
    """Raised when a computation would exceed its configured state budget."""


class DegenerateFitError(LabError):
    """Raised when a regression has too few usable points."""


class ConfigError(LabError):
    """Raised when a run configuration is unusable."""


class ConfigParseError(ConfigError):
    """Raised when a configuration document is malformed."""


class ConfigRangeError(ConfigError):
    """Raised when configuration fields are outside their documented ranges."""

    def __init__(self, message: str, fields: list[str]):
        self.fields = fields
        super().__init__(message, {"fields": fields})


class OutputError(LabError):
    """Raised when artifacts cannot be written."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{message}: {path}", {"path": path})
