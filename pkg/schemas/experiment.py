"""Schemas for observables, fits and experiment reports."""

import math
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.constants import ObservableFunction, ObservableKind

_LIPSCHITZ = {
    ObservableFunction.IDENTITY: 1.0,
    ObservableFunction.COSINE: 2.0 * math.pi,
    ObservableFunction.DIST_HALF: 1.0,
    ObservableFunction.ZERO: 0.0,
    ObservableFunction.ONE: 0.0,
}


class ObservableSpec(BaseModel):
    """
    Observables v_n = weight_n * v along a trajectory.

    Without weights every step uses v itself. Weights play the role of the
    per-step Lipschitz constants of a separately Lipschitz functional.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ObservableKind = Field(default=ObservableKind.RUNNING_MAX)
    function: ObservableFunction = Field(default=ObservableFunction.COSINE)
    weights: tuple[float, ...] | None = Field(
        default=None, description="Per-step weights, index 0 for v_0"
    )

    @model_validator(mode="after")
    def _check_weights(self) -> Self:
        if self.weights is not None and any(w < 0.0 for w in self.weights):
            raise ValueError("Observable weights must be nonnegative")
        if self.kind is ObservableKind.WEIGHTED_BIRKHOFF and self.weights is None:
            raise ValueError("weighted_birkhoff needs per-step weights")
        return self

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of the base function v."""
        return _LIPSCHITZ[self.function]

    def weight(self, k: int) -> float:
        if self.weights is None:
            return 1.0
        return self.weights[k] if k < len(self.weights) else 0.0


class FitResult(BaseModel):
    """Least-squares line through (log x, log y) or (x, y)."""

    slope: float
    intercept: float
    r_squared: float
    points: int = Field(..., description="Points used in the fit")
    excluded: int = Field(default=0, description="Points dropped for y = 0")
    slope_stderr: float | None = None


class SeriesPoint(BaseModel):
    """(n, value); n is the threshold t for tail experiments."""

    n: float
    value: float


class ExperimentReport(BaseModel):
    """One statistic as a function of n, with its fit over a declared window."""

    statistic: str
    series: list[SeriesPoint] = Field(default_factory=list)
    fit: FitResult | None = None
    fit_window: tuple[float, float] | None = None
    reference_slope: float | None = Field(
        default=None, description="Slope predicted by the rate being checked"
    )
    flagged: bool = Field(
        default=False, description="Fit undefined or based on degenerate data"
    )
    seed: int | None = None
    config_hash: str | None = None

    @model_validator(mode="after")
    def _check_series(self) -> Self:
        ns = [p.n for p in self.series]
        if any(b <= a for a, b in zip(ns, ns[1:], strict=False)):
            raise ValueError("Series n must be strictly increasing")
        if self.fit_window is not None and ns:
            lo, hi = self.fit_window
            if lo > hi or hi < ns[0] or lo > ns[-1]:
                raise ValueError(f"Fit window {self.fit_window} is outside the series")
        return self

    @property
    def ns(self) -> np.ndarray:
        return np.array([p.n for p in self.series])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.series])


class MarkovTrace(BaseModel):
    """S_1..S_n along simulated paths of the three-state chain."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    starts: np.ndarray = Field(..., description="Initial state of each path")
    sums: np.ndarray = Field(..., description="S_1..S_n, one row per path")
    constant_observable: bool = False

    @property
    def exact(self) -> bool:
        """S_n = -n from A and S_n = n from B or C (S_n = n for v = 1)."""
        steps = np.arange(1, self.sums.shape[1] + 1)
        if self.constant_observable:
            sign = np.ones(self.starts.shape, dtype=np.int64)
        else:
            sign = np.where(self.starts == 0, -1, 1)
        return bool(np.array_equal(self.sums, sign[:, None] * steps[None, :]))
