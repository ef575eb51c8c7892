"""Schemas for grid densities, tail functions and cone diagnostics."""

import math
from typing import Any, Self

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import zeta

from core.constants import TailRule

FloatArray = NDArray[np.float64]

# Starting points summed per chunk when a window sum has no closed form
_WINDOW_CHUNK = 1024


def _frozen_array(value: Any) -> FloatArray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


class GridDensity(BaseModel):
    """
    Piecewise-constant density on a nonuniform grid of [0, 1].

    values[i] is the mass of cell (edges[i], edges[i+1]] divided by its width.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    edges: np.ndarray = Field(..., description="Breakpoints 0 = e_0 < ... < e_M = 1")
    values: np.ndarray = Field(..., description="Cell averages, one per cell")

    @field_validator("edges", "values", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> FloatArray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if self.edges.ndim != 1 or self.edges.size < 2:
            raise ValueError("edges must be a 1-d array with at least two entries")
        if self.values.shape != (self.edges.size - 1,):
            raise ValueError(
                f"values has shape {self.values.shape}, expected ({self.edges.size - 1},)"
            )
        if self.edges[0] != 0.0 or self.edges[-1] != 1.0:
            raise ValueError("edges must start at 0 and end at 1")
        if np.any(np.diff(self.edges) <= 0.0):
            raise ValueError("edges must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        return self

    @classmethod
    def from_masses(cls, edges: FloatArray, masses: ArrayLike) -> "GridDensity":
        """Density with the given mass in each cell."""
        return cls(edges=edges, values=np.asarray(masses, dtype=np.float64) / np.diff(edges))

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def widths(self) -> FloatArray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> FloatArray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def masses(self) -> FloatArray:
        return self.values * self.widths

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def same_grid(self, other: "GridDensity") -> bool:
        return self.edges is other.edges or (
            self.edges.shape == other.edges.shape
            and bool(np.array_equal(self.edges, other.edges))
        )

    def cumulative(self) -> FloatArray:
        """Distribution function at the edges (length M + 1)."""
        return np.concatenate(([0.0], np.cumsum(self.masses)))

    def cdf(self, x: ArrayLike) -> FloatArray:
        """mu([0, x]), linear inside each cell."""
        return np.interp(np.asarray(x, dtype=np.float64), self.edges, self.cumulative())

    def normalized(self) -> "GridDensity":
        mass = self.total_mass
        if mass <= 0.0:
            raise ValueError("Cannot normalize a density with nonpositive mass")
        return GridDensity(edges=self.edges, values=self.values / mass)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridDensity):
            return NotImplemented
        return self.same_grid(other) and bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]


class TailFunction(BaseModel):
    """
    Nonincreasing tail bound ell -> r(ell) in [0, 1] for ell = 1, 2, ...

    Stored values cover 1..L; larger arguments follow the extrapolation rule,
    continuing from r(L). Arguments below 1 evaluate to 1. A tail built as
    min(1, scale * sum_{j=0}^{window} base(j + ell)) keeps base and window so
    that arguments past L are summed exactly instead.
    """

    model_config = ConfigDict(frozen=True)

    values: tuple[float, ...] = Field(..., min_length=1, description="r(1), ..., r(L)")
    rule: TailRule = Field(default=TailRule.ZERO, description="Extrapolation past L")
    exponent: float = Field(
        default=0.0, ge=0.0, description="beta' for power, beta for stretched_exp"
    )
    rate: float = Field(default=0.0, ge=0.0, description="c for stretched_exp")
    base: "TailFunction | None" = Field(
        default=None, description="Summed tail when this is a shifted partial sum"
    )
    window: int | None = Field(default=None, ge=0, description="n of the partial sum")
    scale: float = Field(default=1.0, gt=0.0, description="C_h of the partial sum")

    @model_validator(mode="after")
    def _check_values(self) -> Self:
        vals = self.values
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("Tail values must lie in [0, 1]")
        if any(b > a for a, b in zip(vals, vals[1:], strict=False)):
            raise ValueError("Tail values must be nonincreasing")
        if (self.base is None) != (self.window is None):
            raise ValueError("base and window must be given together")
        if self.base is not None and self.length < self.base.length:
            raise ValueError("A partial-sum tail must store at least base.length values")
        return self

    @classmethod
    def power_law(
        cls, exponent: float, constant: float = 1.0, length: int = 64
    ) -> "TailFunction":
        """min(1, constant * ell^-exponent)."""
        ell = np.arange(1, length + 1, dtype=np.float64)
        vals = np.minimum(1.0, constant * ell**-exponent)
        return cls(values=tuple(vals.tolist()), rule=TailRule.POWER, exponent=exponent)

    @classmethod
    def stretched_exponential(
        cls, rate: float, exponent: float, constant: float = 1.0, length: int = 64
    ) -> "TailFunction":
        """min(1, constant * exp(-rate * ell^exponent))."""
        ell = np.arange(1, length + 1, dtype=np.float64)
        vals = np.minimum(1.0, constant * np.exp(-rate * ell**exponent))
        return cls(
            values=tuple(vals.tolist()),
            rule=TailRule.STRETCHED_EXP,
            exponent=exponent,
            rate=rate,
        )

    @classmethod
    def zero(cls) -> "TailFunction":
        return cls(values=(0.0,), rule=TailRule.ZERO)

    @property
    def length(self) -> int:
        return len(self.values)

    def evaluate(self, ell: ArrayLike) -> FloatArray:
        """Vectorized r(ell) for integer-valued ell."""
        idx = np.asarray(ell, dtype=np.float64)
        table = np.asarray(self.values, dtype=np.float64)
        last = table[-1]
        length = float(self.length)
        out = np.empty_like(idx)

        low = idx < 1.0
        inside = (~low) & (idx <= length)
        beyond = idx > length
        out[low] = 1.0
        out[inside] = table[idx[inside].astype(np.int64) - 1]

        far = idx[beyond]
        if self.base is not None and self.window is not None:
            out[beyond] = np.minimum(1.0, self.scale * self.base.window_sums(far, self.window))
        elif self.rule is TailRule.POWER and self.exponent > 0.0:
            out[beyond] = last * (far / length) ** -self.exponent
        elif self.rule is TailRule.STRETCHED_EXP:
            out[beyond] = last * np.exp(
                -self.rate * (far**self.exponent - length**self.exponent)
            )
        elif self.rule is TailRule.POWER:
            out[beyond] = last
        else:
            out[beyond] = 0.0
        return out

    def window_sums(self, starts: ArrayLike, n: int) -> FloatArray:
        """
        sum_{j=0}^{n} r(j + s) for each start s past the stored values.

        Power extrapolation with exponent above 1 uses Hurwitz zeta
        differences; other rules are summed directly.
        """
        s = np.asarray(starts, dtype=np.float64)
        if s.size and s.min() <= self.length:
            raise ValueError("window_sums starts must lie past the stored values")
        if self.base is None:
            last = self.values[-1]
            if self.rule is TailRule.ZERO or last == 0.0:
                return np.zeros_like(s)
            if self.rule is TailRule.POWER and self.exponent == 0.0:
                return np.full_like(s, (n + 1) * last)
            if self.rule is TailRule.POWER and self.exponent > 1.0:
                constant = last * float(self.length) ** self.exponent
                return constant * (zeta(self.exponent, s) - zeta(self.exponent, s + n + 1))
        offsets = np.arange(n + 1, dtype=np.float64)
        out = np.empty_like(s)
        for lo in range(0, s.size, _WINDOW_CHUNK):
            chunk = s[lo : lo + _WINDOW_CHUNK]
            terms = self.evaluate(chunk[:, None] + offsets[None, :])
            # far end first so small terms are added before large ones
            out[lo : lo + _WINDOW_CHUNK] = terms[:, ::-1].sum(axis=1)
        return out

    def __call__(self, ell: int) -> float:
        return float(self.evaluate(np.array([ell]))[0])

    def total(self, horizon: int) -> float:
        """Sum of r(1..horizon)."""
        return float(np.sum(self.evaluate(np.arange(1, horizon + 1))))


class CheckOutcome(BaseModel):
    """One condition of the cone with its worst violation."""

    passed: bool
    worst_violation: float = Field(..., ge=0.0)
    at: float | None = Field(default=None, description="Midpoint of the worst cell")


class ConeDiagnostics(BaseModel):
    """Result of checking a density against the cone conditions."""

    gamma_star: float
    a: float
    nonnegative: CheckOutcome
    nonincreasing: CheckOutcome
    weighted_nondecreasing: CheckOutcome
    pointwise_bound: CheckOutcome

    @property
    def passed(self) -> bool:
        return all(
            c.passed
            for c in (
                self.nonnegative,
                self.nonincreasing,
                self.weighted_nondecreasing,
                self.pointwise_bound,
            )
        )

    @property
    def worst_violation(self) -> float:
        return max(
            self.nonnegative.worst_violation,
            self.nonincreasing.worst_violation,
            self.weighted_nondecreasing.worst_violation,
            self.pointwise_bound.worst_violation,
        )


def default_cone_parameter(gamma_star: float) -> float:
    """a = 2^gamma* (gamma* + 2) + 1."""
    return math.pow(2.0, gamma_star) * (gamma_star + 2.0) + 1.0
