"""Schemas for the renewal layer and quadratic-variation checks."""

from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.constants import HFamilyRule
from schemas.density import TailFunction


class RenewalSpec(BaseModel):
    """
    Distributional data of S = X_1 + ... + X_tau.

    tau is geometric with parameter theta. Every block value is at least n0 and
    P(X >= ell) = tail(ell - n0 + 1) for ell > n0, where the tail is r_hat for
    the first block and h_k for a block following a block of value k.
    """

    model_config = ConfigDict(frozen=True)

    theta: float = Field(..., gt=0.0, le=1.0, description="Stopping probability per block")
    n0: int = Field(default=1, ge=1, description="Smallest block value")
    r_hat: TailFunction = Field(..., description="First-block tail, r_hat(1) = 1")
    h: TailFunction = Field(
        default_factory=TailFunction.zero, description="Base tail of later blocks"
    )
    h_rule: HFamilyRule = Field(
        default=HFamilyRule.TAIL_SUM, description="How h_k is built from h"
    )
    c_h: float = Field(default=1.0, gt=0.0, description="Constant in the tail sums")
    value_cap: int = Field(
        default=2048, ge=1, description="Largest block value tracked exactly"
    )

    @model_validator(mode="after")
    def _check_normalized(self) -> Self:
        if abs(self.r_hat.values[0] - 1.0) > 1e-12:
            raise ValueError(f"r_hat(1) must be 1, got {self.r_hat.values[0]}")
        return self


class RenewalTail(BaseModel):
    """Exact tails P(S >= n), n = 1..n_max, with the truncation certificate."""

    n_max: int
    tails: tuple[float, ...] = Field(..., description="Lower bracket of P(S >= n)")
    upper: tuple[float, ...] = Field(..., description="Upper bracket of P(S >= n)")
    residual: float = Field(
        default=0.0, ge=0.0, description="Mass with a block value above value_cap"
    )

    @property
    def exact(self) -> bool:
        return self.residual == 0.0

    def at(self, n: int) -> float:
        """P(S >= n); 1 for n <= 1."""
        return 1.0 if n <= 1 else self.tails[n - 1]


class TailRow(BaseModel):
    """One row of a renewal tail report."""

    n: int
    tail_exact: float
    tail_mc: float | None = None
    bound_value: float
    ratio: float


class RenewalReport(BaseModel):
    """Outcome of a renewal tail verification."""

    check: str = Field(..., description="stail, stail_b or stail_exp")
    rows: list[TailRow] = Field(default_factory=list)
    constant: float = Field(..., description="Fitted or observed constant")
    early_constant: float | None = Field(
        default=None, description="Same constant over the early part of the range"
    )
    slope: float | None = None
    r_squared: float | None = None
    passed: bool
    mc_max_deviation: float | None = Field(
        default=None, description="Largest |MC - exact| in standard errors"
    )
    h_constant: float | None = Field(
        default=None, description="max n^beta h(n) over the range, for stail"
    )


class TauSequence(BaseModel):
    """Random block lengths tau_0, tau_1, ..."""

    model_config = ConfigDict(frozen=True)

    taus: tuple[int, ...] = Field(..., min_length=1)
    beta: float = Field(..., gt=1.0)
    c_tau: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def _check_positive(self) -> Self:
        if min(self.taus) < 1:
            raise ValueError("Block lengths must be at least 1")
        return self

    @property
    def ends(self) -> tuple[int, ...]:
        """r_n = tau_0 + ... + tau_n."""
        total = 0
        out = []
        for tau in self.taus:
            total += tau
            out.append(total)
        return tuple(out)


class QvRow(BaseModel):
    """One (statistic, length) entry of a quadratic-variation check."""

    statistic: str
    length: int
    norm: float
    rhs: float
    ratio: float


class QvReport(BaseModel):
    """Norm ratios against the right-hand sides, per sequence length."""

    beta: float
    rows: list[QvRow] = Field(default_factory=list)
    passed: bool
    failed_statistics: list[str] = Field(default_factory=list)
