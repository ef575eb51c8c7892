"""Schemas for first-entry and first-return partitions."""

from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.constants import PartitionKind
from schemas.sequence import ParameterSequence


class PartitionPoints(BaseModel):
    """Strictly decreasing partition points x_1 > x_2 > ... or y_1 > y_2 > ..."""

    model_config = ConfigDict(frozen=True)

    points: tuple[float, ...] = Field(..., min_length=1, description="Partition points")
    kind: PartitionKind = Field(..., description="Entry or return partition")
    seq_ref: ParameterSequence = Field(..., description="Sequence the points belong to")

    @model_validator(mode="after")
    def _check_decreasing(self) -> Self:
        if any(b >= a for a, b in zip(self.points, self.points[1:], strict=False)):
            raise ValueError("Partition points must be strictly decreasing")
        return self

    @property
    def floor(self) -> float:
        """Accumulation point: 0 for entry, 1/2 for return partitions."""
        return 0.0 if self.kind is PartitionKind.ENTRY else 0.5

    def __len__(self) -> int:
        return len(self.points)


class GapViolation(BaseModel):
    """Worst violation of the partition gap inequality."""

    index: int = Field(..., description="n at which the worst gap occurs")
    excess: float = Field(
        ..., description="max over n of gap_n - allowance_n (<= 0 means satisfied)"
    )

    @property
    def satisfied(self) -> bool:
        return self.excess <= 0.0


class DistortionSample(BaseModel):
    """Derivative ratio of T_{1,n} across one partition element."""

    n: int
    ratio: float = Field(..., description="max/min of (T_{1,n})' at the element ends")
