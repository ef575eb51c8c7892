"""Schemas for single maps and parameter sequences."""

from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.constants import SequenceGenerator
from core.exceptions import SequenceIndexError


class LsvMap(BaseModel):
    """One LSV map, identified by its intermittency parameter."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., gt=0.0, lt=1.0, description="Intermittency parameter")


class ParameterSequence(BaseModel):
    """
    Finite sequence of parameters selecting the map at each step.

    Positions are 1-based when composing: position k drives T_k.
    """

    model_config = ConfigDict(frozen=True)

    gammas: tuple[float, ...] = Field(..., description="Parameters gamma_1, gamma_2, ...")
    gamma_star: float = Field(
        ..., gt=0.0, lt=1.0, description="Uniform upper bound on the parameters"
    )
    generator: SequenceGenerator = Field(
        default=SequenceGenerator.EXPLICIT, description="How the sequence was produced"
    )

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        for i, gamma in enumerate(self.gammas, start=1):
            if not 0.0 < gamma <= self.gamma_star:
                raise ValueError(
                    f"gamma_{i} = {gamma} is outside (0, gamma_star={self.gamma_star}]"
                )
        return self

    @classmethod
    def constant(cls, gamma: float, length: int, gamma_star: float | None = None) -> Self:
        """Sequence repeating one parameter."""
        return cls(
            gammas=(gamma,) * length,
            gamma_star=gamma if gamma_star is None else gamma_star,
            generator=SequenceGenerator.CONSTANT,
        )

    @property
    def beta(self) -> float:
        """Rate exponent 1 / gamma_star."""
        return 1.0 / self.gamma_star

    def __len__(self) -> int:
        return len(self.gammas)

    def gamma(self, k: int) -> float:
        """Parameter of T_k (1-based)."""
        if k < 1 or k > len(self.gammas):
            raise SequenceIndexError(k, len(self.gammas))
        return self.gammas[k - 1]

    def map_at(self, k: int) -> LsvMap:
        """The map T_k."""
        return LsvMap(gamma=self.gamma(k))

    def shifted(self, by: int = 1) -> "ParameterSequence":
        """The sequence T_{by+1}, T_{by+2}, ..."""
        return self.model_copy(update={"gammas": self.gammas[by:]})

    def is_constant(self) -> bool:
        return len(set(self.gammas)) <= 1
