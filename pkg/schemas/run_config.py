"""Run configuration documents.

A run config names one experiment (the `kind` of its `experiment` section),
the parameter sequence driving it, the grid, the master seed, embedded
assertions and the output directory. Unknown keys are rejected everywhere.
"""

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Self

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    computed_field,
    model_validator,
)

from core.config import settings
from core.constants import (
    AssertionMetric,
    CenteringMethod,
    CoefficientFamily,
    CurveKind,
    ExperimentKind,
    HFamilyRule,
    InitialDensityKind,
    ObservableKind,
    RenewalCheck,
    SequenceGenerator,
    TailRule,
)
from core.exceptions import ConfigParseError, ConfigRangeError
from schemas.experiment import ObservableSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


FitWindow = tuple[float, float]


# Parameter sequences


class ConstantSequenceSpec(_Strict):
    """gamma_k = gamma for every k; sized to the experiment unless length is set."""

    generator: Literal[SequenceGenerator.CONSTANT] = SequenceGenerator.CONSTANT
    gamma: float = Field(..., gt=0.0, lt=1.0)
    gamma_star: float | None = Field(default=None, gt=0.0, lt=1.0)
    length: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_bound(self) -> Self:
        if self.gamma_star is not None and self.gamma > self.gamma_star:
            raise ValueError(f"gamma={self.gamma} exceeds gamma_star={self.gamma_star}")
        return self


class ExplicitSequenceSpec(_Strict):
    """Parameters listed inline or in a file (one per line, or a JSON list)."""

    generator: Literal[SequenceGenerator.EXPLICIT] = SequenceGenerator.EXPLICIT
    gamma_star: float = Field(..., gt=0.0, lt=1.0)
    gammas: tuple[float, ...] | None = None
    path: Path | None = None

    @model_validator(mode="after")
    def _check_source(self) -> Self:
        if (self.gammas is None) == (self.path is None):
            raise ValueError("Give exactly one of gammas and path")
        return self


class QuasistaticSequenceSpec(_Strict):
    """Level `level` of the quasistatic array built from a catalog curve."""

    generator: Literal[SequenceGenerator.QUASISTATIC] = SequenceGenerator.QUASISTATIC
    gamma_star: float = Field(..., gt=0.0, lt=1.0)
    curve: CurveKind
    params: dict[str, float] = Field(default_factory=dict)
    level: int = Field(..., ge=1)


SequenceSpec = Annotated[
    ConstantSequenceSpec | ExplicitSequenceSpec | QuasistaticSequenceSpec,
    Field(discriminator="generator"),
]


# Shared building blocks


class GridSpec(_Strict):
    """Grid overrides; unset fields fall back to process settings."""

    size: int | None = Field(default=None, ge=1024)
    geometric_cells: int | None = Field(default=None, ge=10)
    min_edge: float | None = Field(default=None, gt=0.0)
    geometric_top: float | None = Field(default=None, gt=0.0, lt=0.5)


class DensitySpec(_Strict):
    """A named initial density."""

    kind: InitialDensityKind = InitialDensityKind.UNIFORM
    gamma: float | None = Field(
        default=None, gt=0.0, lt=1.0, description="Map parameter for invariant"
    )
    tol: float = Field(default=1e-8, gt=0.0)
    exponent: float = Field(default=0.5, ge=0.0, lt=1.0, description="For power")


class TailFunctionSpec(_Strict):
    """Tail function from the catalog: min(1, C l^-exponent), stretched exp or zero."""

    rule: TailRule = TailRule.POWER
    exponent: float = Field(default=2.0, ge=0.0)
    rate: float = Field(default=1.0, ge=0.0)
    constant: float = Field(default=1.0, gt=0.0)
    length: int = Field(default=64, ge=1)


class Assertion(_Strict):
    """Bound on one quantity of one report; passed metrics need no bounds."""

    statistic: str = Field(..., description="Report statistic, e.g. tv or E(S_n*)^2")
    metric: AssertionMetric = AssertionMetric.SLOPE
    lower: float | None = None
    upper: float | None = None

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        if self.metric is not AssertionMetric.PASSED:
            if self.lower is None and self.upper is None:
                raise ValueError(f"Assertion on {self.metric.value} needs lower or upper")
            if self.lower is not None and self.upper is not None and self.lower > self.upper:
                raise ValueError(f"lower={self.lower} exceeds upper={self.upper}")
        return self


def _positive_grid(values: list[int]) -> list[int]:
    if not values or min(values) < 1:
        raise ValueError("Step grids must hold positive integers")
    return values


# Experiment sections


class PartitionExperiment(_Strict):
    kind: Literal[ExperimentKind.PARTITION] = ExperimentKind.PARTITION
    count: int = Field(default=64, ge=2)
    density: DensitySpec | None = Field(
        default=None, description="Density whose cone tail is reported"
    )
    gap_tolerance: float = Field(default=1e-12, ge=0.0)


class DensityExperiment(_Strict):
    kind: Literal[ExperimentKind.DENSITY] = ExperimentKind.DENSITY
    initial: DensitySpec = Field(default_factory=DensitySpec)
    checkpoints: list[int] = Field(default_factory=lambda: [1, 10, 100, 1000])
    cone_a: float | None = Field(default=None, gt=0.0)
    cone_tolerance: float = Field(default=1e-6, ge=0.0)
    mass_tolerance: float = Field(default=1e-12, ge=0.0, description="Per step")
    write_density: bool = Field(default=False, description="Also write the last density")

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        if not self.checkpoints or min(self.checkpoints) < 0:
            raise ValueError("checkpoints must be nonnegative")
        return self


class MemoryLossExperiment(_Strict):
    kind: Literal[ExperimentKind.MEMORY_LOSS] = ExperimentKind.MEMORY_LOSS
    f: DensitySpec = Field(default_factory=DensitySpec)
    g: DensitySpec = Field(
        default_factory=lambda: DensitySpec(kind=InitialDensityKind.COSINE_BUMP)
    )
    n_grid: list[int] = Field(default_factory=lambda: [2**k for k in range(6, 13)])
    fit_window: FitWindow | None = None

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        _positive_grid(self.n_grid)
        return self


class MomentsExperiment(_Strict):
    kind: Literal[ExperimentKind.MOMENTS] = ExperimentKind.MOMENTS
    initial: DensitySpec = Field(default_factory=DensitySpec)
    observable: ObservableSpec = Field(default_factory=ObservableSpec)
    p_list: list[float] = Field(default_factory=lambda: [2.0, 4.0])
    n_grid: list[int] = Field(default_factory=lambda: [2**k for k in range(7, 14)])
    samples: int = Field(default=100_000, ge=2)
    fit_window: FitWindow | None = None
    centering: CenteringMethod = CenteringMethod.EMPIRICAL

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        _positive_grid(self.n_grid)
        if not self.p_list or min(self.p_list) <= 0.0:
            raise ValueError("p_list must hold positive exponents")
        return self


class TailsExperiment(_Strict):
    kind: Literal[ExperimentKind.TAILS] = ExperimentKind.TAILS
    initial: DensitySpec = Field(default_factory=DensitySpec)
    observable: ObservableSpec = Field(default_factory=ObservableSpec)
    n: int = Field(default=1000, ge=1)
    t_grid: list[float] = Field(
        default_factory=lambda: [float(t) for t in (10, 20, 50, 100, 200, 500, 1000)]
    )
    samples: int = Field(default=1_000_000, ge=2)
    fit_window: FitWindow | None = None

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        if not self.t_grid or min(self.t_grid) <= 0.0:
            raise ValueError("t_grid must hold positive thresholds")
        return self


class DeviationsExperiment(_Strict):
    kind: Literal[ExperimentKind.DEVIATIONS] = ExperimentKind.DEVIATIONS
    initial: DensitySpec = Field(default_factory=DensitySpec)
    observable: ObservableSpec = Field(
        default_factory=lambda: ObservableSpec(kind=ObservableKind.BIRKHOFF)
    )
    n_grid: list[int] = Field(default_factory=lambda: [2**k for k in range(6, 12)])
    samples: int = Field(default=100_000, ge=2)
    epsilon: float = Field(default=0.1, gt=0.0)
    tau_exponent: float = Field(default=0.75, gt=0.5, le=1.0)
    fit_window: FitWindow | None = None
    centering: CenteringMethod = CenteringMethod.EMPIRICAL

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        _positive_grid(self.n_grid)
        return self


class CounterexampleExperiment(_Strict):
    kind: Literal[ExperimentKind.COUNTEREXAMPLE] = ExperimentKind.COUNTEREXAMPLE
    n: int = Field(default=1000, ge=1)
    paths: int = Field(default=10_000, ge=1)
    initial_law: tuple[float, float, float] = Field(
        default=(0.5, 0.25, 0.25), description="Law of g_0 over (A, B, C)"
    )
    constant_observable: bool = False

    @model_validator(mode="after")
    def _check_law(self) -> Self:
        if min(self.initial_law) < 0.0 or abs(sum(self.initial_law) - 1.0) > 1e-9:
            raise ValueError("initial_law must be a probability vector")
        return self


class RenewalTailsExperiment(_Strict):
    kind: Literal[ExperimentKind.RENEWAL_TAILS] = ExperimentKind.RENEWAL_TAILS
    check: RenewalCheck = RenewalCheck.STAIL
    theta: float = Field(default=0.3, gt=0.0, le=1.0)
    n0: int = Field(default=1, ge=1)
    r_hat: TailFunctionSpec = Field(default_factory=TailFunctionSpec)
    h: TailFunctionSpec | None = Field(
        default_factory=lambda: TailFunctionSpec(exponent=3.0)
    )
    h_rule: HFamilyRule = HFamilyRule.TAIL_SUM
    c_h: float = Field(default=1.0, gt=0.0)
    value_cap: int = Field(default=2048, ge=1)
    beta: float = Field(default=2.0, gt=0.0)
    beta_prime: float | None = Field(default=None, gt=0.0)
    n_max: int = Field(default=2000, ge=2)
    n_range: list[int] | None = Field(
        default=None, description="Reported n; default 1..n_max"
    )
    mc_samples: int = Field(default=0, ge=0)
    min_r_squared: float = Field(default=0.98, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_exponents(self) -> Self:
        if self.check is RenewalCheck.STAIL_EXP and self.beta > 1.0:
            raise ValueError("stail_exp needs beta in (0, 1]")
        if self.beta_prime is not None and self.beta_prime > self.beta:
            raise ValueError("beta_prime must not exceed beta")
        if self.n_range is not None:
            _positive_grid(self.n_range)
        return self


class QvCheckExperiment(_Strict):
    kind: Literal[ExperimentKind.QV_CHECK] = ExperimentKind.QV_CHECK
    beta: float = Field(default=3.0, gt=1.0)
    a_family: CoefficientFamily = CoefficientFamily.ONES
    n_samples: int = Field(default=10_000, ge=1)
    lengths: list[int] = Field(default_factory=lambda: [2**k for k in range(5, 13)])
    c_tau: float = Field(default=1.0, gt=0.0)
    p_extra: float = Field(default=4.0, gt=2.0)
    burkholder: bool = False
    factor: float = Field(default=1.1, ge=1.0)
    oracle_lengths: list[int] = Field(
        default_factory=list, description="Lengths for the deterministic lemma ratios"
    )

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        _positive_grid(self.lengths)
        if self.oracle_lengths:
            _positive_grid(self.oracle_lengths)
        return self


ExperimentSpec = Annotated[
    PartitionExperiment
    | DensityExperiment
    | MemoryLossExperiment
    | MomentsExperiment
    | TailsExperiment
    | DeviationsExperiment
    | CounterexampleExperiment
    | RenewalTailsExperiment
    | QvCheckExperiment,
    Field(discriminator="kind"),
]

_NEEDS_SEQUENCE = {
    ExperimentKind.PARTITION,
    ExperimentKind.DENSITY,
    ExperimentKind.MEMORY_LOSS,
    ExperimentKind.MOMENTS,
    ExperimentKind.TAILS,
    ExperimentKind.DEVIATIONS,
}


class RunConfig(_Strict):
    """One experiment run."""

    experiment: ExperimentSpec
    sequence: SequenceSpec | None = None
    grid: GridSpec = Field(default_factory=GridSpec)
    seed: int = Field(default=0, ge=0, description="Master seed")
    assertions: list[Assertion] = Field(default_factory=list)
    output_dir: Path = Field(default_factory=lambda: settings.output_dir)

    @model_validator(mode="after")
    def _check_sequence(self) -> Self:
        if self.experiment.kind in _NEEDS_SEQUENCE and self.sequence is None:
            raise ValueError(f"{self.experiment.kind.value} needs a sequence section")
        return self

    @property
    def kind(self) -> ExperimentKind:
        return self.experiment.kind

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(
            self.model_dump(mode="json"), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _field_path(loc: tuple[int | str, ...]) -> str:
    return ".".join(str(part) for part in loc)


def parse_config(text: str) -> RunConfig:
    """
    Validate a JSON run config.

    Raises:
        ConfigParseError: malformed JSON, with line and column
        ConfigRangeError: unknown keys or values outside their ranges
    """
    try:
        json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(
            f"Malformed config at line {e.lineno}, column {e.colno}: {e.msg}",
            {"line": e.lineno, "column": e.colno},
        ) from e
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        fields = [_field_path(err["loc"]) for err in e.errors()]
        details = "; ".join(
            f"{_field_path(err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigRangeError(f"Invalid config: {details}", fields) from e


def load_config(path: Path) -> RunConfig:
    """Read and validate a config file."""
    return parse_config(path.read_text(encoding="utf-8"))


class StatisticSummary(BaseModel):
    """Quantities of one reported statistic that assertions can bound."""

    slope: float | None = None
    r_squared: float | None = None
    max_value: float | None = None
    passed: bool | None = None
    reference_slope: float | None = None
    flagged: bool = False


class AssertionResult(BaseModel):
    assertion: Assertion
    observed: float | bool | None = None
    passed: bool


class RunSummary(BaseModel):
    """Summary record written next to the CSV series."""

    kind: ExperimentKind
    seed: int
    config_hash: str
    csv_path: str
    statistics: dict[str, StatisticSummary] = Field(default_factory=dict)
    assertions: list[AssertionResult] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)
