"""Run orchestration: build inputs from a RunConfig, run it, write artifacts."""

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from core.constants import (
    AssertionMetric,
    ExitCode,
    ExperimentKind,
    InitialDensityKind,
    RenewalCheck,
    TailRule,
)
from core.exceptions import ConfigError, ConfigRangeError, LabError, OutputError
from schemas.density import FloatArray, GridDensity, TailFunction
from schemas.experiment import ExperimentReport
from schemas.renewal import RenewalSpec
from schemas.run_config import (
    Assertion,
    AssertionResult,
    ConstantSequenceSpec,
    CounterexampleExperiment,
    DensityExperiment,
    DensitySpec,
    DeviationsExperiment,
    ExplicitSequenceSpec,
    GridSpec,
    MemoryLossExperiment,
    MomentsExperiment,
    PartitionExperiment,
    QvCheckExperiment,
    RenewalTailsExperiment,
    RunConfig,
    RunSummary,
    SequenceSpec,
    StatisticSummary,
    TailFunctionSpec,
    TailsExperiment,
)
from schemas.sequence import ParameterSequence
from services.counterexample import markov_counterexample
from services.density_service import (
    build_grid,
    cone_check,
    evolve_path,
    initial_density,
)
from services.experiment_service import (
    deviation_check,
    memory_loss_experiment,
    moments_experiment,
    tail_experiment,
)
from services.lsv_map import parameter_curve, quasistatic_sequence
from services.partition_service import (
    cone_tail,
    distortion_samples,
    entry_partition,
    gap_violation,
    return_partition,
)
from services.quadratic_variation import (
    coefficient_family,
    lemma_fun2_oracle,
    qv_moment_check,
)
from services.renewal_service import verify_stail, verify_stail_b, verify_stail_exp
from utils.csv_io import Cell, write_density, write_series, write_summary
from utils.fitting import stabilized

logger = logging.getLogger(__name__)

# Column order per subcommand; a header row is always written.
CSV_COLUMNS: dict[ExperimentKind, tuple[str, ...]] = {
    ExperimentKind.PARTITION: ("n", "x", "y", "cone_tail", "distortion"),
    ExperimentKind.DENSITY: ("n", "mass", "cone_violation"),
    ExperimentKind.MEMORY_LOSS: ("n", "tv"),
    ExperimentKind.MOMENTS: ("statistic", "n", "value"),
    ExperimentKind.TAILS: ("t", "tail"),
    ExperimentKind.DEVIATIONS: ("statistic", "n", "value"),
    ExperimentKind.COUNTEREXAMPLE: ("n", "min_abs_sum", "max_abs_sum", "exact_paths"),
    ExperimentKind.RENEWAL_TAILS: ("n", "tail_exact", "tail_mc", "bound", "ratio"),
    ExperimentKind.QV_CHECK: ("statistic", "length", "norm", "rhs", "ratio"),
}

SUMMARY_FILE = "summary.json"
DENSITY_FILE = "density.csv"

# Largest |MC - exact| accepted, in standard errors
MC_AGREEMENT = 4.0


@dataclass
class Outcome:
    """Rows and per-statistic summaries produced by one experiment."""

    rows: list[Sequence[Cell]] = field(default_factory=list)
    statistics: dict[str, StatisticSummary] = field(default_factory=dict)


# Inputs


def _read_gammas(path: Path) -> tuple[float, ...]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read sequence file {path} ({e.strerror})") from e
    try:
        if text.lstrip().startswith("["):
            return tuple(float(g) for g in json.loads(text))
        return tuple(float(line) for line in text.split() if line)
    except (ValueError, TypeError) as e:
        raise ConfigRangeError(
            f"Sequence file {path} is not a list of numbers", ["sequence.path"]
        ) from e


def build_sequence(spec: SequenceSpec, needed: int) -> ParameterSequence:
    """
    The parameter sequence a config describes, long enough for `needed` maps.

    Raises:
        ConfigRangeError: if the sequence is invalid or too short
    """
    try:
        if isinstance(spec, ConstantSequenceSpec):
            length = spec.length or max(needed, 1)
            seq = ParameterSequence.constant(spec.gamma, length, spec.gamma_star)
        elif isinstance(spec, ExplicitSequenceSpec):
            gammas = spec.gammas
            if gammas is None and spec.path is not None:
                gammas = _read_gammas(spec.path)
            seq = ParameterSequence(gammas=gammas, gamma_star=spec.gamma_star)
        else:
            curve = parameter_curve(spec.curve, **spec.params)
            seq = quasistatic_sequence(curve, spec.level, spec.gamma_star)
    except KeyError as e:
        raise ConfigRangeError(f"Curve parameter {e} is missing", ["sequence.params"]) from e
    except ValidationError as e:
        raise ConfigRangeError(f"Invalid sequence: {e}", ["sequence"]) from e
    except LabError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigRangeError(f"Invalid sequence: {e.message}", ["sequence"]) from e
    if len(seq) < needed:
        raise ConfigRangeError(
            f"Sequence has {len(seq)} maps, the experiment needs {needed}", ["sequence"]
        )
    return seq


def build_edges(grid: GridSpec) -> FloatArray:
    return build_grid(grid.size, grid.geometric_cells, grid.min_edge, grid.geometric_top)


def build_density(spec: DensitySpec, edges: FloatArray, seq: ParameterSequence) -> GridDensity:
    gamma = spec.gamma
    if spec.kind is InitialDensityKind.INVARIANT and gamma is None:
        gamma = seq.gamma(1)
    return initial_density(spec.kind, edges, gamma=gamma, tol=spec.tol, exponent=spec.exponent)


def build_tail(spec: TailFunctionSpec) -> TailFunction:
    if spec.rule is TailRule.POWER:
        return TailFunction.power_law(spec.exponent, spec.constant, spec.length)
    if spec.rule is TailRule.STRETCHED_EXP:
        return TailFunction.stretched_exponential(
            spec.rate, spec.exponent, spec.constant, spec.length
        )
    return TailFunction.zero()


def build_renewal_spec(exp: RenewalTailsExperiment) -> RenewalSpec:
    try:
        return RenewalSpec(
            theta=exp.theta,
            n0=exp.n0,
            r_hat=build_tail(exp.r_hat),
            h=TailFunction.zero() if exp.h is None else build_tail(exp.h),
            h_rule=exp.h_rule,
            c_h=exp.c_h,
            value_cap=exp.value_cap,
        )
    except ValidationError as e:
        raise ConfigRangeError(f"Invalid renewal spec: {e}", ["experiment.r_hat"]) from e


def _needed_maps(config: RunConfig) -> int:
    exp = config.experiment
    if isinstance(exp, PartitionExperiment):
        return exp.count
    if isinstance(exp, DensityExperiment):
        return max(exp.checkpoints)
    if isinstance(exp, MemoryLossExperiment):
        return max(exp.n_grid)
    if isinstance(exp, MomentsExperiment | DeviationsExperiment):
        return max(exp.n_grid) - 1
    if isinstance(exp, TailsExperiment):
        return exp.n - 1
    return 0


# Summaries


def _report_summary(report: ExperimentReport, passed: bool | None = None) -> StatisticSummary:
    values = report.values
    return StatisticSummary(
        slope=None if report.fit is None else report.fit.slope,
        r_squared=None if report.fit is None else report.fit.r_squared,
        max_value=float(np.max(values)) if values.size else None,
        passed=passed,
        reference_slope=report.reference_slope,
        flagged=report.flagged,
    )


def _long_rows(reports: list[ExperimentReport]) -> list[Sequence[Cell]]:
    return [(r.statistic, p.n, p.value) for r in reports for p in r.series]


# Experiments


def _run_partition(
    config: RunConfig, exp: PartitionExperiment, seq: ParameterSequence
) -> Outcome:
    entry = entry_partition(seq, exp.count)
    ret = return_partition(seq, exp.count)
    entry_gap = gap_violation(entry)
    return_gap = gap_violation(ret)
    tails: list[float | None] = [None] * exp.count
    if exp.density is not None:
        density = build_density(exp.density, build_edges(config.grid), seq)
        tails = list(cone_tail(density, entry, ret, exp.count))
    ratios = {s.n: s.ratio for s in distortion_samples(entry, exp.count - 1)}
    rows: list[Sequence[Cell]] = [
        (n, entry.points[n - 1], ret.points[n - 1], tails[n - 1], ratios.get(n))
        for n in range(1, exp.count + 1)
    ]
    stats = {
        "entry_gap": StatisticSummary(
            max_value=entry_gap.excess, passed=entry_gap.excess <= exp.gap_tolerance
        ),
        "return_gap": StatisticSummary(
            max_value=return_gap.excess, passed=return_gap.excess <= exp.gap_tolerance
        ),
    }
    if ratios:
        stats["distortion"] = StatisticSummary(max_value=max(ratios.values()))
    return Outcome(rows, stats)


def _run_density(
    config: RunConfig, exp: DensityExperiment, seq: ParameterSequence
) -> Outcome:
    edges = build_edges(config.grid)
    f = build_density(exp.initial, edges, seq)
    rows: list[Sequence[Cell]] = []
    mass_excess = 0.0
    worst_cone = 0.0
    last = f
    for n, density in evolve_path(seq, f, exp.checkpoints):
        mass = density.total_mass
        mass_excess = max(mass_excess, abs(mass - f.total_mass) / max(n, 1))
        violation = cone_check(
            density, seq.gamma_star, exp.cone_a, exp.cone_tolerance
        ).worst_violation
        worst_cone = max(worst_cone, violation)
        rows.append((n, mass, violation))
        last = density
    if exp.write_density:
        write_density(config.output_dir / DENSITY_FILE, last)
    return Outcome(
        rows,
        {
            "mass": StatisticSummary(
                max_value=mass_excess, passed=mass_excess <= exp.mass_tolerance
            ),
            "cone": StatisticSummary(
                max_value=worst_cone, passed=worst_cone <= exp.cone_tolerance
            ),
        },
    )


def _run_memory_loss(
    config: RunConfig, exp: MemoryLossExperiment, seq: ParameterSequence
) -> Outcome:
    edges = build_edges(config.grid)
    f = build_density(exp.f, edges, seq)
    g = build_density(exp.g, edges, seq)
    report = memory_loss_experiment(seq, f, g, exp.n_grid, exp.fit_window)
    tv = report.values
    # Pushforward is an L1 contraction.
    nonincreasing = bool(np.all(np.diff(tv) <= 1e-14))
    return Outcome(
        [(int(p.n), p.value) for p in report.series],
        {"tv": _report_summary(report, nonincreasing)},
    )


def _run_moments(
    config: RunConfig, exp: MomentsExperiment, seq: ParameterSequence
) -> Outcome:
    mu = build_density(exp.initial, build_edges(config.grid), seq)
    reports = moments_experiment(
        seq, mu, exp.observable, exp.p_list, exp.n_grid, exp.samples, config.seed,
        exp.fit_window, exp.centering,
    )
    stats = {}
    for report in reports:
        if report.statistic == "mean_z":
            z = float(np.max(np.abs(report.values)))
            stats["mean_z"] = StatisticSummary(max_value=z, passed=z <= 4.0)
        else:
            stats[report.statistic] = _report_summary(report)
    return Outcome(_long_rows(reports), stats)


def _run_tails(
    config: RunConfig, exp: TailsExperiment, seq: ParameterSequence
) -> Outcome:
    mu = build_density(exp.initial, build_edges(config.grid), seq)
    report = tail_experiment(
        seq, mu, exp.observable, exp.n, exp.t_grid, exp.samples, config.seed, exp.fit_window
    )
    return Outcome(
        [(p.n, p.value) for p in report.series],
        {report.statistic: _report_summary(report)},
    )


def _run_deviations(
    config: RunConfig, exp: DeviationsExperiment, seq: ParameterSequence
) -> Outcome:
    mu = build_density(exp.initial, build_edges(config.grid), seq)
    reports = deviation_check(
        seq, mu, exp.observable, exp.n_grid, exp.samples, config.seed,
        exp.epsilon, exp.tau_exponent, exp.fit_window, exp.centering,
    )
    return Outcome(_long_rows(reports), {r.statistic: _report_summary(r) for r in reports})


def _run_counterexample(config: RunConfig, exp: CounterexampleExperiment) -> Outcome:
    trace = markov_counterexample(
        exp.n, exp.initial_law, config.seed, exp.paths, exp.constant_observable
    )
    steps = np.arange(1, exp.n + 1)
    magnitudes = np.abs(trace.sums)
    exact_paths = np.sum(magnitudes == steps[None, :], axis=0)
    rows: list[Sequence[Cell]] = [
        (int(n), int(lo), int(hi), int(k))
        for n, lo, hi, k in zip(
            steps, magnitudes.min(axis=0), magnitudes.max(axis=0), exact_paths, strict=True
        )
    ]
    gap = float(np.max(np.abs(magnitudes - steps[None, :])))
    return Outcome(
        rows, {"counterexample": StatisticSummary(max_value=gap, passed=trace.exact)}
    )


def _run_renewal(config: RunConfig, exp: RenewalTailsExperiment) -> Outcome:
    spec = build_renewal_spec(exp)
    n_range = exp.n_range or list(range(1, exp.n_max + 1))
    common = {"n_range": n_range, "mc_samples": exp.mc_samples, "rng_seed": config.seed}
    if exp.check is RenewalCheck.STAIL:
        report = verify_stail(spec, exp.beta, exp.beta_prime or exp.beta, **common)
    elif exp.check is RenewalCheck.STAIL_B:
        report = verify_stail_b(spec, exp.beta, **common)
    else:
        report = verify_stail_exp(spec, exp.beta, min_r_squared=exp.min_r_squared, **common)

    rows: list[Sequence[Cell]] = [
        (r.n, r.tail_exact, r.tail_mc, r.bound_value, r.ratio) for r in report.rows
    ]
    stats = {
        report.check: StatisticSummary(
            slope=report.slope,
            r_squared=report.r_squared,
            max_value=report.constant,
            passed=report.passed,
        )
    }
    if report.mc_max_deviation is not None:
        stats["mc_agreement"] = StatisticSummary(
            max_value=report.mc_max_deviation,
            passed=report.mc_max_deviation <= MC_AGREEMENT,
        )
    return Outcome(rows, stats)


def _run_qv(config: RunConfig, exp: QvCheckExperiment) -> Outcome:
    report = qv_moment_check(
        exp.beta,
        coefficient_family(exp.a_family),
        exp.n_samples,
        config.seed,
        exp.lengths,
        exp.c_tau,
        exp.p_extra,
        exp.burkholder,
        exp.factor,
    )
    rows: list[Sequence[Cell]] = [
        (r.statistic, r.length, r.norm, r.rhs, r.ratio) for r in report.rows
    ]
    stats = {}
    for statistic in dict.fromkeys(r.statistic for r in report.rows):
        ratios = [r.ratio for r in report.rows if r.statistic == statistic]
        checked = statistic != "burkholder"
        stats[statistic] = StatisticSummary(
            max_value=max(ratios),
            passed=(statistic not in report.failed_statistics) if checked else None,
        )

    if exp.oracle_lengths:
        lengths = sorted(set(exp.oracle_lengths))
        ratios = []
        for n in lengths:
            lhs, rhs = lemma_fun2_oracle(np.ones(n))
            ratios.append(lhs / rhs)
            rows.append(("lemma_fun2", n, lhs, rhs, ratios[-1]))
        ok, _, overall = stabilized(ratios, max(1, len(ratios) - 1), exp.factor)
        stats["lemma_fun2"] = StatisticSummary(max_value=overall, passed=ok)
    return Outcome(rows, stats)


# Assertions


def evaluate_assertion(
    assertion: Assertion, stats: dict[str, StatisticSummary]
) -> AssertionResult:
    """Check one embedded assertion; a missing statistic or value fails it."""
    stat = stats.get(assertion.statistic)
    if stat is None:
        logger.warning(f"Assertion names unknown statistic {assertion.statistic!r}")
        return AssertionResult(assertion=assertion, passed=False)
    if assertion.metric is AssertionMetric.PASSED:
        return AssertionResult(
            assertion=assertion, observed=stat.passed, passed=bool(stat.passed)
        )

    observed = getattr(stat, assertion.metric.value)
    if observed is None or math.isnan(observed):
        return AssertionResult(assertion=assertion, observed=observed, passed=False)
    passed = (assertion.lower is None or observed >= assertion.lower) and (
        assertion.upper is None or observed <= assertion.upper
    )
    return AssertionResult(assertion=assertion, observed=observed, passed=passed)


# Entry points


def execute(config: RunConfig) -> RunSummary:
    """
    Run the configured experiment and write its CSV series and summary.

    Artifacts go to config.output_dir as <kind>.csv and summary.json.

    Raises:
        OutputError: if the artifacts cannot be written
        ConfigError: if the inputs the config names are unusable
        LabError: numerical failures of the experiment
    """
    exp = config.experiment
    seq = None
    if config.sequence is not None:
        seq = build_sequence(config.sequence, _needed_maps(config))
    logger.info(f"Running {config.kind.value} with seed {config.seed}")

    out_dir = config.output_dir
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(
            str(out_dir), f"Cannot create output directory ({e.strerror})"
        ) from e

    outcome: Outcome
    if isinstance(exp, CounterexampleExperiment):
        outcome = _run_counterexample(config, exp)
    elif isinstance(exp, RenewalTailsExperiment):
        outcome = _run_renewal(config, exp)
    elif isinstance(exp, QvCheckExperiment):
        outcome = _run_qv(config, exp)
    else:
        assert seq is not None
        if isinstance(exp, PartitionExperiment):
            outcome = _run_partition(config, exp, seq)
        elif isinstance(exp, DensityExperiment):
            outcome = _run_density(config, exp, seq)
        elif isinstance(exp, MemoryLossExperiment):
            outcome = _run_memory_loss(config, exp, seq)
        elif isinstance(exp, MomentsExperiment):
            outcome = _run_moments(config, exp, seq)
        elif isinstance(exp, TailsExperiment):
            outcome = _run_tails(config, exp, seq)
        else:
            outcome = _run_deviations(config, exp, seq)

    csv_path = write_series(
        out_dir / f"{config.kind.value}.csv", CSV_COLUMNS[config.kind], outcome.rows
    )
    summary = RunSummary(
        kind=config.kind,
        seed=config.seed,
        config_hash=config.config_hash(),
        csv_path=str(csv_path),
        statistics=outcome.statistics,
        assertions=[evaluate_assertion(a, outcome.statistics) for a in config.assertions],
    )
    write_summary(out_dir / SUMMARY_FILE, summary.model_dump(mode="json"))
    for result in summary.assertions:
        if not result.passed:
            logger.warning(
                f"Assertion failed: {result.assertion.statistic} "
                f"{result.assertion.metric.value} = {result.observed}"
            )
    return summary


def run(config: RunConfig) -> ExitCode:
    """Execute a run; OK iff every embedded assertion passes."""
    summary = execute(config)
    return ExitCode.OK if summary.passed else ExitCode.ASSERTION_FAILED


def exit_code_for(error: LabError) -> ExitCode:
    """Exit status for an error raised during a run."""
    if isinstance(error, ConfigError):
        return ExitCode.CONFIG_ERROR
    if isinstance(error, OutputError):
        return ExitCode.OUTPUT_ERROR
    return ExitCode.EXPERIMENT_ERROR
