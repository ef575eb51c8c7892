"""Rate experiments: memory loss, moment growth, heavy tails and deviations."""

import logging
import math
from collections.abc import Sequence

import numpy as np

from core.constants import CenteringMethod, ObservableKind
from core.exceptions import DegenerateFitError, GridMismatchError, ParameterError
from schemas.density import GridDensity
from schemas.experiment import ExperimentReport, FitResult, ObservableSpec, SeriesPoint
from schemas.sequence import ParameterSequence
from services.density_service import evolve_path, tv_distance
from services.observables import centered_sums, reference_moment_slope, statistic_samples
from utils.fitting import slope_fit, window_mask

logger = logging.getLogger(__name__)


def _fit_series(
    xs: np.ndarray, ys: np.ndarray, window: tuple[float, float] | None, label: str
) -> tuple[FitResult | None, bool]:
    mask = window_mask(xs, window)
    try:
        return slope_fit(xs[mask], ys[mask]), False
    except DegenerateFitError as e:
        logger.warning(f"{label}: fit flagged ({e.message})")
        return None, True


def _default_window(marks: np.ndarray) -> tuple[float, float]:
    # Drop the first decade of n as transient when the range allows it.
    lo, hi = float(marks[0]), float(marks[-1])
    start = lo * 10.0
    if np.count_nonzero((marks >= start) & (marks <= hi)) >= 3:
        return start, hi
    return lo, hi


def _report(
    statistic: str,
    xs: np.ndarray,
    ys: np.ndarray,
    window: tuple[float, float] | None,
    reference: float | None,
    seed: int | None,
) -> ExperimentReport:
    fit, flagged = _fit_series(xs, ys, window, statistic)
    return ExperimentReport(
        statistic=statistic,
        series=[SeriesPoint(n=float(x), value=float(y)) for x, y in zip(xs, ys, strict=True)],
        fit=fit,
        fit_window=window,
        reference_slope=reference,
        flagged=flagged,
        seed=seed,
    )


def memory_loss_experiment(
    seq: ParameterSequence,
    f: GridDensity,
    g: GridDensity,
    n_grid: Sequence[int],
    fit_window: tuple[float, float] | None = None,
) -> ExperimentReport:
    """
    Total variation between (T_{1,n})_* f and (T_{1,n})_* g along n_grid,
    with a log-log fit over fit_window (default: all of n_grid).
    """
    if not f.same_grid(g):
        raise GridMismatchError("memory_loss_experiment needs densities on one grid")
    marks = sorted({int(n) for n in n_grid})
    if not marks or marks[0] < 1:
        raise ParameterError("n_grid must hold positive step counts")

    tvs = []
    for (n, fn), (_, gn) in zip(
        evolve_path(seq, f, marks), evolve_path(seq, g, marks), strict=True
    ):
        tvs.append(tv_distance(fn, gn))
        logger.debug(f"memory loss: n={n}, tv={tvs[-1]:.3e}")

    xs = np.array(marks, dtype=np.float64)
    return _report("tv", xs, np.array(tvs), fit_window, None, None)


def moments_experiment(
    seq: ParameterSequence,
    mu: GridDensity,
    obs: ObservableSpec,
    p_list: Sequence[float],
    n_grid: Sequence[int],
    samples: int,
    rng_seed: int,
    fit_window: tuple[float, float] | None = None,
    centering: CenteringMethod = CenteringMethod.EMPIRICAL,
) -> list[ExperimentReport]:
    """
    E|S_n|^p (birkhoff) or E(S_n*)^p (running max) along n_grid, one report per p,
    followed by a report of the standardized mean of S_n.

    The last report's values are mean(S_n) / standard error, which should stay
    within 4 in absolute value when the centering is right.
    """
    if not p_list or min(p_list) <= 0.0:
        raise ParameterError("p_list must hold positive exponents")
    marks, sums, peaks = centered_sums(
        seq, mu, obs, n_grid, samples, rng_seed, centering
    )
    values = statistic_samples(obs, sums, peaks)
    window = fit_window or _default_window(marks)
    xs = marks.astype(np.float64)
    name = "E|S_n|" if obs.kind is ObservableKind.BIRKHOFF else "E(S_n*)"

    reports = []
    for p in p_list:
        moment = np.mean(values**p, axis=0)
        reference = reference_moment_slope(seq.gamma_star, p)
        reports.append(_report(f"{name}^{p:g}", xs, moment, window, reference, rng_seed))
        fit = reports[-1].fit
        if fit is not None:
            logger.info(
                f"moments p={p:g}: slope {fit.slope:.3f} (reference {reference:.3f})"
            )

    spread = sums.std(axis=0)
    stderr = np.where(spread > 0.0, spread / math.sqrt(samples), 1.0)
    z = np.where(spread > 0.0, sums.mean(axis=0) / stderr, 0.0)
    reports.append(
        ExperimentReport(
            statistic="mean_z",
            series=[SeriesPoint(n=float(x), value=float(v)) for x, v in zip(xs, z, strict=True)],
            seed=rng_seed,
        )
    )
    return reports


def _central_decade(ts: np.ndarray) -> tuple[float, float]:
    centre = math.sqrt(float(ts[0]) * float(ts[-1]))
    return centre / math.sqrt(10.0), centre * math.sqrt(10.0)


def tail_experiment(
    seq: ParameterSequence,
    mu: GridDensity,
    obs: ObservableSpec,
    n: int,
    t_grid: Sequence[float],
    samples: int,
    rng_seed: int,
    fit_window: tuple[float, float] | None = None,
) -> ExperimentReport:
    """
    Empirical P(S_n* >= t) over t_grid, with a log-log fit over the central
    decade of t_grid unless fit_window is given.

    Raises:
        ParameterError: unless 1/2 < gamma* < 1
    """
    if not 0.5 < seq.gamma_star < 1.0:
        raise ParameterError(
            f"Tail experiments need gamma* in (1/2, 1), got {seq.gamma_star}"
        )
    ts = np.unique(np.asarray(t_grid, dtype=np.float64))
    if ts.size == 0 or ts[0] <= 0.0:
        raise ParameterError("t_grid must hold positive thresholds")
    _, sums, peaks = centered_sums(seq, mu, obs, [n], samples, rng_seed)
    stat = np.sort(statistic_samples(obs, sums, peaks)[:, 0])
    tails = (stat.size - np.searchsorted(stat, ts, side="left")) / stat.size
    window = fit_window or _central_decade(ts)
    return _report("P(S_n*>=t)", ts, tails, window, -1.0 / seq.gamma_star, rng_seed)


def deviation_exponents(gamma_star: float, tau_exponent: float) -> tuple[float, float]:
    """
    Decay exponents in n of the large and moderate deviation bounds
    mu{|S_n/n| >= eps} and mu{|S_n/n^tau| >= eps}, as slopes.
    """
    beta = 1.0 / gamma_star
    if math.isclose(gamma_star, 0.5):
        return -1.0, -(2.0 * tau_exponent - 1.0)
    if gamma_star < 0.5:
        return -(beta - 1.0), -(2.0 * tau_exponent - 1.0) * (beta - 1.0)
    return -(beta - 1.0), -(tau_exponent * beta - 1.0)


def deviation_check(
    seq: ParameterSequence,
    mu: GridDensity,
    obs: ObservableSpec,
    n_grid: Sequence[int],
    samples: int,
    rng_seed: int,
    epsilon: float,
    tau_exponent: float,
    fit_window: tuple[float, float] | None = None,
    centering: CenteringMethod = CenteringMethod.EMPIRICAL,
) -> list[ExperimentReport]:
    """
    Large and moderate deviation probabilities along n_grid, each fitted in
    log-log against its reference exponent.
    """
    if epsilon <= 0.0 or tau_exponent <= 0.0:
        raise ParameterError("epsilon and tau_exponent must be positive")
    marks, sums, _ = centered_sums(seq, mu, obs, n_grid, samples, rng_seed, centering)
    xs = marks.astype(np.float64)
    large = np.mean(np.abs(sums / xs) >= epsilon, axis=0)
    moderate = np.mean(np.abs(sums / xs**tau_exponent) >= epsilon, axis=0)
    ld_ref, md_ref = deviation_exponents(seq.gamma_star, tau_exponent)
    window = fit_window or _default_window(marks)
    return [
        _report("large_deviation", xs, large, window, ld_ref, rng_seed),
        _report("moderate_deviation", xs, moderate, window, md_ref, rng_seed),
    ]
