"""Observables along trajectories and their centered sums."""

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from core.constants import CenteringMethod, ObservableFunction, ObservableKind
from core.exceptions import DomainError, ParameterError, SequenceIndexError
from core.rng import map_blocks
from schemas.density import FloatArray, GridDensity
from schemas.experiment import ObservableSpec
from schemas.sequence import ParameterSequence
from services.density_service import density_from_function, evolve_path, sample_points
from services.lsv_map import apply_array

logger = logging.getLogger(__name__)


def base_function(function: ObservableFunction) -> Callable[[FloatArray], FloatArray]:
    """The catalog function v as a vectorized callable."""
    if function is ObservableFunction.IDENTITY:
        return lambda x: np.asarray(x, dtype=np.float64)
    if function is ObservableFunction.COSINE:
        return lambda x: np.cos(2.0 * np.pi * x)
    if function is ObservableFunction.DIST_HALF:
        return lambda x: np.abs(x - 0.5)
    if function is ObservableFunction.ZERO:
        return lambda x: np.zeros_like(x, dtype=np.float64)
    if function is ObservableFunction.ONE:
        return lambda x: np.ones_like(x, dtype=np.float64)
    raise DomainError(f"Unknown observable {function!r}")


def _weights(obs: ObservableSpec, steps: int) -> FloatArray:
    return np.array([obs.weight(k) for k in range(steps)])


def _check_length(seq: ParameterSequence, n_max: int) -> None:
    # S_n uses T_1, ..., T_{n-1}.
    if n_max < 1:
        raise ParameterError(f"n must be >= 1, got {n_max}")
    if len(seq) < n_max - 1:
        raise SequenceIndexError(n_max - 1, len(seq))


def density_means(
    seq: ParameterSequence, mu: GridDensity, obs: ObservableSpec, n_max: int
) -> FloatArray:
    """E v_k(T_{1,k} x) for k = 0..n_max-1, by evolving mu on its grid."""
    _check_length(seq, n_max)
    v = base_function(obs.function)
    averages = density_from_function(mu.edges, v, normalize=False).values
    weights = _weights(obs, n_max)
    means = np.empty(n_max)
    for k, density in evolve_path(seq, mu, range(n_max)):
        means[k] = weights[k] * float(np.sum(averages * density.masses))
    return means


def _uncentered_sums(
    rng: np.random.Generator,
    size: int,
    seq: ParameterSequence,
    mu: GridDensity,
    v: Callable[[FloatArray], FloatArray],
    weights: FloatArray,
) -> FloatArray:
    """Column sums of v_k(x_k) over one block, k = 0..n_max-1."""
    n_max = weights.size
    x = sample_points(mu, size, rng)
    sums = np.empty(n_max)
    for k in range(n_max):
        sums[k] = weights[k] * float(np.sum(v(x)))
        if k + 1 < n_max:
            x = apply_array(seq.gamma(k + 1), x)
    return sums


def _centered_block(
    rng: np.random.Generator,
    size: int,
    seq: ParameterSequence,
    mu: GridDensity,
    v: Callable[[FloatArray], FloatArray],
    weights: FloatArray,
    means: FloatArray,
    marks: np.ndarray,
) -> tuple[FloatArray, FloatArray]:
    """S_n and max_{k<=n} |S_k| at each mark, one row per sample."""
    n_max = weights.size
    x = sample_points(mu, size, rng)
    running = np.zeros(size)
    peak = np.zeros(size)
    sums = np.empty((size, marks.size))
    peaks = np.empty((size, marks.size))
    column = 0
    for k in range(n_max):
        running += weights[k] * v(x) - means[k]
        np.maximum(peak, np.abs(running), out=peak)
        while column < marks.size and marks[column] == k + 1:
            sums[:, column] = running
            peaks[:, column] = peak
            column += 1
        if k + 1 < n_max:
            x = apply_array(seq.gamma(k + 1), x)
    return sums, peaks


def centered_sums(
    seq: ParameterSequence,
    mu: GridDensity,
    obs: ObservableSpec,
    n_grid: Sequence[int],
    samples: int,
    rng_seed: int,
    centering: CenteringMethod = CenteringMethod.EMPIRICAL,
) -> tuple[np.ndarray, FloatArray, FloatArray]:
    """
    Centered sums S_n = V_n - E V_n and S_n* = max_{k<=n} |S_k| per sample.

    Empirical centering subtracts the mean of the same samples: a first pass
    accumulates E v_k(x_k), a second pass replays the same seeded blocks.

    Returns:
        (marks, sums, peaks) with sums and peaks of shape (samples, len(marks))
    """
    marks = np.unique(np.asarray(n_grid, dtype=np.int64))
    if marks.size == 0:
        raise ParameterError("n_grid is empty")
    n_max = int(marks[-1])
    _check_length(seq, n_max)
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")

    v = base_function(obs.function)
    weights = _weights(obs, n_max)
    if centering is CenteringMethod.DENSITY:
        means = density_means(seq, mu, obs, n_max)
    else:
        totals = map_blocks(
            lambda rng, size: _uncentered_sums(rng, size, seq, mu, v, weights),
            rng_seed,
            samples,
        )
        means = np.sum(totals, axis=0) / samples

    blocks = map_blocks(
        lambda rng, size: _centered_block(rng, size, seq, mu, v, weights, means, marks),
        rng_seed,
        samples,
    )
    sums = np.concatenate([b[0] for b in blocks])
    peaks = np.concatenate([b[1] for b in blocks])
    logger.debug(f"centered_sums: {samples} samples up to n={n_max}")
    return marks, sums, peaks


def statistic_samples(
    obs: ObservableSpec, sums: FloatArray, peaks: FloatArray
) -> FloatArray:
    """|S_n| for birkhoff, S_n* for running_max and weighted_birkhoff."""
    if obs.kind is ObservableKind.BIRKHOFF:
        return np.abs(sums)
    return peaks


def reference_moment_slope(gamma_star: float, p: float) -> float:
    """
    Growth exponent of E(S_n*)^p implied by the moment bounds.

    Below 1/2 the bound holds up to p = 2(1/gamma* - 1) with slope p/2; larger p
    interpolate with |S_n| <= C n. At 1/2 the slope is 1 for p <= 2 (up to a log)
    and p - 1 above. Above 1/2 the tail bound C n t^(-1/gamma*) integrates to
    p gamma* for p < 1/gamma* and p - 1/gamma* + 1 beyond.
    """
    beta = 1.0 / gamma_star
    if math.isclose(gamma_star, 0.5):
        return p / 2.0 if p <= 2.0 else p - 1.0
    if gamma_star < 0.5:
        return p / 2.0 if p <= 2.0 * (beta - 1.0) else p - (beta - 1.0)
    return p * gamma_star if p < beta else p - beta + 1.0
