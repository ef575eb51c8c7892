"""Block quadratic variations sigma and omega, their moment checks and lemma oracles."""

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.signal import convolve
from scipy.special import zeta

from core.constants import CoefficientFamily
from core.exceptions import DomainError, ParameterError
from core.rng import map_blocks, seed_stream
from schemas.density import FloatArray
from schemas.renewal import QvReport, QvRow, TauSequence
from utils.fitting import stabilized
from utils.norms import lp_norm, weak_norm

logger = logging.getLogger(__name__)

_LOG_TAU_CEILING = 62 * math.log(2.0)
DEFAULT_LENGTHS = tuple(2**k for k in range(5, 13))
# rows * length handled per vectorized chunk
_CHUNK_ENTRIES = 4_000_000


def coefficient_family(family: CoefficientFamily) -> Callable[[int], FloatArray]:
    """a_0..a_{N-1} for a named family."""
    if family is CoefficientFamily.ONES:
        return lambda n: np.ones(n)
    if family is CoefficientFamily.INVERSE_SQRT:
        return lambda n: 1.0 / np.sqrt(np.arange(1, n + 1, dtype=np.float64))
    if family is CoefficientFamily.SPIKE:
        return lambda n: np.concatenate(([1.0], np.zeros(n - 1)))
    raise DomainError(f"Unknown coefficient family {family!r}")


def _tau_from_uniform(u: FloatArray, c_tau: float, exponent: float) -> np.ndarray:
    # Largest ell with min(1, c ell^-exponent) >= u, and at least 1.
    log_tau = np.minimum((math.log(c_tau) - np.log(u)) / exponent, _LOG_TAU_CEILING)
    return np.maximum(np.floor(np.exp(log_tau)), 1.0).astype(np.int64)


def _tau_matrix(
    rng: np.random.Generator, beta: float, c_tau: float, rows: int, length: int
) -> np.ndarray:
    u = 1.0 - rng.random((rows, length))
    taus = np.empty((rows, length), dtype=np.int64)
    taus[:, 0] = _tau_from_uniform(u[:, 0], c_tau, beta - 1.0)
    taus[:, 1:] = _tau_from_uniform(u[:, 1:], c_tau, beta)
    return taus


def sample_tau_sequence(
    beta: float, c_tau: float, length: int, rng_seed: int
) -> TauSequence:
    """
    Block lengths with P(tau_0 >= ell) = min(1, c_tau ell^(1-beta)) and
    P(tau_n >= ell) = min(1, c_tau ell^-beta) for n >= 1, independent.
    """
    if beta <= 1.0:
        raise ParameterError(f"beta must exceed 1, got {beta}")
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length}")
    taus = _tau_matrix(seed_stream(rng_seed, 0), beta, c_tau, 1, length)[0]
    return TauSequence(taus=tuple(int(t) for t in taus), beta=beta, c_tau=c_tau)


def _forward_correlation(a: FloatArray, beta: float) -> FloatArray:
    """F[r] = sum_{j>=1} a_{r+j-1} j^-beta for r = 0..N, with F[N] = 0."""
    n = a.size
    kernel = np.arange(1, n + 1, dtype=np.float64) ** -beta
    full = convolve(a[::-1], kernel, method="auto")[:n][::-1]
    return np.concatenate((full, [0.0]))


def _block_sums(prefix: FloatArray, taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = prefix.size - 1
    ends = np.cumsum(taus, axis=-1)
    starts = ends - taus
    sums = prefix[np.minimum(ends, n)] - prefix[np.minimum(starts, n)]
    return sums, ends


def _omega_terms(
    a: FloatArray, forward: FloatArray, taus: np.ndarray, ends: np.ndarray, beta: float
) -> np.ndarray:
    """Per-block inner sums of omega, shape of taus."""
    n = a.size
    # For j >= tau the weight is tau j^-beta; below it j^(1-beta).
    base = taus * forward[np.minimum(ends, n)]
    counts = np.clip(np.minimum(taus - 1, n - ends), 0, None).ravel()
    total = int(counts.sum())
    if total == 0:
        return base.astype(np.float64)
    block = np.repeat(np.arange(counts.size), counts)
    first = np.cumsum(counts) - counts
    j = (np.arange(total) - first[block] + 1).astype(np.float64)
    positions = ends.ravel()[block] + j.astype(np.int64) - 1
    weights = j ** (1.0 - beta) - taus.ravel()[block] * j**-beta
    correction = np.bincount(block, weights=a[positions] * weights, minlength=counts.size)
    return base + correction.reshape(taus.shape)


def _prepare(a: ArrayLike) -> FloatArray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1 or np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise DomainError("Coefficients must be a finite nonnegative 1-d sequence")
    return arr


def sigma_omega(a: ArrayLike, taus: TauSequence, beta: float) -> tuple[float, float]:
    """
    sigma = sum_n (a_{r_{n-1}} + ... + a_{r_n - 1})^2 and
    omega = sum_n (sum_{j>=1} a_{r_n+j-1} min(tau_n j^-beta, j^(1-beta)))^2,
    with r_{-1} = 0 and r_n = tau_0 + ... + tau_n.

    Raises:
        ParameterError: if the blocks end before the support of a
    """
    arr = _prepare(a)
    n = arr.size
    if n == 0:
        return 0.0, 0.0
    lengths = np.minimum(np.asarray(taus.taus, dtype=np.int64), n + 1)
    if int(lengths.sum()) < n:
        raise ParameterError(
            f"Block lengths cover {int(lengths.sum())} indices, a has {n}",
            {"covered": int(lengths.sum()), "support": n},
        )
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    sums, ends = _block_sums(prefix, lengths)
    terms = _omega_terms(arr, _forward_correlation(arr, beta), lengths, ends, beta)
    return float(np.sum(sums**2)), float(np.sum(terms**2))


def martingale_from_blocks(
    a: ArrayLike, taus: TauSequence, rng: np.random.Generator
) -> FloatArray:
    """
    A_n = sum_{j<=n} I_j (block sum j) with independent fair signs I_j.

    Its quadratic variation is sigma.
    """
    arr = _prepare(a)
    lengths = np.minimum(np.asarray(taus.taus, dtype=np.int64), arr.size + 1)
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    sums, _ = _block_sums(prefix, lengths)
    signs = rng.choice(np.array([-1.0, 1.0]), size=sums.size)
    return np.cumsum(signs * sums)


def _draw_variations(
    rng: np.random.Generator,
    size: int,
    a: FloatArray,
    beta: float,
    c_tau: float,
    with_martingale: bool,
) -> np.ndarray:
    """Columns sigma, omega and max_n |A_n| for size independent tau draws."""
    n = a.size
    prefix = np.concatenate(([0.0], np.cumsum(a)))
    forward = _forward_correlation(a, beta)
    out = np.zeros((size, 3))
    chunk = max(1, _CHUNK_ENTRIES // (n + 1))
    for start in range(0, size, chunk):
        rows = min(chunk, size - start)
        taus = np.minimum(_tau_matrix(rng, beta, c_tau, rows, n + 1), n + 1)
        sums, ends = _block_sums(prefix, taus)
        out[start : start + rows, 0] = np.sum(sums**2, axis=1)
        terms = _omega_terms(a, forward, taus, ends, beta)
        out[start : start + rows, 1] = np.sum(terms**2, axis=1)
        if with_martingale:
            signs = rng.choice(np.array([-1.0, 1.0]), size=sums.shape)
            path = np.cumsum(signs * sums, axis=1)
            out[start : start + rows, 2] = np.max(np.abs(path), axis=1)
    return out


def _norm_plan(beta: float, p_extra: float) -> list[tuple[str, str, float]]:
    """(statistic, variable, exponent) with exponent -p meaning weak-L^p."""
    if beta < 2.0:
        return [("sigma", "sigma", -beta), ("omega", "omega", beta)]
    if beta == 2.0:
        return [
            ("sigma", "sigma", 2.0),
            ("sigma_p", "sigma", p_extra),
            ("omega", "omega", 2.0),
        ]
    return [("sigma", "sigma", 2.0 * (beta - 1.0)), ("omega", "omega", math.inf)]


def _right_hand_side(statistic: str, a: FloatArray, beta: float, p: float) -> float:
    n = np.arange(a.size, dtype=np.float64)
    tail = a[1:]
    if statistic == "omega":
        if beta <= 2.0:
            return float(np.sum(tail**beta)) ** (1.0 / beta)
        return math.sqrt(float(np.sum(tail**2)))
    if beta < 2.0:
        return float(np.sum(a**beta)) ** (1.0 / beta)
    if beta == 2.0:
        log_weighted = math.sqrt(float(np.sum(a**2 * (1.0 + np.log(n + 1.0)))))
        if statistic == "sigma_p":
            squares, total = float(np.sum(a**2)), float(np.sum(a))
            return log_weighted + squares ** (1.0 / p) * total ** (1.0 - 2.0 / p)
        return log_weighted
    return math.sqrt(float(np.sum(a**2)))


def _ratio(norm: float, rhs: float) -> float:
    if rhs > 0.0:
        return norm / rhs
    return 0.0 if norm == 0.0 else math.inf


def qv_moment_check(
    beta: float,
    a_family: Callable[[int], FloatArray],
    n_samples: int,
    rng_seed: int,
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    c_tau: float = 1.0,
    p_extra: float = 4.0,
    burkholder: bool = False,
    factor: float = 1.1,
) -> QvReport:
    """
    Norms of sigma^(1/2) and omega^(1/2) against their right-hand sides.

    sigma^(1/2) uses weak-L^beta for beta < 2, L^2 with the log weight (and
    L^p_extra) at beta = 2, and L^(2(beta-1)) above; omega^(1/2) uses L^beta
    for beta <= 2 and the sample maximum above. A statistic passes when its
    largest ratio is within `factor` of its largest ratio over the lengths
    below the last decade.
    """
    if beta <= 1.0:
        raise ParameterError(f"beta must exceed 1, got {beta}")
    if n_samples < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n_samples}")
    sizes = sorted({int(n) for n in lengths})
    if not sizes or sizes[0] < 1:
        raise ParameterError("lengths must be positive integers")

    plan = _norm_plan(beta, p_extra)
    rows: list[QvRow] = []
    for index, n in enumerate(sizes):
        a = _prepare(a_family(n))

        def worker(rng: np.random.Generator, size: int, a: FloatArray = a) -> np.ndarray:
            return _draw_variations(rng, size, a, beta, c_tau, burkholder)

        draws = np.concatenate(map_blocks(worker, rng_seed, n_samples, offset=index << 32))
        roots = {"sigma": np.sqrt(draws[:, 0]), "omega": np.sqrt(draws[:, 1])}
        for statistic, variable, exponent in plan:
            if exponent < 0.0:
                norm = weak_norm(roots[variable], -exponent)
            else:
                norm = lp_norm(roots[variable], exponent)
            rhs = _right_hand_side(statistic, a, beta, abs(exponent))
            rows.append(
                QvRow(statistic=statistic, length=n, norm=norm, rhs=rhs, ratio=_ratio(norm, rhs))
            )
        if burkholder:
            p = abs(plan[0][2])
            sigma_norm = lp_norm(roots["sigma"], p)
            max_norm = lp_norm(draws[:, 2], p)
            rows.append(
                QvRow(
                    statistic="burkholder",
                    length=n,
                    norm=max_norm,
                    rhs=sigma_norm,
                    ratio=_ratio(max_norm, sigma_norm),
                )
            )
        logger.debug(f"qv_moment_check: beta={beta}, N={n} done")

    early = sum(1 for n in sizes if n * 10 <= sizes[-1]) or 1
    failed = []
    for statistic, _, _ in plan:
        ratios = [r.ratio for r in rows if r.statistic == statistic]
        ok, early_max, overall = stabilized(ratios, early, factor)
        if not ok:
            failed.append(statistic)
            logger.warning(
                f"qv_moment_check: {statistic} ratio grows from {early_max:.4g} "
                f"to {overall:.4g}"
            )
    return QvReport(beta=beta, rows=rows, passed=not failed, failed_statistics=failed)


def lemma_fun_oracle(
    a: ArrayLike, w: ArrayLike, beta: float, tail_constant: float = 1.0
) -> tuple[float, float]:
    """
    LHS = sum_{n in Z} sum_{k>=0} w_k (a_{n-k} + ... + a_{n+k})^(2(beta-1)) and
    RHS base (sum a_n^2)^(beta-1), for a supported on 0..N-1.

    Raises:
        ParameterError: if beta <= 2, w has a negative entry, or
            sum_{k>=n} w_k > tail_constant n^-beta for some n >= 1
    """
    if beta <= 2.0:
        raise ParameterError(f"beta must exceed 2, got {beta}")
    arr = np.asarray(a, dtype=np.float64)
    weights = np.asarray(w, dtype=np.float64)
    if np.any(weights < 0.0):
        raise ParameterError("Weights must be nonnegative")
    tails = np.cumsum(weights[::-1])[::-1]
    ks = np.arange(1, weights.size, dtype=np.float64)
    allowed = tail_constant * ks**-beta
    if np.any(tails[1:] > allowed * (1.0 + 1e-12)):
        worst = int(np.argmax(tails[1:] / allowed)) + 1
        raise ParameterError(
            f"Weight tail at n={worst} exceeds {tail_constant} n^-{beta}",
            {"n": worst, "tail": float(tails[worst])},
        )

    exponent = 2.0 * (beta - 1.0)
    n = arr.size
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    lhs = 0.0
    for k, weight in enumerate(weights):
        if weight == 0.0:
            continue
        centres = np.arange(-k, n + k)
        lo = np.clip(centres - k, 0, n)
        hi = np.clip(centres + k + 1, 0, n)
        lhs += weight * float(np.sum(np.abs(prefix[hi] - prefix[lo]) ** exponent))
    rhs = float(np.sum(arr**2)) ** (beta - 1.0)
    return lhs, rhs


def lemma_fun2_oracle(a: ArrayLike) -> tuple[float, float]:
    """
    LHS = sum_{n>=1} sum_{k>=1} k^-3 (a_n + ... + a_{n+k-1})^2 and
    RHS base sum_n a_n^2 (1 + log n), with a_1 stored first.

    Windows that reach past the support keep a constant sum, so their
    remaining k are summed exactly with the Hurwitz zeta function.
    """
    arr = _prepare(a)
    n = arr.size
    if n == 0:
        return 0.0, 0.0
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    lhs = 0.0
    for k in range(1, n + 1):
        windows = prefix[k:] - prefix[: n - k + 1]
        lhs += float(np.sum(windows**2)) / k**3
    suffix = prefix[n] - prefix[:n]
    starts = np.arange(1, n + 1)
    lhs += float(np.sum(suffix**2 * zeta(3.0, n - starts + 2.0)))
    rhs = float(np.sum(arr**2 * (1.0 + np.log(starts))))
    return lhs, rhs
