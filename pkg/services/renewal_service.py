"""Renewal sums S = X_1 + ... + X_tau: exact tails, sampling and tail checks."""

import logging
import math
from collections.abc import Sequence

import numpy as np

from core.config import settings
from core.constants import HFamilyRule
from core.exceptions import ParameterError, ResourceBudgetError
from core.rng import map_blocks
from schemas.density import FloatArray
from schemas.renewal import RenewalReport, RenewalSpec, RenewalTail, TailRow
from services.tail_functions import tail_sum_table
from utils.fitting import linear_fit, stabilized

logger = logging.getLogger(__name__)

IntArray = np.ndarray


def first_block_tails(spec: RenewalSpec, width: int) -> FloatArray:
    """P(X_1 >= x) for x = 0..width-1."""
    x = np.arange(width)
    out = np.ones(width)
    beyond = x > spec.n0
    out[beyond] = spec.r_hat.evaluate(x[beyond] - spec.n0 + 1)
    return out


def conditional_tails(spec: RenewalSpec, rows: int, width: int) -> FloatArray:
    """
    Matrix of P(X_j >= x | X_{j-1} = k) for k = 0..rows-1, x = 0..width-1.
    """
    out = np.ones((rows, width))
    n0 = spec.n0
    if width <= n0 + 1:
        return out
    ells = np.arange(2, width - n0 + 1)
    if spec.h_rule is HFamilyRule.TAIL_SUM:
        out[:, n0 + 1 :] = tail_sum_table(spec.h, np.arange(rows), ells, spec.c_h)
    else:
        out[:, n0 + 1 :] = spec.h.evaluate(ells)[None, :]
    return out


def _check_budget(states: int, what: str) -> None:
    if states > settings.dp_state_budget:
        raise ResourceBudgetError(
            f"{what} needs {states} states, budget is {settings.dp_state_budget}",
            {"states": states, "budget": settings.dp_state_budget},
        )


def exact_tail_dp(spec: RenewalSpec, n_max: int) -> RenewalTail:
    """
    P(S >= n) for n = 1..n_max by dynamic programming.

    States are (partial sum s < n_max, last block value k), swept in increasing s.
    Mass whose partial sum reaches n_max is absorbed, since it already has
    S >= n_max. Block values above value_cap are not tracked; their mass is kept
    as a residual with a known lower bound on S, which brackets the tails.

    Raises:
        ParameterError: if n_max < 1
        ResourceBudgetError: if n_max * value_cap exceeds settings.dp_state_budget
    """
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")
    _check_budget(n_max * spec.value_cap, "exact_tail_dp")

    n0, cap_value = spec.n0, spec.value_cap
    theta, carry = spec.theta, 1.0 - spec.theta
    cap = min(cap_value, n_max - 1)
    cond = conditional_tails(spec, cap + 1, n_max + 2)

    paths = np.zeros((n_max, cap + 1))
    stop = np.zeros(n_max)
    residual_at = np.zeros(n_max + 1)
    overflow = 0.0

    def deposit(s: int, tails: FloatArray) -> None:
        # tails[x] is the (weighted) probability that the next block is >= x.
        nonlocal overflow
        limit = n_max - s - 1
        top = min(cap_value, limit)
        if top >= n0:
            xs = np.arange(n0, top + 1)
            paths[s + xs, xs] += tails[xs] - tails[xs + 1]
            beyond = tails[top + 1]
        else:
            beyond = tails[0]
        if cap_value >= limit:
            overflow += beyond
        else:
            absorbed = tails[n_max - s]
            overflow += absorbed
            residual_at[s + cap_value + 1] += beyond - absorbed

    deposit(0, first_block_tails(spec, n_max + 2))
    for s in range(n0, n_max):
        row = paths[s, : min(s, cap) + 1]
        mass = row.sum()
        if mass <= 0.0:
            continue
        stop[s] = theta * mass
        if carry > 0.0:
            deposit(s, (carry * row) @ cond[: row.size, : n_max - s + 1])
        if s % 500 == 0:
            logger.debug(f"exact_tail_dp: row {s}/{n_max}, live mass {mass:.3e}")

    stop_suffix = np.concatenate((np.cumsum(stop[::-1])[::-1], [0.0]))
    residual_suffix = np.cumsum(residual_at[::-1])[::-1]
    residual = float(residual_suffix[0])
    ns = np.arange(1, n_max + 1)
    lower = stop_suffix[ns] + overflow + residual_suffix[ns]
    upper = lower + (residual - residual_suffix[ns])
    lower = np.clip(lower, 0.0, 1.0)
    upper = np.clip(upper, 0.0, 1.0)
    if residual > 0.0:
        logger.info(
            f"exact_tail_dp: {residual:.3e} mass above value_cap={cap_value}, "
            "tails are bracketed"
        )
    return RenewalTail(
        n_max=n_max,
        tails=tuple(lower.tolist()),
        upper=tuple(upper.tolist()),
        residual=residual,
    )


def _draw_from_tails(
    tails: FloatArray, rows: IntArray, u: FloatArray, n0: int
) -> IntArray:
    """Largest x with tails[row, x] >= u, by vectorized bisection."""
    lo = np.full(u.shape, n0, dtype=np.int64)
    hi = np.full(u.shape, tails.shape[1] - 1, dtype=np.int64)
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        ok = tails[rows, mid] >= u
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


class RenewalSampler:
    """
    Monte Carlo draws of S, right-censored at horizon.

    Sums above horizon are reported as horizon + 1, so the law of
    min(S, horizon + 1) is exact. Tail tables are built once per sampler.
    """

    def __init__(self, spec: RenewalSpec, horizon: int | None = None):
        self.spec = spec
        self.horizon = horizon or spec.value_cap
        width = self.horizon + 3
        _check_budget((self.horizon + 1) * width, "RenewalSampler")
        first = first_block_tails(spec, width)
        first[-1] = 0.0
        cond = conditional_tails(spec, self.horizon + 1, width)
        cond[:, -1] = 0.0
        self._first = first[None, :]
        self._cond = cond

    def draw(self, rng: np.random.Generator, size: int) -> IntArray:
        n0, horizon = self.spec.n0, self.horizon
        uniforms = 1.0 - rng.random(size)
        total = _draw_from_tails(self._first, np.zeros(size, dtype=np.int64), uniforms, n0)
        last = total.copy()
        remaining = rng.geometric(self.spec.theta, size) - 1
        active = (remaining > 0) & (total <= horizon)
        while active.any():
            idx = np.flatnonzero(active)
            values = _draw_from_tails(self._cond, last[idx], 1.0 - rng.random(idx.size), n0)
            total[idx] += values
            last[idx] = values
            remaining[idx] -= 1
            active[idx] = (remaining[idx] > 0) & (total[idx] <= horizon)
        return np.minimum(total, horizon + 1)

    def sample(self, samples: int, rng_seed: int, stream_offset: int = 0) -> IntArray:
        """samples draws over seeded blocks, concatenated in block order."""
        if samples < 1:
            return np.zeros(0, dtype=np.int64)
        blocks = map_blocks(self.draw, rng_seed, samples, offset=stream_offset)
        return np.concatenate(blocks)


def sample_s(spec: RenewalSpec, rng_seed: int) -> int:
    """One draw of S (censored at value_cap + 1)."""
    return int(RenewalSampler(spec).sample(1, rng_seed)[0])


def sample_s_batch(
    spec: RenewalSpec, samples: int, rng_seed: int, horizon: int | None = None
) -> IntArray:
    return RenewalSampler(spec, horizon).sample(samples, rng_seed)


def empirical_tails(draws: IntArray, n_max: int) -> FloatArray:
    """Fraction of draws with S >= n for n = 1..n_max."""
    counts = np.bincount(np.minimum(draws, n_max + 1), minlength=n_max + 2)
    at_least = np.cumsum(counts[::-1])[::-1]
    return at_least[1 : n_max + 1] / max(draws.size, 1)


def _mc_comparison(
    spec: RenewalSpec, exact: RenewalTail, ns: IntArray, mc_samples: int, rng_seed: int
) -> tuple[FloatArray | None, float | None]:
    if mc_samples <= 0:
        return None, None
    draws = sample_s_batch(spec, mc_samples, rng_seed, horizon=exact.n_max)
    mc = empirical_tails(draws, exact.n_max)[ns - 1]
    p = np.array([exact.at(int(n)) for n in ns])
    stderr = np.sqrt(np.maximum(p * (1.0 - p), 0.0) / mc_samples)
    diff = np.abs(mc - p)
    z = np.where(stderr > 0.0, diff / np.where(stderr > 0.0, stderr, 1.0), 0.0)
    z[(stderr == 0.0) & (diff > 0.0)] = np.inf
    return mc, float(z.max())


def _as_range(n_range: Sequence[int]) -> IntArray:
    ns = np.unique(np.asarray(n_range, dtype=np.int64))
    if ns.size == 0 or ns[0] < 1:
        raise ParameterError("n_range must hold positive integers")
    return ns


def _early_count(size: int) -> int:
    return max(1, (3 * size) // 4)


def verify_stail(
    spec: RenewalSpec,
    beta: float,
    beta_prime: float,
    n_range: Sequence[int],
    mc_samples: int = 0,
    rng_seed: int = 0,
) -> RenewalReport:
    """
    Check P(S >= n) <= C n^-beta_prime for block tails built from h(n) <= C n^-beta.

    Both scaled sequences n^beta h(n) and n^beta_prime P(S >= n) must
    stabilize: the maximum over the whole range stays within 5% of the
    maximum over its first three quarters.
    """
    if not 0.0 < beta_prime <= beta:
        raise ParameterError(
            f"beta_prime={beta_prime} must lie in (0, beta={beta}]",
            {"beta": beta, "beta_prime": beta_prime},
        )
    ns = _as_range(n_range)
    early = _early_count(ns.size)
    h_scaled = spec.h.evaluate(ns) * ns.astype(np.float64) ** beta
    h_bounded, _, h_constant = stabilized(h_scaled, early, 1.05)
    if not h_bounded:
        logger.warning(f"verify_stail: n^{beta} h(n) keeps growing, h is not O(n^-{beta})")
    exact = exact_tail_dp(spec, int(ns[-1]))
    tails = np.array([exact.at(int(n)) for n in ns])
    scaled = tails * ns.astype(np.float64) ** beta_prime
    tail_bounded, early_max, overall = stabilized(scaled, early, 1.05)
    passed = h_bounded and tail_bounded
    mc, deviation = _mc_comparison(spec, exact, ns, mc_samples, rng_seed)

    rows = [
        TailRow(
            n=int(n),
            tail_exact=float(t),
            tail_mc=None if mc is None else float(mc[i]),
            bound_value=float(n) ** -beta_prime,
            ratio=float(scaled[i]),
        )
        for i, (n, t) in enumerate(zip(ns, tails, strict=True))
    ]
    logger.info(
        f"verify_stail: max n^{beta_prime} P(S>=n) = {overall:.4g} "
        f"(early {early_max:.4g}), passed={passed}"
    )
    return RenewalReport(
        check="stail",
        rows=rows,
        constant=overall,
        early_constant=early_max,
        passed=passed,
        mc_max_deviation=deviation,
        h_constant=h_constant,
    )


def verify_stail_b(
    spec: RenewalSpec,
    beta: float,
    n_range: Sequence[int],
    mc_samples: int = 0,
    rng_seed: int = 0,
) -> RenewalReport:
    """
    Check P(S >= n) <= r_hat(n/2 - n0) + C n^-beta sum_j r_hat(j) for n >= 2 n0.

    The constant C needed at each n is reported as the ratio; the check passes
    when it stays within 5% of its early-range maximum. The sum of r_hat runs
    up to the largest n.
    """
    ns = _as_range(n_range)
    ns = ns[ns >= 2 * spec.n0]
    if ns.size == 0:
        raise ParameterError(f"n_range has no n >= 2 n0 = {2 * spec.n0}")
    n_max = int(ns[-1])
    exact = exact_tail_dp(spec, n_max)
    tails = np.array([exact.at(int(n)) for n in ns])
    r_total = spec.r_hat.total(n_max)
    first_block = spec.r_hat.evaluate(ns // 2 - spec.n0 + 1)
    excess = np.maximum(tails - first_block, 0.0)
    needed = excess * ns.astype(np.float64) ** beta / r_total
    passed, early_max, overall = stabilized(needed, _early_count(ns.size), 1.05)
    bound = first_block + overall * ns.astype(np.float64) ** -beta * r_total
    mc, deviation = _mc_comparison(spec, exact, ns, mc_samples, rng_seed)

    rows = [
        TailRow(
            n=int(n),
            tail_exact=float(tails[i]),
            tail_mc=None if mc is None else float(mc[i]),
            bound_value=float(bound[i]),
            ratio=float(needed[i]),
        )
        for i, n in enumerate(ns)
    ]
    return RenewalReport(
        check="stail_b",
        rows=rows,
        constant=overall,
        early_constant=early_max,
        passed=passed,
        mc_max_deviation=deviation,
    )


def verify_stail_exp(
    spec: RenewalSpec,
    beta: float,
    n_range: Sequence[int],
    mc_samples: int = 0,
    rng_seed: int = 0,
    min_r_squared: float = 0.98,
) -> RenewalReport:
    """
    Fit log P(S >= n) against n^beta; passes on a negative slope with r^2 >= 0.98.

    Raises:
        ParameterError: if beta is outside (0, 1]
        DegenerateFitError: if fewer than 3 positive tails remain
    """
    if not 0.0 < beta <= 1.0:
        raise ParameterError(f"beta={beta} must lie in (0, 1]")
    ns = _as_range(n_range)
    exact = exact_tail_dp(spec, int(ns[-1]))
    tails = np.array([exact.at(int(n)) for n in ns])
    positive = tails > 0.0
    xs = ns[positive].astype(np.float64) ** beta
    fit = linear_fit(xs, np.log(tails[positive]))
    passed = fit.slope < 0.0 and fit.r_squared >= min_r_squared
    mc, deviation = _mc_comparison(spec, exact, ns, mc_samples, rng_seed)

    fitted = np.exp(fit.intercept + fit.slope * ns.astype(np.float64) ** beta)
    rows = [
        TailRow(
            n=int(n),
            tail_exact=float(tails[i]),
            tail_mc=None if mc is None else float(mc[i]),
            bound_value=float(fitted[i]),
            ratio=float(tails[i] / fitted[i]) if fitted[i] > 0.0 else math.inf,
        )
        for i, n in enumerate(ns)
    ]
    logger.info(
        f"verify_stail_exp: slope {fit.slope:.4g} in n^{beta}, r^2 {fit.r_squared:.4f}"
    )
    return RenewalReport(
        check="stail_exp",
        rows=rows,
        constant=math.exp(fit.intercept),
        slope=fit.slope,
        r_squared=fit.r_squared,
        passed=passed,
        mc_max_deviation=deviation,
    )
