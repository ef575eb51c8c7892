"""A centered, separately Lipschitz sum along a non-mixing Markov chain.

The chain moves A -> B or A -> C with probability 1/2 each and B, C -> A.
With v_j(A) = (-1)^(j+1) and v_j(B) = v_j(C) = (-1)^j every step contributes
the same sign, so |S_n| = n on every path although E S_n = 0 under the
stationary law.
"""

import logging
from collections.abc import Sequence

import numpy as np

from core.constants import MarkovState
from core.exceptions import ParameterError
from core.rng import map_blocks
from schemas.experiment import MarkovTrace

logger = logging.getLogger(__name__)

STATIONARY = (0.5, 0.25, 0.25)


def _check_initial(initial: Sequence[float]) -> np.ndarray:
    p = np.asarray(initial, dtype=np.float64)
    if p.shape != (3,) or np.any(p < 0.0) or not np.isclose(p.sum(), 1.0):
        raise ParameterError(
            f"initial must be a probability vector over (A, B, C), got {list(initial)}"
        )
    return p / p.sum()


def _block(
    rng: np.random.Generator,
    size: int,
    n: int,
    initial: np.ndarray,
    constant_observable: bool,
) -> tuple[np.ndarray, np.ndarray]:
    starts = rng.choice(3, size=size, p=initial)
    state = starts.copy()
    sums = np.empty((size, n), dtype=np.int64)
    running = np.zeros(size, dtype=np.int64)
    # One coin per step; it only matters when leaving A.
    coins = rng.integers(0, 2, size=(size, n), dtype=np.int8)
    for j in range(n):
        if constant_observable:
            running += 1
        else:
            sign = 1 if j % 2 == 0 else -1
            running += np.where(state == MarkovState.A, -sign, sign)
        sums[:, j] = running
        at_a = state == MarkovState.A
        state = np.where(at_a, MarkovState.B + coins[:, j], MarkovState.A)
    return starts, sums


def markov_counterexample(
    n: int,
    initial: Sequence[float] = STATIONARY,
    rng_seed: int = 0,
    paths: int = 1,
    constant_observable: bool = False,
) -> MarkovTrace:
    """
    Simulate S_1..S_n along independent paths of the three-state chain.

    Args:
        n: Number of steps
        initial: Law of g_0 over (A, B, C)
        rng_seed: Master seed for the path blocks
        paths: Number of independent paths
        constant_observable: Use v = 1 instead of the alternating observable

    Returns:
        MarkovTrace with one row of sums per path
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if paths < 1:
        raise ParameterError(f"paths must be >= 1, got {paths}")
    p = _check_initial(initial)

    blocks = map_blocks(
        lambda rng, size: _block(rng, size, n, p, constant_observable), rng_seed, paths
    )
    trace = MarkovTrace(
        starts=np.concatenate([b[0] for b in blocks]),
        sums=np.concatenate([b[1] for b in blocks]),
        constant_observable=constant_observable,
    )
    logger.info(f"markov_counterexample: {paths} paths of {n} steps, exact={trace.exact}")
    return trace
