"""Empirical L^p and weak-L^p norms of Monte Carlo samples."""

import math

import numpy as np
from numpy.typing import ArrayLike

from core.exceptions import ParameterError


def lp_norm(samples: ArrayLike, p: float) -> float:
    """(E|X|^p)^(1/p); p = inf gives the sample maximum of |X|."""
    x = np.abs(np.asarray(samples, dtype=np.float64))
    if x.size == 0:
        return 0.0
    if math.isinf(p):
        return float(x.max())
    if p <= 0.0:
        raise ParameterError(f"p must be positive, got {p}")
    scale = float(x.max())
    if scale == 0.0:
        return 0.0
    # Scaling first keeps large moments finite.
    return scale * float(np.mean((x / scale) ** p)) ** (1.0 / p)


def weak_norm(samples: ArrayLike, p: float, grid_points: int = 128) -> float:
    """
    Weak-L^p norm sup_t t P(|X| > t)^(1/p), estimated on a log-spaced t grid
    spanning the positive sample values.
    """
    if p <= 0.0:
        raise ParameterError(f"p must be positive, got {p}")
    x = np.sort(np.abs(np.asarray(samples, dtype=np.float64)))
    positive = x[x > 0.0]
    if positive.size == 0:
        return 0.0
    lo, hi = float(positive[0]), float(positive[-1])
    ts = np.geomspace(lo, hi, grid_points) if hi > lo else np.array([lo])
    # Just below each t so the largest sample still counts as exceeding it.
    ts = ts * (1.0 - 1e-12)
    exceed = (x.size - np.searchsorted(x, ts, side="right")) / x.size
    return float(np.max(ts * exceed ** (1.0 / p)))
