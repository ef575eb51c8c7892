"""Tail algebra: shifted partial sums of tail bounds."""

import numpy as np
from numpy.typing import ArrayLike

from core.exceptions import ParameterError
from schemas.density import FloatArray, TailFunction


def _suffix_sums(h: TailFunction, horizon: int) -> FloatArray:
    """Q[m] = h(m) + ... + h(horizon) for m = 0..horizon + 1, with Q[0] = Q[1]."""
    values = h.evaluate(np.arange(1, horizon + 1))
    # Summing from the far end adds the small terms first.
    q = np.concatenate((np.cumsum(values[::-1])[::-1], [0.0]))
    return np.concatenate(([q[0]], q))


def tail_sum_table(
    h: TailFunction, steps: ArrayLike, ells: ArrayLike, c_h: float = 1.0
) -> FloatArray:
    """
    Table of min(1, c_h * sum_{j=0}^{n} h(j + ell)) over steps (rows) and ells (columns).

    Differences of suffix sums keep the small tail values accurate.
    """
    if c_h <= 0.0:
        raise ParameterError(f"C_h must be positive, got {c_h}")
    ns = np.asarray(steps, dtype=np.int64)
    ls = np.asarray(ells, dtype=np.int64)
    if ns.size == 0 or ls.size == 0:
        return np.zeros((ns.size, ls.size))
    if ns.min() < 0 or ls.min() < 1:
        raise ParameterError("tail_sum needs n >= 0 and ell >= 1")
    horizon = int(ns.max() + ls.max())
    q = _suffix_sums(h, horizon)
    table = q[ls][None, :] - q[ls[None, :] + ns[:, None] + 1]
    return np.minimum(1.0, c_h * np.maximum(table, 0.0))


def tail_sum(
    h: TailFunction, n: int, c_h: float = 1.0, length: int | None = None
) -> TailFunction:
    """
    The tail ell -> min(1, c_h * sum_{j=0}^{n} h(j + ell)).

    Stored for ell = 1..length (default and minimum: the length of h);
    larger ell are summed exactly from h's extrapolation.
    """
    length = max(length or h.length, h.length)
    row = tail_sum_table(h, [n], np.arange(1, length + 1), c_h)[0]
    return TailFunction(
        values=tuple(np.minimum.accumulate(row).tolist()),
        rule=h.rule,
        exponent=h.exponent,
        rate=h.rate,
        base=h,
        window=n,
        scale=c_h,
    )
