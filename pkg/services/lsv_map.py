"""LSV interval maps, their branches and finite compositions."""

import logging
import math
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import ValidationError
from scipy.optimize import brentq

from core.constants import INVERSE_TOLERANCE, Branch, CurveKind, SequenceGenerator
from core.exceptions import ConvergenceError, DomainError, SequenceIndexError
from schemas.sequence import LsvMap, ParameterSequence

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

_NEWTON_CAP = 200


def _check_point(x: float) -> None:
    if not math.isfinite(x) or x < 0.0 or x > 1.0:
        raise DomainError(f"Point {x!r} is outside [0, 1]", {"x": x})


def _power(x: float, gamma: float) -> float:
    # x**gamma as exp(gamma*log x), with 0 mapped to 0
    if x == 0.0:
        return 0.0
    return math.exp(gamma * math.log(x))


def _power_array(x: FloatArray, gamma: float) -> FloatArray:
    out = np.zeros_like(x)
    positive = x > 0.0
    out[positive] = np.exp(gamma * np.log(x[positive]))
    return out


def apply(lsv: LsvMap, x: float) -> float:
    """
    Evaluate the map.

    Returns x(1 + 2^gamma x^gamma) on [0, 1/2] and 2x - 1 on (1/2, 1].
    """
    _check_point(x)
    if x <= 0.5:
        value = x * (1.0 + 2.0**lsv.gamma * _power(x, lsv.gamma))
        return min(value, 1.0)
    return 2.0 * x - 1.0


def derivative(lsv: LsvMap, x: float) -> float:
    """Derivative of the branch containing x (1/2 belongs to the left branch)."""
    _check_point(x)
    if x <= 0.5:
        return 1.0 + 2.0**lsv.gamma * (1.0 + lsv.gamma) * _power(x, lsv.gamma)
    return 2.0


def inverse_branch(lsv: LsvMap, branch: Branch, y: float) -> float:
    """
    Preimage of y under one branch.

    The left preimage is the unique root of x(1 + 2^gamma x^gamma) = y in [0, 1/2],
    bracketed by the whole left interval.
    """
    _check_point(y)
    if branch is Branch.RIGHT:
        return (y + 1.0) / 2.0
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5

    scale = 2.0**lsv.gamma

    def residual(x: float) -> float:
        return x * (1.0 + scale * _power(x, lsv.gamma)) - y

    root = brentq(residual, 0.0, 0.5, xtol=INVERSE_TOLERANCE, rtol=4 * np.finfo(float).eps)
    return float(root)


def apply_array(gamma: float, x: ArrayLike) -> FloatArray:
    """Vectorized `apply` for a batch of points (no domain checks)."""
    pts = np.asarray(x, dtype=np.float64)
    scale = 2.0**gamma
    left = pts <= 0.5
    out = 2.0 * pts - 1.0
    xl = pts[left]
    out[left] = np.minimum(xl * (1.0 + scale * _power_array(xl, gamma)), 1.0)
    return out


def derivative_array(gamma: float, x: ArrayLike) -> FloatArray:
    """Vectorized `derivative`."""
    pts = np.asarray(x, dtype=np.float64)
    out = np.full_like(pts, 2.0)
    left = pts <= 0.5
    out[left] = 1.0 + 2.0**gamma * (1.0 + gamma) * _power_array(pts[left], gamma)
    return out


def left_inverse_array(gamma: float, y: ArrayLike) -> FloatArray:
    """
    Vectorized left-branch inverse.

    Newton steps safeguarded by a bisection bracket shrinking inside [0, 1/2];
    a step leaving the bracket is replaced by the bracket midpoint.
    """
    target = np.asarray(y, dtype=np.float64)
    scale = 2.0**gamma
    lo = np.zeros_like(target)
    hi = np.full_like(target, 0.5)
    x = target / (1.0 + scale * _power_array(target, gamma))

    for _ in range(_NEWTON_CAP):
        xg = _power_array(x, gamma)
        fx = x * (1.0 + scale * xg) - target
        lo = np.where(fx < 0.0, x, lo)
        hi = np.where(fx > 0.0, x, hi)
        step = fx / (1.0 + scale * (1.0 + gamma) * xg)
        candidate = x - step
        outside = (candidate < lo) | (candidate > hi)
        candidate = np.where(outside, 0.5 * (lo + hi), candidate)
        moved = np.abs(candidate - x)
        x = candidate
        if not np.any((moved > INVERSE_TOLERANCE / 4) & (hi - lo > INVERSE_TOLERANCE)):
            break
    else:
        residual = float(np.max(np.abs(x * (1.0 + scale * _power_array(x, gamma)) - target)))
        logger.error(f"Left-branch inversion stalled for gamma={gamma}")
        raise ConvergenceError("left_inverse", _NEWTON_CAP, residual)

    x = np.clip(x, 0.0, 0.5)
    x[target == 1.0] = 0.5
    x[target == 0.0] = 0.0
    return x


def compose_apply(seq: ParameterSequence, k: int, l: int, x: float) -> float:  # noqa: E741
    """
    Evaluate T_l o ... o T_k at x.

    Returns x unchanged when k > l (empty composition).
    """
    _check_point(x)
    if k > l:
        return x
    if l > len(seq):
        raise SequenceIndexError(l, len(seq))
    if k < 1:
        raise SequenceIndexError(k, len(seq))
    value = x
    for step in range(k, l + 1):
        value = apply(seq.map_at(step), value)
    return value


def compose_apply_array(
    seq: ParameterSequence, k: int, l: int, x: ArrayLike  # noqa: E741
) -> FloatArray:
    """Vectorized `compose_apply` over a batch of starting points."""
    pts = np.array(x, dtype=np.float64)
    if k > l:
        return pts
    if l > len(seq):
        raise SequenceIndexError(l, len(seq))
    if k < 1:
        raise SequenceIndexError(k, len(seq))
    for step in range(k, l + 1):
        pts = apply_array(seq.gamma(step), pts)
    return pts


def parameter_curve(kind: CurveKind, **params: float) -> Callable[[float], float]:
    """
    Build a parameter curve on [0, 1] from the catalog.

    constant: value; linear: start, end; sine: mid, amplitude.
    """
    if kind is CurveKind.CONSTANT:
        value = params["value"]
        return lambda t: value
    if kind is CurveKind.LINEAR:
        start, end = params["start"], params["end"]
        return lambda t: start + (end - start) * t
    if kind is CurveKind.SINE:
        mid, amplitude = params["mid"], params["amplitude"]
        return lambda t: mid + amplitude * math.sin(2.0 * math.pi * t)
    raise DomainError(f"Unknown curve kind {kind!r}")


def quasistatic_sequence(
    curve: Callable[[float], float], n: int, gamma_star: float
) -> ParameterSequence:
    """
    Level n of a quasistatic array: gamma_{n,k} = curve(k/n), k = 0..n.

    Raises:
        DomainError: if n < 1 or the curve leaves (0, gamma_star]
    """
    if n < 1:
        raise DomainError(f"Level n must be >= 1, got {n}", {"n": n})
    gammas = tuple(float(curve(k / n)) for k in range(n + 1))
    bad = [(k, g) for k, g in enumerate(gammas) if not 0.0 < g <= gamma_star]
    if bad:
        k, g = bad[0]
        raise DomainError(
            f"Curve value {g} at t={k}/{n} is outside (0, {gamma_star}]",
            {"k": k, "value": g, "gamma_star": gamma_star},
        )
    try:
        return ParameterSequence(
            gammas=gammas, gamma_star=gamma_star, generator=SequenceGenerator.QUASISTATIC
        )
    except ValidationError as e:
        raise DomainError(f"Invalid quasistatic sequence: {e}") from e
