"""Least-squares fits and boundedness checks for experiment series."""

import logging

import numpy as np
from numpy.typing import ArrayLike

from core.exceptions import DegenerateFitError, DomainError
from schemas.experiment import FitResult

logger = logging.getLogger(__name__)


def linear_fit(xs: ArrayLike, ys: ArrayLike) -> FitResult:
    """
    Ordinary least squares y = slope * x + intercept.

    Raises:
        DegenerateFitError: if fewer than 3 points or all x coincide
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise DomainError("xs and ys must have the same shape")
    if x.size < 3 or np.ptp(x) == 0.0:
        raise DegenerateFitError(
            f"Need at least 3 distinct x values, got {x.size}", {"points": int(x.size)}
        )

    stderr = None
    if x.size > 3:
        coeffs, cov = np.polyfit(x, y, 1, cov=True)
        stderr = float(np.sqrt(max(cov[0, 0], 0.0)))
    else:
        coeffs = np.polyfit(x, y, 1)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return FitResult(
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        points=int(x.size),
        slope_stderr=stderr,
    )


def slope_fit(xs: ArrayLike, ys: ArrayLike) -> FitResult:
    """
    Log-log slope of ys against xs.

    Points with y = 0 are dropped and counted in `excluded`.

    Raises:
        DomainError: on nonpositive x or negative y
        DegenerateFitError: if fewer than 3 usable points remain
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if np.any(x <= 0.0) or np.any(y < 0.0) or not np.all(np.isfinite(y)):
        raise DomainError("slope_fit needs positive x and nonnegative finite y")
    keep = y > 0.0
    excluded = int(np.count_nonzero(~keep))
    if excluded:
        logger.warning(f"slope_fit: dropped {excluded} zero-valued points")
    if np.count_nonzero(keep) < 3:
        raise DegenerateFitError(
            f"Only {int(np.count_nonzero(keep))} positive points to fit",
            {"excluded": excluded},
        )
    fit = linear_fit(np.log(x[keep]), np.log(y[keep]))
    return fit.model_copy(update={"excluded": excluded})


def window_mask(xs: ArrayLike, window: tuple[float, float] | None) -> np.ndarray:
    """Boolean mask of xs inside the closed window (everything when None)."""
    x = np.asarray(xs, dtype=np.float64)
    if window is None:
        return np.ones(x.shape, dtype=bool)
    lo, hi = window
    return (x >= lo) & (x <= hi)


def stabilized(values: ArrayLike, early: int, factor: float) -> tuple[bool, float, float]:
    """
    Whether the overall maximum stays within factor times the maximum of the
    first `early` entries.

    Returns (passed, early_max, overall_max).
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        return True, 0.0, 0.0
    early = min(max(early, 1), vals.size)
    early_max = float(np.max(vals[:early]))
    overall = float(np.max(vals))
    return overall <= factor * early_max or overall == 0.0, early_max, overall
