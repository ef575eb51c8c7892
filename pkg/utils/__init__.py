"""Utilities package."""

from .fitting import linear_fit, slope_fit
from .norms import lp_norm

__all__ = ["linear_fit", "lp_norm", "slope_fit"]
