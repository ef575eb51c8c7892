"""Tests for series fits and empirical norms."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.exceptions import DegenerateFitError, DomainError, ParameterError
from utils.fitting import linear_fit, slope_fit, stabilized, window_mask
from utils.norms import lp_norm, weak_norm


class TestSlopeFit:
    """Log-log least squares."""

    @given(
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=1e-3, max_value=1e3),
    )
    def test_exact_power_law(self, exponent: float, constant: float) -> None:
        xs = 2.0 ** np.arange(1, 10)
        fit = slope_fit(xs, constant * xs**exponent)
        assert fit.slope == pytest.approx(exponent, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-9)

    def test_constant_series(self) -> None:
        fit = slope_fit([1, 2, 4, 8], [3.0, 3.0, 3.0, 3.0])
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_zero_values_excluded(self) -> None:
        fit = slope_fit([1, 2, 4, 8, 16], [1.0, 0.25, 0.0, 1.0 / 64, 1.0 / 256])
        assert fit.excluded == 1
        assert fit.points == 4
        assert fit.slope == pytest.approx(-2.0)

    def test_too_few_points(self) -> None:
        with pytest.raises(DegenerateFitError):
            slope_fit([1, 2, 4], [1.0, 0.0, 0.0])

    def test_negative_values(self) -> None:
        with pytest.raises(DomainError):
            slope_fit([1, 2, 4], [1.0, -1.0, 1.0])

    def test_coincident_x(self) -> None:
        with pytest.raises(DegenerateFitError):
            linear_fit([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_slope_stderr(self) -> None:
        xs = np.arange(10.0)
        fit = linear_fit(xs, 2.0 * xs + np.where(xs % 2 == 0, 0.1, -0.1))
        assert fit.slope == pytest.approx(2.0, abs=0.05)
        assert fit.slope_stderr is not None and fit.slope_stderr > 0.0


class TestWindowAndStabilized:
    def test_window_is_closed(self) -> None:
        mask = window_mask([1, 10, 100, 1000], (10, 100))
        assert mask.tolist() == [False, True, True, False]

    def test_no_window_keeps_everything(self) -> None:
        assert window_mask([1, 2, 3], None).all()

    def test_stable_series(self) -> None:
        passed, early, overall = stabilized([1.0, 2.0, 2.05, 2.1], early=2, factor=1.1)
        assert passed
        assert (early, overall) == (2.0, 2.1)

    def test_growing_series(self) -> None:
        passed, _, _ = stabilized([1.0, 2.0, 4.0, 8.0], early=2, factor=1.1)
        assert not passed


class TestNorms:
    """Empirical L^p and weak-L^p norms."""

    def test_constant_samples(self) -> None:
        samples = np.full(100, 3.0)
        assert lp_norm(samples, 2.0) == pytest.approx(3.0)
        assert lp_norm(samples, np.inf) == 3.0
        assert weak_norm(samples, 1.5) == pytest.approx(3.0, rel=1e-9)

    def test_lp_of_two_point_law(self) -> None:
        assert lp_norm([0.0, 2.0], 2.0) == pytest.approx(np.sqrt(2.0))

    def test_large_exponent_stays_finite(self) -> None:
        assert lp_norm([1e200, 1e200], 4.0) == pytest.approx(1e200)

    def test_weak_norm_below_strong_norm(self, rng: np.random.Generator) -> None:
        samples = rng.pareto(3.0, 10_000)
        assert weak_norm(samples, 2.0) <= lp_norm(samples, 2.0) * (1.0 + 1e-9)

    def test_empty_and_zero(self) -> None:
        assert lp_norm([], 2.0) == 0.0
        assert weak_norm(np.zeros(5), 2.0) == 0.0

    def test_invalid_exponent(self) -> None:
        with pytest.raises(ParameterError):
            lp_norm([1.0], 0.0)
        with pytest.raises(ParameterError):
            weak_norm([1.0], -1.0)
