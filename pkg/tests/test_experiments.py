"""Tests for observables and the rate experiments."""

import numpy as np
import pytest

from core.config import settings
from core.constants import (
    CenteringMethod,
    InitialDensityKind,
    ObservableFunction,
    ObservableKind,
)
from core.exceptions import ParameterError, SequenceIndexError
from schemas.density import FloatArray
from schemas.experiment import ObservableSpec
from schemas.sequence import ParameterSequence
from services.density_service import initial_density, uniform_density
from services.experiment_service import (
    deviation_check,
    deviation_exponents,
    memory_loss_experiment,
    moments_experiment,
    tail_experiment,
)
from services.observables import centered_sums, density_means, reference_moment_slope

Z_BOUND = 4.0


@pytest.fixture
def cosine_birkhoff() -> ObservableSpec:
    return ObservableSpec(kind=ObservableKind.BIRKHOFF, function=ObservableFunction.COSINE)


class TestCenteredSums:
    """S_n and its running maximum along sampled trajectories."""

    def test_running_max_dominates(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        marks, sums, peaks = centered_sums(
            constant_half,
            uniform_density(small_edges),
            ObservableSpec(),
            [1, 4, 16, 64],
            2000,
            rng_seed=3,
        )
        assert marks.tolist() == [1, 4, 16, 64]
        assert sums.shape == peaks.shape == (2000, 4)
        assert np.all(peaks >= np.abs(sums))
        assert np.all(np.diff(peaks, axis=1) >= 0.0)

    def test_empirical_centering_has_zero_mean(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        _, sums, _ = centered_sums(
            constant_half, uniform_density(small_edges), ObservableSpec(), [8, 32], 5000, 1
        )
        assert np.allclose(sums.mean(axis=0), 0.0, atol=1e-9)

    def test_reproducible_across_threads(
        self,
        constant_half: ParameterSequence,
        small_edges: FloatArray,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        monkeypatch.setattr(settings, "mc_block_size", 500)
        mu = uniform_density(small_edges)
        first = centered_sums(constant_half, mu, ObservableSpec(), [10, 20], 2000, 9)
        monkeypatch.setattr(settings, "threads", 3)
        second = centered_sums(constant_half, mu, ObservableSpec(), [10, 20], 2000, 9)
        for a, b in zip(first, second, strict=True):
            assert np.array_equal(a, b)

    def test_sequence_too_short(self, small_edges: FloatArray) -> None:
        with pytest.raises(SequenceIndexError):
            centered_sums(
                ParameterSequence.constant(0.5, 5),
                uniform_density(small_edges),
                ObservableSpec(),
                [10],
                10,
                0,
            )

    def test_density_means_of_constant(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        obs = ObservableSpec(function=ObservableFunction.ONE, weights=(1.0, 2.0, 0.5))
        means = density_means(constant_half, uniform_density(small_edges), obs, 5)
        assert means == pytest.approx([1.0, 2.0, 0.5, 0.0, 0.0])


class TestMemoryLoss:
    """Total variation between two pushed-forward densities."""

    def test_identical_densities_are_flagged(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        f = uniform_density(small_edges)
        report = memory_loss_experiment(constant_half, f, f, [1, 2, 4, 8])
        assert report.values.tolist() == [0.0, 0.0, 0.0, 0.0]
        assert report.flagged
        assert report.fit is None

    def test_distance_decreases(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        f = uniform_density(small_edges)
        g = initial_density(InitialDensityKind.INDICATOR_LEFT, small_edges)
        report = memory_loss_experiment(constant_half, f, g, [1, 2, 4, 8, 16, 32, 64])
        assert np.all(np.diff(report.values) <= 1e-14)
        assert report.fit is not None and report.fit.slope < 0.0

    def test_nonpositive_steps(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        f = uniform_density(small_edges)
        with pytest.raises(ParameterError):
            memory_loss_experiment(constant_half, f, f, [0, 1, 2])


class TestMoments:
    """Moment growth of centered sums."""

    def test_zero_observable(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        obs = ObservableSpec(function=ObservableFunction.ZERO)
        reports = moments_experiment(
            constant_half, uniform_density(small_edges), obs, [2.0], [4, 8, 16], 200, 0
        )
        assert [r.statistic for r in reports] == ["E(S_n*)^2", "mean_z"]
        assert reports[0].values.tolist() == [0.0, 0.0, 0.0]
        assert reports[0].flagged

    def test_reports_and_centering(
        self,
        constant_half: ParameterSequence,
        small_edges: FloatArray,
        cosine_birkhoff: ObservableSpec,
    ) -> None:
        reports = moments_experiment(
            constant_half,
            uniform_density(small_edges),
            cosine_birkhoff,
            [2.0, 4.0],
            [4, 8, 16, 32, 64],
            4000,
            rng_seed=5,
            centering=CenteringMethod.DENSITY,
        )
        assert [r.statistic for r in reports] == ["E|S_n|^2", "E|S_n|^4", "mean_z"]
        assert reports[0].reference_slope == reference_moment_slope(0.5, 2.0)
        assert np.all(np.abs(reports[-1].values) <= Z_BOUND)
        assert all(r.seed == 5 for r in reports)

    def test_invalid_exponents(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        with pytest.raises(ParameterError):
            moments_experiment(
                constant_half, uniform_density(small_edges), ObservableSpec(), [], [4], 10, 0
            )


class TestTails:
    def test_requires_heavy_tail_regime(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        with pytest.raises(ParameterError):
            tail_experiment(
                constant_half, uniform_density(small_edges), ObservableSpec(), 10, [1.0], 10, 0
            )

    def test_tail_starts_at_one(self, small_edges: FloatArray) -> None:
        seq = ParameterSequence.constant(0.75, 60)
        report = tail_experiment(
            seq, uniform_density(small_edges), ObservableSpec(), 50, [1e-9, 1.0, 10.0], 2000, 4
        )
        values = report.values
        assert values[0] == 1.0
        assert np.all(np.diff(values) <= 0.0)
        assert report.reference_slope == pytest.approx(-4.0 / 3.0)


class TestDeviations:
    def test_huge_threshold_gives_zero(
        self,
        constant_half: ParameterSequence,
        small_edges: FloatArray,
        cosine_birkhoff: ObservableSpec,
    ) -> None:
        reports = deviation_check(
            constant_half,
            uniform_density(small_edges),
            cosine_birkhoff,
            [8, 16, 32],
            500,
            2,
            epsilon=10.0,
            tau_exponent=0.75,
        )
        assert [r.statistic for r in reports] == ["large_deviation", "moderate_deviation"]
        assert reports[0].values.tolist() == [0.0, 0.0, 0.0]
        assert reports[0].flagged

    @pytest.mark.parametrize(
        ("gamma_star", "tau", "expected"),
        [
            (1.0 / 3.0, 0.75, (-2.0, -1.0)),
            (0.5, 0.75, (-1.0, -0.5)),
            (0.75, 0.75, (-1.0 / 3.0, 0.0)),
        ],
    )
    def test_reference_exponents(
        self, gamma_star: float, tau: float, expected: tuple[float, float]
    ) -> None:
        assert deviation_exponents(gamma_star, tau) == pytest.approx(expected)


@pytest.mark.parametrize(
    ("gamma_star", "p", "slope"),
    [(1.0 / 3.0, 2.0, 1.0), (1.0 / 3.0, 4.0, 2.0), (0.5, 2.0, 1.0), (0.75, 1.0, 0.75)],
)
def test_reference_moment_slope(gamma_star: float, p: float, slope: float) -> None:
    assert reference_moment_slope(gamma_star, p) == pytest.approx(slope)
