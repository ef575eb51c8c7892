"""Tests for first-entry and first-return partitions."""

from collections.abc import Callable

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.constants import Branch, PartitionKind
from core.exceptions import PartitionMismatchError, SequenceIndexError
from schemas.density import FloatArray
from schemas.partition import PartitionPoints
from schemas.sequence import LsvMap, ParameterSequence
from services.density_service import power_density, uniform_density
from services.lsv_map import inverse_branch
from services.partition_service import (
    cone_tail,
    distortion_samples,
    entry_partition,
    first_hit_times,
    gap_violation,
    midpoints,
    return_partition,
)
from utils.fitting import slope_fit

GAP_TOLERANCE = 1e-12

sequences = st.lists(
    st.floats(min_value=0.05, max_value=0.95), min_size=40, max_size=40
).map(lambda gs: ParameterSequence(gammas=tuple(gs), gamma_star=max(gs)))


class TestEntryPartition:
    """x_1 = 1/2 > x_2 > ... by backward left inverses."""

    def test_single_point(self, constant_half: ParameterSequence) -> None:
        assert entry_partition(constant_half, 1).points == (0.5,)

    def test_second_point_is_left_preimage(self, constant_half: ParameterSequence) -> None:
        points = entry_partition(constant_half, 2).points
        expected = inverse_branch(LsvMap(gamma=0.5), Branch.LEFT, 0.5)
        assert points[0] == 0.5
        assert points[1] == pytest.approx(expected, abs=1e-14)
        assert points[1] == pytest.approx(0.28492, abs=1e-5)

    def test_sequence_too_short(self) -> None:
        with pytest.raises(SequenceIndexError):
            entry_partition(ParameterSequence.constant(0.5, 3), 10)

    def test_power_law_decay(self) -> None:
        seq = ParameterSequence.constant(0.5, 1000)
        points = np.asarray(entry_partition(seq, 1000).points)
        ns = np.arange(1, 1001)
        window = ns >= 100
        fit = slope_fit(ns[window], points[window])
        assert -2.3 <= fit.slope <= -1.8

    @settings(max_examples=25, deadline=None)
    @given(sequences)
    def test_gap_inequality(self, seq: ParameterSequence) -> None:
        assert gap_violation(entry_partition(seq, 40)).excess <= GAP_TOLERANCE


class TestReturnPartition:
    """y_1 = 1, y_n = (x'_{n-1} + 1) / 2."""

    def test_first_two_points(self, constant_half: ParameterSequence) -> None:
        assert return_partition(constant_half, 2).points == (1.0, 0.75)

    def test_third_point(self, constant_half: ParameterSequence) -> None:
        x2 = entry_partition(constant_half, 2).points[1]
        y3 = return_partition(constant_half, 3).points[2]
        assert y3 == pytest.approx((x2 + 1.0) / 2.0, abs=1e-15)

    def test_accumulates_at_half(self) -> None:
        seq = ParameterSequence.constant(0.5, 500)
        points = np.asarray(return_partition(seq, 500).points)
        ns = np.arange(1, 501)
        window = ns >= 50
        fit = slope_fit(ns[window], points[window] - 0.5)
        assert fit.slope == pytest.approx(-2.0, abs=0.3)

    @settings(max_examples=25, deadline=None)
    @given(sequences)
    def test_gap_inequality(self, seq: ParameterSequence) -> None:
        ret = return_partition(seq, 40)
        assert ret.kind is PartitionKind.RETURN
        assert gap_violation(ret).excess <= GAP_TOLERANCE


class TestFirstHitTimes:
    """Element n enters (1/2, 1] at step n."""

    @pytest.mark.parametrize("builder", [entry_partition, return_partition])
    def test_midpoints_hit_at_their_index(
        self,
        builder: Callable[[ParameterSequence, int], PartitionPoints],
        constant_half: ParameterSequence,
    ) -> None:
        partition = builder(constant_half, 30)
        hits = first_hit_times(constant_half, midpoints(partition), horizon=100)
        assert np.array_equal(hits, np.arange(1, 30))

    def test_censored_at_horizon(self, constant_half: ParameterSequence) -> None:
        hits = first_hit_times(constant_half, np.array([1e-9]), horizon=5)
        assert hits[0] == 6


class TestConeTail:
    """Tail masses of a density over (0, x_n] and (1/2, y_n]."""

    def test_first_tail_is_full_mass(
        self, constant_half: ParameterSequence, small_edges: FloatArray
    ) -> None:
        entry = entry_partition(constant_half, 5)
        ret = return_partition(constant_half, 5)
        tails = cone_tail(uniform_density(small_edges), entry, ret, 5)
        assert tails[0] == pytest.approx(1.0, abs=1e-12)
        assert all(b <= a for a, b in zip(tails, tails[1:], strict=False))

    def test_power_density_rate(self, small_edges: FloatArray) -> None:
        seq = ParameterSequence.constant(0.5, 256)
        entry = entry_partition(seq, 200)
        ret = return_partition(seq, 200)
        tails = np.asarray(cone_tail(power_density(small_edges, 0.5), entry, ret, 200))
        ns = np.arange(1, 201)
        window = ns >= 20
        fit = slope_fit(ns[window], tails[window])
        assert -1.3 <= fit.slope <= -0.8

    def test_partitions_from_different_sequences(self, small_edges: FloatArray) -> None:
        entry = entry_partition(ParameterSequence.constant(0.5, 10), 5)
        ret = return_partition(ParameterSequence.constant(0.4, 10), 5)
        with pytest.raises(PartitionMismatchError):
            cone_tail(uniform_density(small_edges), entry, ret, 5)


def test_distortion_is_bounded_below_by_one(constant_half: ParameterSequence) -> None:
    samples = distortion_samples(entry_partition(constant_half, 12), 10)
    assert [s.n for s in samples] == list(range(1, 11))
    assert all(1.0 <= s.ratio < np.inf for s in samples)
