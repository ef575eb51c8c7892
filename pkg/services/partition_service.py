"""First-entry and first-return partitions of a map sequence."""

import logging

import numpy as np

from core.constants import PartitionKind
from core.exceptions import PartitionMismatchError, SequenceIndexError
from schemas.density import GridDensity
from schemas.partition import DistortionSample, GapViolation, PartitionPoints
from schemas.sequence import ParameterSequence
from services.lsv_map import apply_array, derivative_array, left_inverse_array

logger = logging.getLogger(__name__)


def _require_length(seq: ParameterSequence, count: int) -> None:
    if count < 1:
        raise SequenceIndexError(count, len(seq))
    if len(seq) < count - 1:
        raise SequenceIndexError(count - 1, len(seq))


def _entry_points(seq: ParameterSequence, count: int) -> np.ndarray:
    # Chain n holds g_j o ... o g_{n-1}(1/2) after pass j; all chains advance together.
    chains = np.full(count, 0.5)
    for j in range(count - 1, 0, -1):
        chains[j:] = left_inverse_array(seq.gamma(j), chains[j:])
    return chains


def entry_partition(seq: ParameterSequence, count: int) -> PartitionPoints:
    """
    Points x_1 = 1/2 > x_2 > ... > x_count with x_n = g_1 o ... o g_{n-1}(1/2).

    Points with x in (x_{n+1}, x_n] enter (1/2, 1] for the first time at step n.

    Raises:
        SequenceIndexError: if the sequence has fewer than count - 1 maps
    """
    _require_length(seq, count)
    points = _entry_points(seq, count)
    logger.debug(f"Entry partition: {count} points, smallest {points[-1]:.3e}")
    return PartitionPoints(
        points=tuple(float(p) for p in points), kind=PartitionKind.ENTRY, seq_ref=seq
    )


def return_partition(seq: ParameterSequence, count: int) -> PartitionPoints:
    """
    Points y_1 = 1 > y_2 = 3/4 > ... with y_n = (x'_{n-1} + 1) / 2.

    x' is the entry partition of the shifted sequence T_2, T_3, ...
    """
    _require_length(seq, count)
    points = [1.0]
    if count >= 2:
        shifted = _entry_points(seq.shifted(1), count - 1)
        points.extend(float((x + 1.0) / 2.0) for x in shifted)
    return PartitionPoints(points=tuple(points), kind=PartitionKind.RETURN, seq_ref=seq)


def gap_violation(partition: PartitionPoints) -> GapViolation:
    """
    Worst excess of the gap inequality.

    Entry: x_n - x_{n+1} <= x_{n+1}. Return: y_n - y_{n+1} <= y_{n+1} - 1/2.
    """
    pts = np.asarray(partition.points)
    if pts.size < 2:
        return GapViolation(index=1, excess=-np.inf)
    gaps = pts[:-1] - pts[1:]
    allowance = pts[1:] - partition.floor
    excess = gaps - allowance
    worst = int(np.argmax(excess))
    return GapViolation(index=worst + 1, excess=float(excess[worst]))


def first_hit_times(seq: ParameterSequence, x: np.ndarray, horizon: int) -> np.ndarray:
    """
    First k >= 1 with T_{1,k}(x) in (1/2, 1], or horizon + 1 if not reached.
    """
    pts = np.array(x, dtype=np.float64)
    hits = np.full(pts.shape, horizon + 1, dtype=np.int64)
    pending = np.ones(pts.shape, dtype=bool)
    for k in range(1, min(horizon, len(seq)) + 1):
        pts = apply_array(seq.gamma(k), pts)
        arrived = pending & (pts > 0.5)
        hits[arrived] = k
        pending &= ~arrived
        if not pending.any():
            break
    return hits


def midpoints(partition: PartitionPoints) -> np.ndarray:
    """Midpoints of the elements (p_{n+1}, p_n], n = 1..len-1."""
    pts = np.asarray(partition.points)
    return 0.5 * (pts[:-1] + pts[1:])


def cone_tail(
    density: GridDensity,
    entry: PartitionPoints,
    ret: PartitionPoints,
    count: int,
) -> list[float]:
    """
    Tail masses t_n = mu((0, x_n] U (1/2, y_n]) for n = 1..count.

    Raises:
        PartitionMismatchError: if the partitions belong to different sequences
    """
    if entry.kind is not PartitionKind.ENTRY or ret.kind is not PartitionKind.RETURN:
        raise PartitionMismatchError("cone_tail needs an entry and a return partition")
    if entry.seq_ref != ret.seq_ref:
        raise PartitionMismatchError(
            "Entry and return partitions come from different sequences"
        )
    if count > min(len(entry), len(ret)):
        raise SequenceIndexError(count, min(len(entry), len(ret)))

    xs = np.asarray(entry.points[:count])
    ys = np.asarray(ret.points[:count])
    left = density.cdf(xs)
    right = density.cdf(ys) - density.cdf(np.array([0.5]))[0]
    return [float(t) for t in left + right]


def distortion_samples(partition: PartitionPoints, count: int) -> list[DistortionSample]:
    """
    Ratio of (T_{1,n})' at the two ends of each element (p_{n+1}, p_n].

    Diagnostic only; no bound is asserted.
    """
    seq = partition.seq_ref
    pts = np.asarray(partition.points)
    samples = []
    for n in range(1, min(count, len(pts) - 1) + 1):
        ends = np.array([pts[n], pts[n - 1]])
        # Stay inside the element so both ends follow the same branches.
        ends = ends + np.array([1e-3, -1e-3]) * (ends[1] - ends[0])
        slope = np.ones(2)
        current = ends
        for k in range(1, n + 1):
            gamma = seq.gamma(k)
            slope *= derivative_array(gamma, current)
            current = apply_array(gamma, current)
        samples.append(DistortionSample(n=n, ratio=float(slope.max() / slope.min())))
    return samples
