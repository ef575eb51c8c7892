"""Grid densities and the transfer operator of LSV maps."""

import hashlib
import logging
from collections import OrderedDict
from collections.abc import Callable, Iterable, Iterator
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import isotonic_regression

from core.config import settings
from core.constants import (
    CONE_PROJECTION_CAP,
    IMAGE_CACHE_SIZE,
    OPERATOR_CACHE_SIZE,
    POWER_ITERATION_CAP,
    InitialDensityKind,
)
from core.exceptions import (
    ConvergenceError,
    DomainError,
    GridMismatchError,
    ParameterError,
    SequenceIndexError,
)
from schemas.density import (
    CheckOutcome,
    ConeDiagnostics,
    FloatArray,
    GridDensity,
    default_cone_parameter,
)
from schemas.sequence import LsvMap, ParameterSequence
from services.lsv_map import apply_array

logger = logging.getLogger(__name__)

_QUADRATURE_NODES, _QUADRATURE_WEIGHTS = leggauss(6)


def build_grid(
    size: int | None = None,
    geometric_cells: int | None = None,
    min_edge: float | None = None,
    geometric_top: float | None = None,
) -> FloatArray:
    """
    Breakpoints 0 < min_edge < ... < geometric_top < ... < 1/2 < ... < 1.

    One cell [0, min_edge], geometric cells up to geometric_top, then uniform
    cells split so that 1/2 is an edge. Defaults come from settings.
    """
    size = size or settings.grid_size
    geometric_cells = geometric_cells or settings.grid_geometric_cells
    min_edge = min_edge or settings.grid_min_edge
    geometric_top = geometric_top or settings.grid_geometric_top

    uniform_cells = size - 1 - geometric_cells
    if uniform_cells < 4 or not 0.0 < min_edge < geometric_top < 0.5:
        raise ParameterError(
            "Grid parameters leave no room for uniform cells",
            {"size": size, "geometric_cells": geometric_cells},
        )
    lower_cells = max(1, round(uniform_cells * (0.5 - geometric_top) / (1.0 - geometric_top)))
    upper_cells = uniform_cells - lower_cells

    edges = np.concatenate(
        (
            [0.0],
            np.geomspace(min_edge, geometric_top, geometric_cells + 1),
            np.linspace(geometric_top, 0.5, lower_cells + 1)[1:],
            np.linspace(0.5, 1.0, upper_cells + 1)[1:],
        )
    )
    edges[-1] = 1.0
    edges.setflags(write=False)
    return edges


def density_from_function(
    edges: FloatArray, func: Callable[[FloatArray], FloatArray], normalize: bool = True
) -> GridDensity:
    """Cell averages of func by Gauss-Legendre quadrature on each cell."""
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    centre = 0.5 * (right + left)
    nodes = centre[:, None] + half[:, None] * _QUADRATURE_NODES[None, :]
    averages = 0.5 * (func(nodes) @ _QUADRATURE_WEIGHTS)
    density = GridDensity(edges=edges, values=averages)
    return density.normalized() if normalize else density


def power_density(edges: FloatArray, exponent: float) -> GridDensity:
    """Normalized density proportional to x^-exponent, exact cell integrals."""
    if not 0.0 <= exponent < 1.0:
        raise DomainError(f"Exponent {exponent} must lie in [0, 1)")
    power = 1.0 - exponent
    masses = np.diff(edges**power)
    return GridDensity.from_masses(edges, masses)


def uniform_density(edges: FloatArray) -> GridDensity:
    return GridDensity(edges=edges, values=np.ones(edges.size - 1))


def initial_density(
    kind: InitialDensityKind,
    edges: FloatArray,
    gamma: float | None = None,
    tol: float = 1e-8,
    exponent: float = 0.5,
) -> GridDensity:
    """Named initial densities used by run configs."""
    if kind is InitialDensityKind.UNIFORM:
        return uniform_density(edges)
    if kind is InitialDensityKind.COSINE_BUMP:
        return density_from_function(
            edges, lambda x: 1.0 + 0.5 * x * np.cos(2.0 * np.pi * x)
        )
    if kind is InitialDensityKind.POWER:
        return power_density(edges, exponent)
    if kind is InitialDensityKind.INDICATOR_LEFT:
        masses = np.clip(np.minimum(edges[1:], 0.5) - edges[:-1], 0.0, None) * 2.0
        return GridDensity.from_masses(edges, masses)
    if kind is InitialDensityKind.INVARIANT:
        if gamma is None:
            raise ParameterError("The invariant initial density needs gamma")
        return invariant_density(gamma, tol, edges=edges)
    raise DomainError(f"Unknown initial density {kind!r}")


class TransferOperator:
    """
    Pushforward of grid densities by LSV maps as exact interval mass transport.

    Each source cell's mass is spread uniformly over its image interval and
    deposited into destination cells by overlap. The most recent
    IMAGE_CACHE_SIZE left-branch images are cached by gamma.
    """

    def __init__(self, edges: FloatArray):
        """Bind the operator to one grid; 1/2 must be a grid edge."""
        half = np.flatnonzero(edges == 0.5)
        if half.size != 1:
            raise GridMismatchError("Transfer grid must contain 1/2 as an edge")
        self.edges = edges
        self._half = int(half[0])
        self._left_image = lru_cache(maxsize=IMAGE_CACHE_SIZE)(self._build_left_image)
        right = 2.0 * edges[self._half :] - 1.0
        right[0], right[-1] = 0.0, 1.0
        self._right_image = right

    def _build_left_image(self, gamma: float) -> FloatArray:
        image = apply_array(gamma, self.edges[: self._half + 1])
        image[0], image[-1] = 0.0, 1.0
        return image

    def push_masses(self, gamma: float, masses: FloatArray) -> FloatArray:
        """Cell masses after one step of the map with parameter gamma."""
        half = self._half
        cum_left = np.concatenate(([0.0], np.cumsum(masses[:half])))
        cum_right = np.concatenate(([0.0], np.cumsum(masses[half:])))
        pushed = np.interp(self.edges, self._left_image(gamma), cum_left) + np.interp(
            self.edges, self._right_image, cum_right
        )
        if masses.min() >= 0.0:
            pushed = np.maximum.accumulate(pushed)
        return np.diff(pushed)

    def step(self, gamma: float, f: GridDensity) -> GridDensity:
        if not (f.edges is self.edges or np.array_equal(f.edges, self.edges)):
            raise GridMismatchError("Density is not on the operator's grid")
        return GridDensity.from_masses(f.edges, self.push_masses(gamma, f.masses))


_operators: OrderedDict[str, TransferOperator] = OrderedDict()


def _grid_key(edges: FloatArray) -> str:
    data = np.ascontiguousarray(edges, dtype=np.float64)
    return f"{data.size}:{hashlib.sha256(data.tobytes()).hexdigest()}"


def operator_for(edges: FloatArray) -> TransferOperator:
    """Shared operator per grid content; the least recently used is evicted."""
    key = _grid_key(edges)
    op = _operators.pop(key, None)
    if op is None:
        op = TransferOperator(edges)
    _operators[key] = op
    while len(_operators) > OPERATOR_CACHE_SIZE:
        _operators.popitem(last=False)
    return op


def transfer_step(lsv: LsvMap, f: GridDensity) -> GridDensity:
    """Pushforward of f by one map; total mass is preserved."""
    return operator_for(f.edges).step(lsv.gamma, f)


def evolve(seq: ParameterSequence, f: GridDensity, n: int) -> GridDensity:
    """
    Apply transfer steps with T_1, ..., T_n in order.

    Raises:
        SequenceIndexError: if n exceeds the sequence length
    """
    result = f
    for _, density in evolve_path(seq, f, [n]):
        result = density
    return result


def evolve_path(
    seq: ParameterSequence, f: GridDensity, checkpoints: Iterable[int]
) -> Iterator[tuple[int, GridDensity]]:
    """Yield (n, (T_{1,n})_* f) at each checkpoint, evolving once."""
    marks = sorted(set(checkpoints))
    if marks and marks[-1] > len(seq):
        raise SequenceIndexError(marks[-1], len(seq))
    if marks and marks[0] < 0:
        raise SequenceIndexError(marks[0], len(seq))
    op = operator_for(f.edges)
    masses = f.masses
    current = 0
    for mark in marks:
        while current < mark:
            current += 1
            masses = op.push_masses(seq.gamma(current), masses)
        yield mark, (f if mark == 0 else GridDensity.from_masses(f.edges, masses))


def tv_distance(f: GridDensity, g: GridDensity) -> float:
    """Total mass of |f - g|."""
    if not f.same_grid(g):
        raise GridMismatchError("Densities live on different grids")
    return float(np.sum(np.abs(f.values - g.values) * f.widths))


def _relative_excess(excess: FloatArray, at: FloatArray, tolerance: float) -> CheckOutcome:
    if excess.size == 0:
        return CheckOutcome(passed=True, worst_violation=0.0)
    worst = int(np.argmax(excess))
    magnitude = max(float(excess[worst]), 0.0)
    return CheckOutcome(
        passed=magnitude <= tolerance,
        worst_violation=magnitude,
        at=float(at[worst]) if magnitude > 0.0 else None,
    )


def cone_check(
    f: GridDensity, gamma_star: float, a: float | None = None, tolerance: float = 1e-6
) -> ConeDiagnostics:
    """
    Check the cone conditions at cell midpoints.

    Violations are relative: sign and monotonicity defects are measured
    against the local value, the pointwise bound as f / (a x^-gamma* mass) - 1.

    Raises:
        ParameterError: if a <= 2^gamma* (gamma* + 2)
    """
    floor = 2.0**gamma_star * (gamma_star + 2.0)
    a = default_cone_parameter(gamma_star) if a is None else a
    if a <= floor:
        raise ParameterError(
            f"Cone parameter a={a} must exceed 2^gamma*(gamma*+2)={floor:.6f}",
            {"a": a, "floor": floor},
        )
    vals = f.values
    mids = f.midpoints
    scale = float(np.max(np.abs(vals))) or 1.0

    negative = _relative_excess(-vals / scale, mids, tolerance)

    prev = np.abs(vals[:-1])
    prev_safe = np.where(prev > 0.0, prev, scale)
    increase = _relative_excess((vals[1:] - vals[:-1]) / prev_safe, mids[1:], tolerance)

    weighted = mids ** (gamma_star + 1.0) * vals
    w_prev = np.abs(weighted[:-1])
    w_safe = np.where(w_prev > 0.0, w_prev, 1.0)
    decrease = _relative_excess(
        (weighted[:-1] - weighted[1:]) / w_safe, mids[1:], tolerance
    )

    mass = f.total_mass
    bound = a * mids ** (-gamma_star) * mass
    if mass > 0.0:
        over = _relative_excess(vals / bound - 1.0, mids, tolerance)
    else:
        over = _relative_excess(np.abs(vals) / scale, mids, tolerance)

    return ConeDiagnostics(
        gamma_star=gamma_star,
        a=a,
        nonnegative=negative,
        nonincreasing=increase,
        weighted_nondecreasing=decrease,
        pointwise_bound=over,
    )


def log_lipschitz(f: GridDensity, region: tuple[float, float]) -> float:
    """
    Lipschitz seminorm of log f over adjacent midpoints inside region.

    Returns 0 when f vanishes on the region and +inf when a zero cell
    neighbours a nonzero one.
    """
    lo, hi = region
    if not 0.0 <= lo <= hi <= 1.0:
        raise DomainError(f"Region {region} is not inside [0, 1]")
    mids = f.midpoints
    inside = (mids >= lo) & (mids <= hi)
    vals = f.values[inside]
    xs = mids[inside]
    if vals.size < 2 or not np.any(vals > 0.0):
        return 0.0
    zero = vals <= 0.0
    if np.any(zero[:-1] != zero[1:]):
        return float("inf")
    if np.all(zero):
        return 0.0
    logs = np.log(vals)
    return float(np.max(np.abs(np.diff(logs)) / np.diff(xs)))


def project_to_cone(f: GridDensity, gamma: float) -> GridDensity:
    """
    Nearest density, in width-weighted L2, that is nonincreasing with
    x^(gamma+1) f nondecreasing at midpoints.

    Alternates the two isotonic projections and renormalises to f's mass.

    Raises:
        ConvergenceError: if the cone conditions still fail after
            CONE_PROJECTION_CAP passes
    """
    widths = f.widths
    scale = f.midpoints ** (gamma + 1.0)
    scaled_weights = widths / scale**2
    mass = f.total_mass
    values = f.values
    projected = f
    for attempt in range(1, CONE_PROJECTION_CAP + 1):
        values = isotonic_regression(values, weights=widths, increasing=False).x
        weighted = isotonic_regression(
            scale * values, weights=scaled_weights, increasing=True
        ).x
        values = weighted / scale
        values = values * (mass / float(np.sum(values * widths)))
        projected = GridDensity(edges=f.edges, values=values)
        diagnostics = cone_check(projected, gamma)
        if diagnostics.nonincreasing.passed and diagnostics.weighted_nondecreasing.passed:
            logger.debug(f"Cone projection settled after {attempt} passes")
            return projected
    worst = max(
        diagnostics.nonincreasing.worst_violation,
        diagnostics.weighted_nondecreasing.worst_violation,
    )
    raise ConvergenceError("cone projection", CONE_PROJECTION_CAP, worst)


def invariant_density(
    gamma: float,
    tol: float,
    edges: FloatArray | None = None,
    project: bool = True,
) -> GridDensity:
    """
    Fixed point of the transfer operator by power iteration from f = 1.

    Stops when successive iterates differ by less than tol in L1, then
    projects the iterate onto the cone. Mass transport smears the image of
    the branch breakpoint over a few cells, which leaves x^(gamma+1) f
    slightly decreasing there before the projection. With project=False the
    discrete fixed point is returned as is.

    Raises:
        ConvergenceError: after POWER_ITERATION_CAP iterations, or if the
            projected density still fails cone_check
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma={gamma} is outside (0, 1)")
    if tol <= 0.0:
        raise ParameterError(f"tol must be positive, got {tol}")
    edges = build_grid() if edges is None else edges
    op = operator_for(edges)
    masses = np.diff(edges)
    change = float("inf")
    for iteration in range(1, POWER_ITERATION_CAP + 1):
        pushed = op.push_masses(gamma, masses)
        change = float(np.sum(np.abs(pushed - masses)))
        masses = pushed
        if change < tol:
            logger.info(
                f"Invariant density for gamma={gamma} after {iteration} steps "
                f"(L1 change {change:.2e})"
            )
            fixed = GridDensity.from_masses(edges, masses / masses.sum())
            if not project:
                return fixed
            return _checked_projection(fixed, gamma, iteration)
        if iteration % 1000 == 0:
            logger.debug(f"Power iteration {iteration}: L1 change {change:.3e}")
    logger.error(f"Power iteration for gamma={gamma} did not converge")
    raise ConvergenceError("invariant_density", POWER_ITERATION_CAP, change)


def _checked_projection(
    fixed: GridDensity, gamma: float, iterations: int
) -> GridDensity:
    projected = project_to_cone(fixed, gamma)
    logger.info(f"Cone projection moved {tv_distance(fixed, projected):.2e} of mass")
    diagnostics = cone_check(projected, gamma)
    if not diagnostics.passed:
        worst = max(
            outcome.worst_violation
            for outcome in (
                diagnostics.nonnegative,
                diagnostics.nonincreasing,
                diagnostics.weighted_nondecreasing,
                diagnostics.pointwise_bound,
            )
        )
        logger.error(f"Invariant density for gamma={gamma} is outside the cone")
        raise ConvergenceError("invariant_density", iterations, worst)
    return projected


def sample(f: GridDensity, u: np.ndarray | float) -> np.ndarray:
    """
    Inverse-CDF sampling: locate the cell by cumulative mass, interpolate inside it.

    Accepts scalar or array uniforms in [0, 1).
    """
    cum = f.cumulative()
    total = cum[-1]
    uu = np.clip(np.asarray(u, dtype=np.float64) * total, 0.0, np.nextafter(total, 0.0))
    idx = np.searchsorted(cum, uu, side="right") - 1
    idx = np.clip(idx, 0, f.size - 1)
    masses = cum[idx + 1] - cum[idx]
    frac = np.where(masses > 0.0, (uu - cum[idx]) / np.where(masses > 0.0, masses, 1.0), 0.0)
    return f.edges[idx] + frac * (f.edges[idx + 1] - f.edges[idx])


def sample_points(f: GridDensity, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw size points distributed according to f."""
    return sample(f, rng.random(size))
