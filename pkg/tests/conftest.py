"""Shared fixtures."""

import numpy as np
import pytest

from core.config import settings
from schemas.density import FloatArray, TailFunction
from schemas.renewal import RenewalSpec
from schemas.sequence import ParameterSequence
from services.density_service import build_grid


@pytest.fixture(scope="session")
def small_edges() -> FloatArray:
    """A coarse grid that keeps transfer steps fast."""
    return build_grid(size=4096, geometric_cells=300)


@pytest.fixture
def constant_half() -> ParameterSequence:
    return ParameterSequence.constant(0.5, 256)


@pytest.fixture
def single_threaded(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(settings, "threads", 1)


@pytest.fixture
def unit_block_spec() -> RenewalSpec:
    """Every block equals 1 and tau is geometric(1/2), so S = tau."""
    return RenewalSpec(theta=0.5, n0=1, r_hat=TailFunction(values=(1.0,)))


@pytest.fixture
def power_spec() -> RenewalSpec:
    """h(l) = l^-3 and r_hat(l) = min(1, l^-2), theta = 0.3."""
    return RenewalSpec(
        theta=0.3,
        n0=1,
        r_hat=TailFunction.power_law(2.0),
        h=TailFunction.power_law(3.0),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
