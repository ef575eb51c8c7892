"""Long-running end-to-end checks at production sizes. Run with `pytest -m slow`."""

import math

import numpy as np
import pytest
from scipy.special import zeta

from core.constants import (
    CenteringMethod,
    CoefficientFamily,
    InitialDensityKind,
    MarkovState,
)
from schemas.density import TailFunction
from schemas.experiment import ObservableSpec
from schemas.renewal import RenewalSpec
from schemas.sequence import ParameterSequence
from services.counterexample import markov_counterexample
from services.density_service import (
    build_grid,
    evolve_path,
    initial_density,
    invariant_density,
)
from services.experiment_service import (
    memory_loss_experiment,
    moments_experiment,
    tail_experiment,
)
from services.quadratic_variation import (
    coefficient_family,
    lemma_fun2_oracle,
    lemma_fun_oracle,
    qv_moment_check,
)
from services.renewal_service import verify_stail, verify_stail_exp

pytestmark = pytest.mark.slow

DYADIC_6_12 = [2**k for k in range(6, 13)]


def test_memory_loss_between_regular_densities() -> None:
    edges = build_grid()
    seq = ParameterSequence.constant(0.5, DYADIC_6_12[-1])
    f = initial_density(InitialDensityKind.UNIFORM, edges)
    g = initial_density(InitialDensityKind.COSINE_BUMP, edges)
    report = memory_loss_experiment(seq, f, g, DYADIC_6_12)
    assert report.fit is not None
    assert -2.25 <= report.fit.slope <= -1.75


def test_memory_loss_against_invariant_density() -> None:
    edges = build_grid()
    seq = ParameterSequence.constant(0.5, DYADIC_6_12[-1])
    f = initial_density(InitialDensityKind.UNIFORM, edges)
    g = invariant_density(0.5, 1e-8, edges=edges, project=False)
    report = memory_loss_experiment(seq, f, g, DYADIC_6_12)
    assert report.fit is not None
    assert -1.25 <= report.fit.slope <= -0.75


def test_running_max_moments_in_the_diffusive_regime() -> None:
    n_grid = [2**k for k in range(7, 14)]
    seq = ParameterSequence.constant(1.0 / 3.0, n_grid[-1])
    mu = initial_density(InitialDensityKind.UNIFORM, build_grid())
    reports = moments_experiment(
        seq, mu, ObservableSpec(), [2.0, 4.0], n_grid, 100_000, rng_seed=2024
    )
    by_name = {r.statistic: r for r in reports}
    second, fourth = by_name["E(S_n*)^2"].fit, by_name["E(S_n*)^4"].fit
    assert second is not None and fourth is not None
    assert 0.8 <= second.slope <= 1.2
    assert fourth.slope <= 2.3


def test_running_max_tail_exponent() -> None:
    seq = ParameterSequence.constant(0.75, 1000)
    mu = initial_density(InitialDensityKind.UNIFORM, build_grid())
    report = tail_experiment(
        seq,
        mu,
        ObservableSpec(),
        n=1000,
        t_grid=[10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
        samples=1_000_000,
        rng_seed=7,
    )
    assert report.fit is not None
    assert -1.58 <= report.fit.slope <= -1.08


def test_stail_stabilizes_and_matches_sampler(power_spec: RenewalSpec) -> None:
    report = verify_stail(
        power_spec, 3.0, 2.0, range(1, 2001), mc_samples=1_000_000, rng_seed=5
    )
    assert report.passed
    assert report.mc_max_deviation is not None
    assert report.mc_max_deviation <= 4.0


def test_stail_exp_fit() -> None:
    spec = RenewalSpec(
        theta=0.3,
        r_hat=TailFunction.stretched_exponential(
            rate=1.0, exponent=0.5, constant=math.e, length=256
        ),
    )
    report = verify_stail_exp(spec, beta=0.5, n_range=range(10, 2001, 10))
    assert report.passed
    assert report.slope is not None and report.slope < 0.0
    assert report.r_squared is not None and report.r_squared >= 0.98


@pytest.mark.parametrize("beta", [3.0, 1.5, 2.0])
def test_quadratic_variation_bounds(beta: float) -> None:
    report = qv_moment_check(
        beta,
        coefficient_family(CoefficientFamily.ONES),
        n_samples=10_000,
        rng_seed=17,
        lengths=[2**k for k in range(5, 13)],
    )
    assert report.passed, report.failed_statistics


def test_lemma_fun2_spike_and_stable_ratio() -> None:
    lhs, rhs = lemma_fun2_oracle([1.0])
    assert lhs == pytest.approx(float(zeta(3.0)), rel=1e-12)
    assert rhs == pytest.approx(1.0)

    ratios = []
    for n in (10, 100, 1000, 10_000):
        lhs, rhs = lemma_fun2_oracle(np.ones(n))
        ratios.append(lhs / rhs)
    assert max(ratios) <= 1.1 * max(ratios[:-1])


def test_lemma_fun_homogeneity() -> None:
    rng = np.random.default_rng(3)
    a = rng.random(200)
    ks = np.arange(1, 301, dtype=np.float64)
    w = np.concatenate(([0.0], ks ** -4.0)) / 2.0
    lhs, rhs = lemma_fun_oracle(a, w, beta=3.0)
    lhs2, rhs2 = lemma_fun_oracle(2.0 * a, w, beta=3.0)
    assert lhs2 / rhs2 == pytest.approx(lhs / rhs, rel=1e-10)


def test_counterexample_at_scale() -> None:
    trace = markov_counterexample(1000, paths=10_000, rng_seed=1)
    assert trace.exact
    assert np.array_equal(np.abs(trace.sums[:, -1]), np.full(10_000, 1000))
    starts_at_a = trace.starts == MarkovState.A
    assert np.all(trace.sums[starts_at_a, -1] == -1000)
    assert np.all(trace.sums[~starts_at_a, -1] == 1000)


def test_mass_conservation_over_long_runs() -> None:
    edges = build_grid()
    seq = ParameterSequence.constant(0.5, 10_000)
    f = initial_density(InitialDensityKind.COSINE_BUMP, edges)
    _, last = next(evolve_path(seq, f, [10_000]))
    assert abs(last.total_mass - f.total_mass) <= 1e-12 * 10_000


def test_runs_are_reproducible() -> None:
    seq = ParameterSequence.constant(0.4, 512)
    mu = initial_density(InitialDensityKind.UNIFORM, build_grid())
    args = (seq, mu, ObservableSpec(), [2.0], [64, 128, 256, 512], 20_000)
    first = moments_experiment(*args, rng_seed=99, centering=CenteringMethod.DENSITY)
    second = moments_experiment(*args, rng_seed=99, centering=CenteringMethod.DENSITY)
    for a, b in zip(first, second, strict=True):
        assert np.array_equal(a.values, b.values)
