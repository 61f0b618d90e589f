import math

import mpmath
import numpy as np
import pytest

from coxgp import IntensitySpec, gamma_hazard, simulate_poisson, toy_intensity, weibull_hazard
from coxgp.errors import DomainError, DominatingBoundError, ParameterError

TOY_DOMAINS = {1: (0, 50), 2: (0, 5), 3: (0, 100)}


def test_toy_intensity_frozen_values():
    assert toy_intensity(2, 0.0) == pytest.approx(6.0)
    assert toy_intensity(3, 50.0) == pytest.approx(1.0)
    assert toy_intensity(1, 0.0) == pytest.approx(2.0 + math.exp(-6.25), rel=1e-12)
    assert toy_intensity(3, 12.5) == pytest.approx(2.5)  # midpoint of (0,2)-(25,3)


def test_toy_intensity_domain_errors():
    for which, (a, b) in TOY_DOMAINS.items():
        with pytest.raises(DomainError):
            toy_intensity(which, b + 1.0)
    with pytest.raises(ParameterError):
        toy_intensity(4, 0.0)


def test_toy_lambda_max_dominates_dense_grid():
    for which, bound in {1: 3.1, 2: 11.0, 3: 3.0}.items():
        a, b = TOY_DOMAINS[which]
        xs = np.linspace(a, b, 200_001)
        assert float(np.max(toy_intensity(which, xs))) <= bound


def test_weibull_hazard_values():
    assert weibull_hazard(1.0, 1.0, 0.7) == pytest.approx(0.7)
    xs = np.linspace(0.5, 20, 50)
    assert np.allclose(weibull_hazard(xs, 2.5, 1.0), 2.5)
    assert weibull_hazard(0.0, 1.0, 0.7) == math.inf
    assert weibull_hazard(0.0, 1.0, 1.7) == 0.0


def test_weibull_hazard_monotone_for_small_beta():
    xs = np.linspace(1e-6, 100, 10_000)
    vals = weibull_hazard(xs, 1.0, 0.7)
    assert np.all(np.diff(vals) < 0)


def test_hazard_parameter_validation():
    with pytest.raises(ParameterError):
        weibull_hazard(1.0, -1.0, 0.5)
    with pytest.raises(ParameterError):
        gamma_hazard(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        weibull_hazard(-0.5, 1.0, 0.5)


def test_gamma_hazard_values():
    assert gamma_hazard(0.0, 5.0, 1.7) == 0.0
    xs = np.linspace(0.0, 10, 30)
    assert np.allclose(gamma_hazard(xs, 3.0, 1.0), 3.0)


def test_gamma_hazard_asymptote_and_bound():
    # approaches alpha from below; compare at x = 50 with an mpmath oracle
    alpha, beta = 5.0, 1.7
    got = gamma_hazard(50.0, alpha, beta)
    oracle = float(
        alpha * mpmath.power(50, beta - 1) * mpmath.e**-50 / mpmath.gammainc(beta, 50, mpmath.inf)
    )
    assert got == pytest.approx(oracle, rel=1e-10)
    assert got < alpha
    xs = np.linspace(0, 5, 5000)
    vals = gamma_hazard(xs, alpha, beta)
    assert np.all(vals < alpha)
    assert np.all(np.diff(vals) > 0)  # strictly increasing for beta > 1


def test_gamma_hazard_matches_mpmath_on_grid():
    alpha, beta = 2.0, 0.6
    for x in [0.2, 1.0, 3.5]:
        oracle = float(
            alpha * mpmath.power(x, beta - 1) * mpmath.e**-x / mpmath.gammainc(beta, x, mpmath.inf)
        )
        assert gamma_hazard(x, alpha, beta) == pytest.approx(oracle, rel=1e-10)


def test_simulate_zero_intensity_gives_empty_observations():
    spec = IntensitySpec("table", table_x=(0.0, 1.0), table_y=(0.0, 0.0))
    pattern = simulate_poisson(spec, ((0, 1),), spec.default_lambda_max(), 5, 0)
    assert pattern.total_events == 0
    assert pattern.n_observations == 5


def test_simulate_homogeneous_poisson_moments():
    c = 4.0
    pattern = simulate_poisson(lambda x: np.full(len(np.atleast_1d(x)), c), ((0, 1),), c, 10_000, 1)
    counts = np.array([len(o) for o in pattern.observations])
    assert counts.mean() == pytest.approx(c, rel=0.05)
    assert counts.var() == pytest.approx(c, rel=0.05)


def test_simulate_reproducible_per_seed():
    spec = IntensitySpec("toy2")
    a = simulate_poisson(spec, ((0, 5),), 11.0, 3, 123)
    b = simulate_poisson(spec, ((0, 5),), 11.0, 3, 123)
    for oa, ob in zip(a.observations, b.observations):
        assert np.array_equal(oa, ob)


def test_simulate_detects_violated_bound():
    with pytest.raises(DominatingBoundError):
        simulate_poisson(lambda x: np.full(len(np.atleast_1d(x)), 2.0), ((0, 1),), 1.0, 3, 0)


def test_simulate_thinning_calibration_against_quadrature():
    spec = IntensitySpec("toy1")
    xs = np.linspace(0, 50, 100_001)
    integral = np.trapezoid(spec.evaluate(xs), xs)
    pattern = simulate_poisson(spec, ((0, 50),), 3.1, 2_000, 7)
    counts = np.array([len(o) for o in pattern.observations])
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - integral) < 3 * se


def test_simulate_2d():
    pattern = simulate_poisson(lambda p: 2.0 * np.ones(len(p)), ((0, 1), (0, 2)), 2.0, 50, 3)
    assert pattern.ndim == 2
    events = pattern.events_concatenated()
    assert np.all(events[:, 0] <= 1.0) and np.all(events[:, 1] <= 2.0)
    assert np.mean([len(o) for o in pattern.observations]) == pytest.approx(4.0, rel=0.2)


def test_weibull_simulation_capped_near_singularity():
    spec = IntensitySpec("weibull", alpha=1.0, beta=0.7)
    lam = spec.default_lambda_max()
    pattern = simulate_poisson(spec, spec.default_domain, lam, 50, 11)
    counts = np.array([len(o) for o in pattern.observations])
    # integral of the hazard over [0, 100] is 100^0.7 ~ 25.1
    assert counts.mean() == pytest.approx(100**0.7, rel=0.1)


def test_intensity_spec_validation():
    with pytest.raises(ParameterError):
        IntensitySpec("mystery")
    with pytest.raises(ParameterError):
        IntensitySpec("table", table_x=(0.0,), table_y=(1.0,))
    with pytest.raises(ParameterError):
        IntensitySpec("weibull", alpha=-1.0, beta=0.5)
