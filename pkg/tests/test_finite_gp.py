import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxgp import (
    basis_matrix,
    evaluate_intensity,
    hat_basis,
    integration_weights,
    intensity_measure,
    make_grid,
)
from coxgp.errors import DomainError, ParameterError, ShapeError


def test_make_grid_frozen_examples():
    g = make_grid((0, 1), 3)
    assert np.allclose(g.axes[0], [0.0, 0.5, 1.0])
    assert g.deltas == (0.5,)

    g = make_grid((0, 50), 100)
    assert g.deltas[0] == pytest.approx(50 / 99)

    g = make_grid(((0, 1), (0, 1)), (15, 15))
    assert g.size == 225
    assert g.flat_knots().shape == (225, 2)


def test_make_grid_rejects_bad_input():
    with pytest.raises(ParameterError):
        make_grid((0, 1), 1)
    with pytest.raises(ParameterError):
        make_grid((1, 1), 5)
    with pytest.raises(ShapeError):
        make_grid(((0, 1), (0, 1)), (3, 4, 5))


def test_flat_knots_row_major_last_dim_fastest():
    g = make_grid(((0, 1), (0, 2)), (2, 3))
    knots = g.flat_knots()
    # last dimension varies fastest in the flattened order
    assert np.allclose(knots[0], [0, 0])
    assert np.allclose(knots[1], [0, 1])
    assert np.allclose(knots[2], [0, 2])
    assert np.allclose(knots[3], [1, 0])


def test_hat_basis_values():
    g = make_grid((0, 1), 5)
    delta = g.deltas[0]
    for j in range(5):
        assert hat_basis(g.axes[0][j], j, g) == pytest.approx(1.0)
        for i in range(5):
            if i != j:
                assert hat_basis(g.axes[0][i], j, g) == 0.0
    assert hat_basis(g.axes[0][1] + delta / 2, 1, g) == pytest.approx(0.5)
    assert hat_basis(g.axes[0][1] - delta / 2, 1, g) == pytest.approx(0.5)


def test_hat_basis_domain_error():
    g = make_grid((0, 1), 3)
    with pytest.raises(DomainError):
        hat_basis(1.2, 0, g)
    with pytest.raises(DomainError):
        hat_basis(-0.1, 2, g)


def test_evaluate_intensity_interpolation():
    g = make_grid((0, 1), 2)
    assert evaluate_intensity(np.array([0.0, 1.0]), g, 0.25) == pytest.approx(0.25)
    g3 = make_grid((0, 1), 3)
    coeffs = np.array([1.0, 4.0, 2.0])
    for j, knot in enumerate(g3.axes[0]):
        assert evaluate_intensity(coeffs, g3, knot) == pytest.approx(coeffs[j])


def test_evaluate_intensity_2d_partition_of_unity():
    g = make_grid(((0, 1), (0, 1)), (2, 2))
    coeffs = np.ones(4)
    rng = np.random.default_rng(0)
    pts = rng.random((50, 2))
    assert np.allclose(evaluate_intensity(coeffs, g, pts), 1.0, atol=1e-14)


def test_evaluate_intensity_out_of_domain():
    g = make_grid((0, 1), 3)
    with pytest.raises(DomainError):
        evaluate_intensity(np.ones(3), g, 1.01)


def test_integration_weights_frozen_examples():
    assert np.allclose(integration_weights(make_grid((0, 1), 3)), [0.25, 0.5, 0.25])
    assert np.allclose(integration_weights(make_grid((0, 1), 2)), [0.5, 0.5])
    w2 = integration_weights(make_grid(((0, 1), (0, 1)), (2, 2)))
    assert np.allclose(w2, 0.25)
    assert w2.sum() == pytest.approx(1.0)


@settings(max_examples=20)
@given(
    m=st.integers(2, 12),
    a=st.floats(-3, 0),
    width=st.floats(0.5, 10),
)
def test_weights_sum_to_volume(m, a, width):
    g = make_grid((a, a + width), m)
    assert integration_weights(g).sum() == pytest.approx(width, rel=1e-12)


def test_intensity_measure_frozen_examples():
    g = make_grid((0, 1), 3)
    w = integration_weights(g)
    assert intensity_measure(np.ones(3), w) == pytest.approx(1.0)
    assert intensity_measure(np.array([0.0, 1.0, 0.0]), w) == pytest.approx(0.5)


def test_intensity_measure_shape_error():
    with pytest.raises(ShapeError):
        intensity_measure(np.ones(3), np.ones(4))


def _trapezoid_oracle_1d(coeffs, grid, n=10_000):
    xs = np.linspace(grid.lower[0], grid.upper[0], n + 1)
    return np.trapezoid(evaluate_intensity(coeffs, grid, xs), xs)


def test_intensity_measure_matches_quadrature_oracle():
    rng = np.random.default_rng(42)
    g = make_grid((0, 2), 9)
    w = integration_weights(g)
    for _ in range(25):
        coeffs = rng.uniform(0, 5, g.size)
        assert intensity_measure(coeffs, w) == pytest.approx(
            _trapezoid_oracle_1d(coeffs, g), rel=1e-6
        )


def test_partition_of_unity_1d_machine_precision():
    g = make_grid((0, 3), 17)
    rng = np.random.default_rng(1)
    xs = rng.uniform(0, 3, 2000)
    sums = np.asarray(basis_matrix(xs, g).sum(axis=1)).ravel()
    assert np.max(np.abs(sums - 1.0)) < 1e-12


def test_constraint_transfer_nonnegative_everywhere():
    # non-negative knot coefficients imply a non-negative interpolant everywhere
    rng = np.random.default_rng(7)
    g = make_grid((0, 1), 12)
    coeffs = rng.uniform(0, 3, g.size)
    xs = np.linspace(0, 1, 100_000)
    assert np.min(evaluate_intensity(coeffs, g, xs)) >= 0.0


def test_constraint_transfer_monotone_along_lines():
    rng = np.random.default_rng(8)
    g = make_grid(((0, 1), (0, 1)), (6, 5))
    vals = np.sort(rng.uniform(0, 2, g.shape), axis=0)[::-1]  # nonincreasing along dim 0
    coeffs = vals.ravel()
    for x2 in rng.uniform(0, 1, 5):
        line = np.stack([np.linspace(0, 1, 500), np.full(500, x2)], axis=1)
        y = evaluate_intensity(coeffs, g, line)
        assert np.all(np.diff(y) <= 1e-12)
