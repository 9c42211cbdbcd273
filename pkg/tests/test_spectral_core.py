"""Tests for wickstate.spectral_core module."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wickstate.core.exceptions import GridError, SingularWeightError
from wickstate.spectral_core import (
    DenseOperator,
    GridSpec,
    InnerProduct,
    SectionField,
    adjoint,
    bracket_op,
    derivative_op,
    mode_column_norms,
    smoothing_order_profile,
    sobolev_norm,
    spectral_derivative,
)


def _random_symbols(grid, fiber, rng):
    shape = (grid.points, fiber, fiber)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_grid_rejects_odd_points():
    """Test that an odd number of points per axis is rejected."""
    with pytest.raises(GridError):
        GridSpec(1, 15)


def test_grid_rejects_unsupported_dimension():
    """Test that only dimensions 1 to 3 are accepted."""
    with pytest.raises(GridError):
        GridSpec(4, 8)


def test_grid_wavenumbers_include_nyquist_positive():
    """Test that the Nyquist wavenumber is stored as +n/2."""
    grid = GridSpec(1, 8)
    k = grid.axis_wavenumbers()
    assert k.max() == 4
    assert k.min() == -3


def test_derivative_exact_on_trigonometric_polynomial():
    """Test that the spectral derivative of sin(3x) is 3 cos(3x)."""
    grid = GridSpec(1, 32)
    x = grid.coordinates[:, 0]
    D = derivative_op(grid, 0)
    out = D.apply(np.sin(3 * x))
    np.testing.assert_allclose(out, 3 * np.cos(3 * x), atol=1e-12)


def test_spectral_derivative_of_constant_field_is_zero():
    """Test that x-independent field series have zero derivative."""
    grid = GridSpec(2, 8)
    values = np.ones((1, 2, 2))
    assert np.all(spectral_derivative(values, grid, 0) == 0)


def test_derivative_axis_out_of_range():
    """Test that a derivative along a missing axis is rejected."""
    with pytest.raises(GridError):
        derivative_op(GridSpec(2, 8), 2)


def test_multiplier_matches_dense_application():
    """Test that a multiplier applies the same as its dense matrix."""
    grid = GridSpec(2, 4)
    rng = np.random.default_rng(1)
    A = DenseOperator.multiplier(grid, _random_symbols(grid, 2, rng))
    v = rng.standard_normal(2 * grid.points) + 1j * rng.standard_normal(2 * grid.points)
    np.testing.assert_allclose(A.apply(v), A.to_dense().apply(v), atol=1e-10)


def test_composition_matches_matrix_product():
    """Test that multiplier composition agrees with the dense product."""
    grid = GridSpec(1, 8)
    rng = np.random.default_rng(2)
    A = DenseOperator.multiplier(grid, _random_symbols(grid, 3, rng))
    B = DenseOperator.multiplier(grid, _random_symbols(grid, 3, rng))
    np.testing.assert_allclose((A @ B).matrix, A.matrix @ B.matrix, atol=1e-10)


def test_pointwise_constant_field_stays_multiplier():
    """Test that a constant matrix field becomes a multiplier."""
    grid = GridSpec(1, 8)
    op = DenseOperator.pointwise(grid, np.diag([1.0, 2.0]))
    assert op.is_multiplier


def test_pointwise_varying_field_is_dense():
    """Test that an x-dependent matrix field becomes a dense operator."""
    grid = GridSpec(1, 8)
    x = grid.coordinates[:, 0]
    op = DenseOperator.pointwise(grid, (1.0 + 0.5 * np.cos(x))[:, None, None])
    assert not op.is_multiplier
    v = np.ones(grid.points)
    np.testing.assert_allclose(op.apply(v), 1.0 + 0.5 * np.cos(x), atol=1e-12)


def test_block_of_multipliers_is_multiplier():
    """Test that block assembly keeps the multiplier representation."""
    grid = GridSpec(1, 8)
    one = DenseOperator.identity(grid, 2)
    zero = DenseOperator.zeros(grid, 2, 2)
    op = DenseOperator.block([[one, zero], [zero, one]])
    assert op.is_multiplier
    assert op.fiber_in == 4
    np.testing.assert_allclose(op.block_of(slice(2, 4), slice(2, 4)).symbols, one.symbols)


def test_inverse_of_singular_operator():
    """Test that inverting a singular multiplier raises SingularWeightError."""
    grid = GridSpec(1, 8)
    with pytest.raises(SingularWeightError):
        DenseOperator.zeros(grid, 2, 2).inverse()


def test_fiber_mismatch_in_sum():
    """Test that adding operators with different fibers is rejected."""
    grid = GridSpec(1, 8)
    with pytest.raises(GridError):
        DenseOperator.identity(grid, 1) + DenseOperator.identity(grid, 2)


def test_needs_exactly_one_representation():
    """Test that DenseOperator refuses both or neither representation."""
    grid = GridSpec(1, 4)
    with pytest.raises(GridError):
        DenseOperator(grid, 1, 1)


def test_sobolev_norm_of_plane_wave():
    """Test that ||e^{2ix}||_s = (1 + 4)^(s/2)."""
    grid = GridSpec(1, 16)
    f = SectionField.from_function(grid, lambda x: np.exp(2j * x[:, 0]))
    assert sobolev_norm(f, 1.0) == pytest.approx(np.sqrt(5.0))
    assert sobolev_norm(f, 0.0) == pytest.approx(1.0)


def test_random_band_limited_is_band_limited():
    """Test that random test sections have no modes above the cutoff."""
    grid = GridSpec(2, 16)
    f = SectionField.random_band_limited(grid, 3, 2.0, np.random.default_rng(0))
    assert f.is_band_limited(2.0, tol=1e-10)
    assert not f.is_band_limited(0.0, tol=1e-10)


def test_section_vector_layout_is_fiber_major():
    """Test that component a at point p sits at index a * points + p."""
    grid = GridSpec(1, 4)
    values = np.arange(8).reshape(4, 2)
    f = SectionField(grid, 2, values)
    vec = f.to_vector()
    assert vec[1] == values[1, 0]
    assert vec[4 + 1] == values[1, 1]
    np.testing.assert_allclose(SectionField.from_vector(grid, 2, vec).values, values)


def test_inner_product_rejects_non_hermitian_weight():
    """Test that a non-Hermitian weight is rejected."""
    grid = GridSpec(1, 4)
    W = DenseOperator.multiplier(grid, np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        InnerProduct(W)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_adjoint_identity(seed):
    """Test <u, A v>_W = <A^* u, v>_W for random operators and positive weights."""
    rng = np.random.default_rng(seed)
    grid = GridSpec(1, 8)
    A = DenseOperator.multiplier(grid, _random_symbols(grid, 2, rng))
    M = rng.standard_normal((2, 2))
    W = DenseOperator.multiplier(grid, M @ M.T + 2 * np.eye(2))
    ip = InnerProduct(W)
    u = rng.standard_normal(2 * grid.points) + 1j * rng.standard_normal(2 * grid.points)
    v = rng.standard_normal(2 * grid.points) + 1j * rng.standard_normal(2 * grid.points)
    lhs = ip.pair(u, A.apply(v))
    rhs = ip.pair(adjoint(A, ip).apply(u), v)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_adjoint_rejects_singular_weight():
    """Test that a singular weight cannot define an adjoint."""
    grid = GridSpec(1, 4)
    W = DenseOperator.multiplier(grid, np.diag([1.0, 0.0]))
    with pytest.raises(SingularWeightError):
        adjoint(DenseOperator.identity(grid, 2), InnerProduct(W))


def test_mode_column_norms_of_bracket():
    """Test that column norms of <k>^1 are <k> per mode."""
    grid = GridSpec(1, 16)
    norms = mode_column_norms(bracket_op(grid, 1.0))
    np.testing.assert_allclose(norms, np.sqrt(1.0 + grid.k_abs ** 2))


def test_mode_column_norms_dense_matches_multiplier():
    """Test that the dense column norms agree with the multiplier ones."""
    grid = GridSpec(1, 8)
    rng = np.random.default_rng(3)
    A = DenseOperator.multiplier(grid, _random_symbols(grid, 2, rng))
    np.testing.assert_allclose(mode_column_norms(A.to_dense()), mode_column_norms(A), atol=1e-10)


def test_smoothing_profile_accepts_exponential_decay():
    """Test that e^{-|k|} passes every order up to 4."""
    grid = GridSpec(1, 64)
    A = DenseOperator.multiplier(grid, np.exp(-grid.k_abs)[:, None, None])
    table = smoothing_order_profile(A, (1, 2, 3, 4), bound=10.0)
    assert table.all_pass
    assert table.max_constant <= 10.0


def test_smoothing_profile_rejects_identity():
    """Test that the identity is not smoothing."""
    grid = GridSpec(1, 64)
    table = smoothing_order_profile(DenseOperator.identity(grid, 1), (1, 2), bound=1e6)
    assert not table.all_pass


def test_smoothing_profile_round_off_operator_passes():
    """Test that an operator that is zero up to round-off passes at high orders."""
    grid = GridSpec(1, 64)
    A = DenseOperator.multiplier(grid, np.full((grid.points, 1, 1), 1.1e-13))
    table = smoothing_order_profile(A, (1, 2, 3, 4), bound=10.0)
    assert table.weighted[4].max() > 1e-8
    assert table.all_pass


def test_smoothing_profile_flat_tail_above_noise_fails():
    """Test that a flat tail well above round-off still fails the tail test."""
    grid = GridSpec(1, 64)
    A = DenseOperator.multiplier(grid, np.full((grid.points, 1, 1), 1e-6))
    table = smoothing_order_profile(A, (1, 2, 3, 4), bound=10.0)
    assert not table.passed[4]


def test_smoothing_profile_needs_square_fiber():
    """Test that rectangular operators are rejected."""
    grid = GridSpec(1, 8)
    with pytest.raises(GridError):
        smoothing_order_profile(DenseOperator.zeros(grid, 1, 2))


def test_decay_table_csv(tmp_path):
    """Test that decay tables are written with one column per order."""
    grid = GridSpec(1, 16)
    A = DenseOperator.multiplier(grid, np.exp(-grid.k_abs)[:, None, None])
    table = smoothing_order_profile(A, (1, 2), bound=10.0, label="test")
    path = tmp_path / "table.csv"
    table.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "mode,k_abs,norm,m1,m2"
    assert len(path.read_text().splitlines()) == grid.points + 1
    frame = table.to_frame()
    assert frame["k_abs"].is_monotonic_increasing
