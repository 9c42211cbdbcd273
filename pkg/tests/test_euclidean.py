"""Tests for wickstate.euclidean module."""

import numpy as np
import pytest

from wickstate.bundles import FiberForms
from wickstate.core.exceptions import EllipticSolveError, GridError
from wickstate.euclidean import (
    EllipticProblem,
    calderon_projectors,
    charge_selfadjoint_defect,
    chebyshev_lobatto,
    clenshaw_curtis_weights,
    compare_projectors,
    dtn_map,
    dtn_rayleigh_bounds,
    green_identities,
    reality_defect,
    reflection_defect,
    wick_rotate,
)
from wickstate.factorization import factorize, hadamard_projectors
from wickstate.series import TimeAnalyticOperator
from wickstate.spectral_core import DenseOperator, GridSpec


def _flat_scalar(n=8, mass_squared=1.0, order=4):
    grid = GridSpec(1, n)
    omega2 = grid.k_abs ** 2 + mass_squared
    a0 = DenseOperator.multiplier(grid, omega2[:, None, None])
    return grid, np.sqrt(omega2), TimeAnalyticOperator.constant(a0, order)


def test_chebyshev_differentiation_is_exact_on_polynomials():
    """Test that the Lobatto differentiation matrix is exact for x^3."""
    x, D = chebyshev_lobatto(8)
    np.testing.assert_allclose(D @ x ** 3, 3 * x ** 2, atol=1e-10)


def test_clenshaw_curtis_weights():
    """Test the quadrature against the integrals of 1 and x^2 on [-1, 1]."""
    x, _ = chebyshev_lobatto(10)
    w = clenshaw_curtis_weights(x)
    assert w.sum() == pytest.approx(2.0)
    assert np.dot(w, x ** 2) == pytest.approx(2.0 / 3.0)


def test_wick_rotation_of_constant_operator():
    """Test that a time-independent a is unchanged by Wick rotation."""
    _, _, a = _flat_scalar()
    at = wick_rotate(a)
    np.testing.assert_allclose(at.coeffs[0].symbols, a.coeffs[0].symbols)


def test_reality_defect_flat():
    """Test the reality conditions on a Hermitian static operator."""
    grid, _, a = _flat_scalar()
    defects = reality_defect(a, FiberForms.scalar(grid))
    assert defects["lorentzian"] <= 1e-14
    assert defects["euclidean"] <= 1e-14


def test_elliptic_problem_validates_inputs():
    """Test that T and the node count are checked."""
    _, _, a = _flat_scalar()
    with pytest.raises(GridError):
        EllipticProblem(a, T=0.0)
    with pytest.raises(GridError):
        EllipticProblem(a, nodes=3)


def test_coercive_halves_length():
    """Test that a negative potential forces T down until the certificate holds."""
    grid = GridSpec(1, 4)
    a = TimeAnalyticOperator.constant(DenseOperator.multiplier(grid, np.full((4, 1, 1), -20.0)), 2)
    problem = EllipticProblem.coercive(a, T=1.0, nodes=16)
    assert problem.T == pytest.approx(0.25)
    assert problem.coercivity > 0
    with pytest.raises(EllipticSolveError):
        EllipticProblem.coercive(a, T=1.0, nodes=16, max_halvings=0)


def test_dtn_map_closed_form():
    """Test N+- = +- omega coth(omega T) on the flat cylinder."""
    grid, omega, a = _flat_scalar()
    T = 1.0
    problem = EllipticProblem(a, T, 32, FiberForms.scalar(grid))
    exact = omega / np.tanh(omega * T)
    np.testing.assert_allclose(dtn_map(problem, "+").symbols[:, 0, 0], exact, atol=1e-8)
    np.testing.assert_allclose(dtn_map(problem, "-").symbols[:, 0, 0], -exact, atol=1e-8)


def test_dtn_rayleigh_bounds_flat():
    """Test that Re N+ is comparable to <k> with the coth factor as upper bound."""
    grid, _, a = _flat_scalar()
    problem = EllipticProblem(a, 1.0, 32, FiberForms.scalar(grid))
    c1, c2 = dtn_rayleigh_bounds(dtn_map(problem, "+"), FiberForms.scalar(grid))
    assert 0.0 < c1 <= c2
    assert c2 == pytest.approx(1.0 / np.tanh(1.0), rel=1e-6)


def test_calderon_projector_algebra():
    """Test complementarity, idempotency, charge self-adjointness and reflection."""
    grid, _, a = _flat_scalar()
    forms = FiberForms.scalar(grid)
    problem = EllipticProblem(a, 1.0, 32, forms)
    ct = calderon_projectors(problem)
    assert ct.sum_defect() <= 1e-8
    assert ct.idempotency_defect() <= 1e-8
    assert charge_selfadjoint_defect(ct.c_plus, forms.charge()) <= 1e-8
    assert reflection_defect(ct, forms) <= 1e-8
    assert ct.residual_metadata["nodes"] == 32


def test_calderon_matches_hadamard_modulo_smoothing():
    """Test that the Euclidean and Lorentzian projectors agree on high modes."""
    grid, _, a = _flat_scalar(n=16)
    forms = FiberForms.scalar(grid)
    fac = factorize(a, forms)
    had = hadamard_projectors(fac.b_plus.coeffs[0], fac.b_minus.coeffs[0])
    ct = calderon_projectors(EllipticProblem(a, 1.0, 32, forms))
    comparison = compare_projectors(had, ct)
    assert comparison.plus.all_pass
    assert comparison.minus.all_pass
    assert np.max(comparison.per_mode[grid.k_abs >= 5]) < 1e-3


def test_compare_projectors_grid_mismatch():
    """Test that projectors on different grids cannot be compared."""
    grid, _, a = _flat_scalar(n=8)
    fac = factorize(a, FiberForms.scalar(grid))
    had = hadamard_projectors(fac.b_plus.coeffs[0], fac.b_minus.coeffs[0])
    grid16, _, a16 = _flat_scalar(n=16)
    ct = calderon_projectors(EllipticProblem(a16, 1.0, 16, FiberForms.scalar(grid16)))
    with pytest.raises(GridError):
        compare_projectors(had, ct)


def test_green_identities_flat():
    """Test both elliptic Green identities on band-limited data."""
    grid, _, a = _flat_scalar()
    problem = EllipticProblem(a, 1.0, 32, FiberForms.scalar(grid))
    residuals = green_identities(problem, seed=1, cutoff=2.0)
    assert residuals["green1"] <= 1e-8
    assert residuals["green2"] <= 1e-8
