"""Tests for wickstate.bundles module."""

import numpy as np
import pytest

from wickstate.bundles import (
    Bundle2Section,
    BundleGeometry,
    FiberForms,
    build_charges,
    check_spd,
    hermitian_form_v2,
    pack_matrix,
    symplectic_adjoint,
    trace_reversal,
    trace_reversal_alpha,
    trace_reversal_field,
    unpack_matrix,
    v2_dim,
)
from wickstate.core.exceptions import GridError, NonPositiveMetricError
from wickstate.spectral_core import DenseOperator, GridSpec, SectionField


def _constant_section(grid, d, component, value=1.0):
    vals = np.zeros((grid.points, v2_dim(d)), dtype=complex)
    vals[:, component] = value
    return Bundle2Section.from_field(SectionField(grid, v2_dim(d), vals), d)


def test_packed_dimension():
    """Test the number of packed symmetric components."""
    assert v2_dim(1) == 3
    assert v2_dim(3) == 10


def test_pack_inverts_unpack():
    """Test P E = 1 for the packing matrices."""
    for n in (2, 3, 4):
        np.testing.assert_allclose(pack_matrix(n) @ unpack_matrix(n), np.eye(n * (n + 1) // 2))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_reflection_trace_reversal_is_involutive(d):
    """Test that I^2 = 1 for the reflection coefficient in every dimension."""
    h = np.eye(d)[None]
    Imat = trace_reversal_field(h, trace_reversal_alpha(d, "reflection"))[0]
    np.testing.assert_allclose(Imat @ Imat, np.eye(v2_dim(d)), atol=1e-12)


def test_literal_trace_reversal_involutive_only_in_four_dimensions():
    """Test that coefficient 1/2 squares to one in spacetime dimension 4 only."""
    I3 = trace_reversal_field(np.eye(3)[None], 0.5)[0]
    np.testing.assert_allclose(I3 @ I3, np.eye(10), atol=1e-12)
    I2 = trace_reversal_field(np.eye(2)[None], 0.5)[0]
    assert np.max(np.abs(I2 @ I2 - np.eye(6))) > 1e-3


def test_trace_reversal_of_metric_direction():
    """Test that trace reversal maps g to (1 - alpha n) g."""
    grid = GridSpec(1, 4)
    d = 1
    g = np.diag([-1.0, 1.0])
    u = Bundle2Section.from_full(grid, np.broadcast_to(g, (grid.points, 2, 2)))
    out = trace_reversal(u, g, mode="literal").to_full()
    np.testing.assert_allclose(out, np.broadcast_to((1 - 0.5 * (d + 1)) * g, out.shape), atol=1e-12)


def test_check_spd_rejects_indefinite():
    """Test that an indefinite h0 raises NonPositiveMetricError."""
    with pytest.raises(NonPositiveMetricError):
        check_spd(np.diag([1.0, -1.0]))


def test_bundle_geometry_dimension_mismatch():
    """Test that h0 must match the grid dimension."""
    with pytest.raises(GridError):
        BundleGeometry(GridSpec(2, 4), np.eye(3))


def test_hermitian_form_signs():
    """Test the signs of the V2 form on the tt and t-sigma components."""
    d = 2
    grid = GridSpec(d, 4)
    volume = (2 * np.pi) ** d
    utt = _constant_section(grid, d, 0)
    uts = _constant_section(grid, d, 1)
    assert hermitian_form_v2(utt, utt, np.eye(d)) == pytest.approx(volume)
    assert hermitian_form_v2(uts, uts, np.eye(d)) == pytest.approx(-2 * volume)
    assert hermitian_form_v2(utt, utt, np.eye(d), normalization="v2") == pytest.approx(2 * volume)


def test_hermitian_form_rejects_non_positive_h0():
    """Test that the form refuses an indefinite spatial metric."""
    grid = GridSpec(1, 4)
    u = _constant_section(grid, 1, 0)
    with pytest.raises(NonPositiveMetricError):
        hermitian_form_v2(u, u, -np.eye(1))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_charge_identities_flat(d):
    """Test J2 and the physical charges on a flat fiber metric."""
    geo = BundleGeometry(GridSpec(d, 4), np.eye(d))
    charges = build_charges(geo)
    assert max(charges.identity_residuals.values()) < 1e-10
    for i in (1, 2):
        assert charges.q_phys[i].hermiticity_defect() < 1e-12
        assert charges.sigma_tilde[i].hermiticity_defect() < 1e-12


def test_charge_identities_curved_h0():
    """Test that the charge identities hold for an x-dependent h0."""
    grid = GridSpec(1, 8)
    x = grid.coordinates[:, 0]
    h0 = (1.0 + 0.3 * np.cos(x))[:, None, None]
    charges = build_charges(BundleGeometry(grid, h0))
    assert max(charges.identity_residuals.values()) < 1e-10


def test_literal_mode_reports_instead_of_raising():
    """Test that non-involutive literal trace reversal is reported, not enforced."""
    geo = BundleGeometry(GridSpec(2, 4), np.eye(2), trace_mode="literal")
    charges = build_charges(geo)
    assert charges.identity_residuals["J2_squared"] > 1e-3


def test_symplectic_adjoint_of_identity():
    """Test that the identity is its own symplectic adjoint."""
    geo = BundleGeometry(GridSpec(1, 4), np.eye(1))
    q = FiberForms.from_geometry(geo, 1).charge()
    one = DenseOperator.identity(geo.grid, 2 * geo.n1)
    assert (symplectic_adjoint(one, q) - one).norm() < 1e-12


def test_scalar_fiber_forms_charge():
    """Test that the scalar charge swaps the two Cauchy components."""
    grid = GridSpec(1, 4)
    q = FiberForms.scalar(grid).charge()
    f = np.concatenate([np.ones(4), np.zeros(4)])
    g = np.concatenate([np.zeros(4), np.ones(4)])
    assert q.pair(f, g) == pytest.approx(1.0)
    assert q.pair(f, f) == pytest.approx(0.0)
