"""Tests for wickstate.gauge_states module."""

import numpy as np
import pytest

from wickstate.bundles import BundleGeometry, build_charges
from wickstate.core.exceptions import GaugeFixError, MissingArtifactError
from wickstate.gauge_states import (
    PositivityResult,
    build_gauge_surface_ops,
    complement_slice,
    gauge_condition_operator,
    intertwine_profile,
    kernel_slice,
    principal_ratio_spread,
    state_conditions_report,
)
from wickstate.geometry.metrics import static_flat
from wickstate.geometry.reduction import build_reduced_ops
from wickstate.spectral_core import DenseOperator, GridSpec


def _flat_surface(n=8):
    grid = GridSpec(1, n)
    h = static_flat(grid, 6)
    red = build_reduced_ops(h, 0.0, required_order=4)
    geo = BundleGeometry(grid, h.h0)
    return red, geo, build_charges(geo)


def test_surface_transfer_matches_wick_transfer():
    """Test that T_Sigma equals the rotated transfer and K^dagger is built consistently."""
    red, geo, charges = _flat_surface()
    ops = build_gauge_surface_ops(red.a1, red.a2, red.d0, red.d1, geo.I2, charges)
    assert ops.residuals["transfer_wick"] <= 1e-12
    assert ops.residuals["construction"] <= 1e-12
    assert ops.residuals["I_sigma_squared"] <= 1e-12
    assert ops.n1 == geo.n1
    assert ops.n2 == geo.n2


def test_wick_scale_divides_out():
    """Test that the Euclidean normalization is removed before comparing."""
    red, geo, charges = _flat_surface()
    ops = build_gauge_surface_ops(red.a1, red.a2, red.d0, red.d1, geo.I2, charges, wick_scale=2.5)
    assert ops.residuals["transfer_wick"] <= 1e-12


def test_strict_surface_ops_raise():
    """Test that strict mode refuses K^dagger K above the tolerance."""
    red, geo, charges = _flat_surface()
    with pytest.raises(GaugeFixError, match="K\\^dagger K"):
        build_gauge_surface_ops(red.a1, red.a2, red.d0, red.d1, geo.I2, charges,
                                tolerance=-1.0, strict=True)


def test_gauge_condition_operator_flat():
    """Test that L kills traceless data without mixed part and detects the trace."""
    grid = GridSpec(1, 4)
    L = gauge_condition_operator(BundleGeometry(grid, np.eye(1)))
    P = grid.points
    traceless = np.concatenate([np.ones(P), np.zeros(P), np.ones(P)])
    np.testing.assert_allclose(L.apply(traceless), 0.0, atol=1e-14)
    pure_tt = np.concatenate([np.ones(P), np.zeros(P), np.zeros(P)])
    np.testing.assert_allclose(L.apply(pure_tt)[:P], -1.0)
    mixed = np.concatenate([np.zeros(P), np.ones(P), np.zeros(P)])
    np.testing.assert_allclose(L.apply(mixed)[P:], 1.0)


def test_principal_ratio_spread():
    """Test the spread of sigma(H) / <k> for an exact first-order symbol and for dense H."""
    grid = GridSpec(1, 16)
    H = DenseOperator.multiplier(grid, np.sqrt(1.0 + grid.k_abs ** 2)[:, None, None])
    assert principal_ratio_spread(H) == pytest.approx(1.0)
    x = grid.coordinates[:, 0]
    dense = DenseOperator.pointwise(grid, (2.0 + np.cos(x))[:, None, None])
    assert principal_ratio_spread(dense) is None


def test_intertwine_profile_vanishes_for_commuting_data():
    """Test that c K - K c = 0 for K = 1 gives a passing zero profile."""
    grid = GridSpec(1, 8)
    c = DenseOperator.multiplier(grid, np.diag([1.0, 0.0])[None])
    one = DenseOperator.identity(grid, 2)
    table = intertwine_profile(c, c, one)
    assert table.all_pass
    assert table.max_constant == 0.0


def test_kernel_slice_extremes():
    """Test the kernel slice of the zero operator and of the identity."""
    grid = GridSpec(1, 8)
    zero = DenseOperator.zeros(grid, 2, 2)
    full = kernel_slice(zero, 2.0)
    assert full.shape == (2 * grid.points, 2 * int(grid.band_mask(2.0).sum()))
    empty = kernel_slice(DenseOperator.identity(grid, 2), 2.0)
    assert empty.shape[1] == 0
    assert complement_slice(DenseOperator.identity(grid, 2), empty, 2.0).shape[1] == full.shape[1]
    assert kernel_slice(zero, 2.0, cap=3).shape[1] == 3


def test_positivity_result_margin():
    """Test that the margin adds the measured smoothing bound to the minimum."""
    result = PositivityResult(kernel_rank=2, min_value=-0.1, min_energy=0.5,
                              smoothing_bound=0.3, negative_control_min=-1.0)
    assert result.margin == pytest.approx(0.2)
    assert result.to_dict()["margin"] == pytest.approx(0.2)
    assert result.to_dict()["margin_minus"] is None


def test_positivity_margin_takes_worst_branch():
    """Test that a failing minus branch drives the reported margin."""
    result = PositivityResult(kernel_rank=2, min_value=0.1, min_energy=0.5, smoothing_bound=0.0,
                              negative_control_min=-1.0, min_value_minus=-0.4, min_energy_minus=0.2,
                              smoothing_bound_minus=0.1)
    assert result.margin_plus == pytest.approx(0.1)
    assert result.margin_minus == pytest.approx(-0.3)
    assert result.margin == pytest.approx(-0.3)
    assert result.min_energy_all == pytest.approx(0.2)


def test_state_report_requires_artifacts():
    """Test that a missing upstream artifact raises MissingArtifactError."""
    with pytest.raises(MissingArtifactError):
        state_conditions_report({"hadamard": {}, "calderon": {}})
