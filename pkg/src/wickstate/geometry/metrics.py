"""
Metric families h_t on the torus, given as truncated Taylor series in t.

Coefficient arrays have shape (D+1, P, d, d) with P = 1 for x-independent
presets and P = grid.points otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..bundles import check_spd
from ..core.exceptions import GridError, NonPositiveMetricError, ScenarioError
from ..core.logging import get_logger
from ..series import (
    TimeAnalyticOperator,
    exponential_coefficients,
    series_derivative,
    series_exp,
    series_integrate,
    series_inverse,
    series_matmul,
    series_trace,
)
from ..spectral_core import DenseOperator, GridSpec

logger = get_logger(__name__)


@dataclass
class MetricFamily:
    grid: GridSpec
    coeffs: np.ndarray
    preset_name: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 4 or self.coeffs.shape[-1] != self.grid.dim:
            raise GridError(f"metric coefficients must have shape (D+1, P, d, d), got {self.coeffs.shape}")
        if self.coeffs.shape[1] not in (1, self.grid.points):
            raise GridError("metric points axis must be 1 or grid.points")
        if not np.allclose(self.coeffs, np.swapaxes(self.coeffs, -1, -2)):
            raise NonPositiveMetricError("metric coefficients must be symmetric")
        self.min_eigenvalue = check_spd(self.coeffs[0], what="h^(0)")

    @property
    def taylor_order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def h0(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def is_static(self) -> bool:
        return bool(np.all(self.coeffs[1:] == 0))

    def truncate(self, order: int) -> "MetricFamily":
        return MetricFamily(self.grid, self.coeffs[: order + 1], self.preset_name, dict(self.params))


def _identity_series(grid: GridSpec, order: int, scalars: np.ndarray) -> np.ndarray:
    eye = np.eye(grid.dim)
    return np.asarray(scalars, dtype=float)[:, None, None, None] * eye[None, None]


def static_flat(grid: GridSpec, order: int) -> MetricFamily:
    scal = np.zeros(order + 1)
    scal[0] = 1.0
    return MetricFamily(grid, _identity_series(grid, order, scal), "static-flat")


def desitter_flat(grid: GridSpec, order: int, H: float = 1.0) -> MetricFamily:
    """Flat slicing h_t = e^{2Ht} delta."""
    scal = exponential_coefficients(2.0 * H, order)
    return MetricFamily(grid, _identity_series(grid, order, scal), "desitter-flat", {"H": H})


def polynomial(grid: GridSpec, order: int, c: float = 1.0) -> MetricFamily:
    """h_t = (1 + c t^2) delta, not Einstein for c != 0."""
    scal = np.zeros(order + 1)
    scal[0] = 1.0
    if order >= 2:
        scal[2] = c
    return MetricFamily(grid, _identity_series(grid, order, scal), "polynomial", {"c": c})


def linear(grid: GridSpec, order: int, c: float = 1.0) -> MetricFamily:
    """h_t = (1 + c t) delta."""
    scal = np.zeros(order + 1)
    scal[0] = 1.0
    if order >= 1:
        scal[1] = c
    return MetricFamily(grid, _identity_series(grid, order, scal), "linear", {"c": c})


def random_analytic(
    grid: GridSpec, order: int, seed: int = 0, amplitude: float = 0.1, modes: int = 1
) -> MetricFamily:
    """
    x-dependent metric h_t = h^(0) + sum_n t^n h^(n) with band-limited symmetric
    coefficients of size amplitude^n / n! on top of a positive h^(0).
    """
    rng = np.random.default_rng(seed)
    d = grid.dim
    mask = grid.band_mask(modes)
    coeffs = np.zeros((order + 1, grid.points, d, d))
    for n in range(order + 1):
        spec = rng.standard_normal((grid.points, d, d)) * mask[:, None, None]
        fld = np.real(grid.ifft(spec.astype(complex))) * grid.points / max(mask.sum(), 1)
        fld = 0.5 * (fld + np.swapaxes(fld, -1, -2))
        coeffs[n] = amplitude ** max(n, 1) / factorial(n) * fld
    coeffs[0] += np.eye(d)
    return MetricFamily(grid, coeffs, "random-analytic",
                        {"seed": seed, "amplitude": amplitude, "modes": modes})


_PRESETS: Dict[str, Callable[..., MetricFamily]] = {
    "static-flat": static_flat,
    "desitter-flat": desitter_flat,
    "polynomial": polynomial,
    "linear": linear,
    "random-analytic": random_analytic,
}


def list_presets() -> List[str]:
    return sorted(_PRESETS)


def build_metric(grid: GridSpec, preset: str, order: int, params: Optional[Dict[str, Any]] = None) -> MetricFamily:
    """
    Build a preset metric family.

    Raises:
        ScenarioError: If the preset is unknown or its parameters are rejected
    """
    if preset not in _PRESETS:
        raise ScenarioError(f"Unknown metric preset '{preset}'. Available: {', '.join(list_presets())}")
    try:
        return _PRESETS[preset](grid, order, **(params or {}))
    except TypeError as e:
        raise ScenarioError(f"Invalid parameters for metric preset '{preset}': {e}") from e


def _pointwise_series(grid: GridSpec, series: np.ndarray, valid: int) -> TimeAnalyticOperator:
    return TimeAnalyticOperator([DenseOperator.pointwise(grid, c) for c in series], valid_order=valid)


def r_series(h: MetricFamily) -> np.ndarray:
    """Field series of r = 1/2 (d_t h) h^{-1}."""
    return 0.5 * series_matmul(series_derivative(h.coeffs), series_inverse(h.coeffs))


def r_tensor(h: MetricFamily) -> TimeAnalyticOperator:
    """r = 1/2 d_t h h^{-1} as a pointwise multiplication operator series."""
    if h.taylor_order < 1:
        raise GridError("r_tensor needs taylor_order >= 1")
    return _pointwise_series(h.grid, r_series(h), h.taylor_order - 1)


def transport_series(h: MetricFamily) -> np.ndarray:
    """Taylor coefficients of u with u' = -u r, u(0) = 1."""
    r = r_series(h)
    D = h.taylor_order
    P = r.shape[1]
    u = np.zeros((D + 1, P, h.dim, h.dim))
    u[0] = np.eye(h.dim)
    for n in range(D):
        acc = np.zeros((P, h.dim, h.dim))
        for m in range(n + 1):
            acc += u[m] @ r[n - m]
        u[n + 1] = -acc / (n + 1)
    return u


def transport_invariance_residual(h: MetricFamily) -> np.ndarray:
    """Per-order max |coefficient of u h u^T - h0| through order D - 1."""
    u = transport_series(h)
    uT = np.swapaxes(u, -1, -2)
    prod = series_matmul(series_matmul(u, h.coeffs), uT)
    prod[0] -= h.coeffs[0]
    return np.array([float(np.max(np.abs(prod[n]))) for n in range(h.taylor_order)])


def parallel_transport(h: MetricFamily) -> TimeAnalyticOperator:
    """u(t) solving d_t u = -u r with u(0) = 1, as a multiplication operator series."""
    if h.taylor_order < 1:
        raise GridError("parallel_transport needs taylor_order >= 1")
    res = transport_invariance_residual(h)
    logger.debug(f"transport invariance residuals per order: {res}")
    return _pointwise_series(h.grid, transport_series(h), h.taylor_order)


def determinant_scale_series(h: MetricFamily) -> np.ndarray:
    """s_t = |h_t|^{1/4} |h_0|^{-1/4}, via exp(1/4 int tr(h^{-1} d_t h))."""
    rate = series_trace(series_matmul(series_inverse(h.coeffs), series_derivative(h.coeffs)))
    return series_exp(0.25 * series_integrate(rate))
