"""Constraint equations on Cauchy data and the Einstein condition on metric families."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from ..bundles import check_spd
from ..core.logging import get_logger
from ..series import series_product
from ..spectral_core import GridSpec, spectral_derivative
from .metrics import MetricFamily
from .spacetime import lorentz_series, riemann_series

logger = get_logger(__name__)


@dataclass
class ConstraintResidual:
    hamiltonian: float
    momentum: float
    tolerance: float = 1e-10

    @property
    def passed(self) -> bool:
        return self.hamiltonian <= self.tolerance and self.momentum <= self.tolerance

    def to_dict(self) -> Dict[str, object]:
        return {"hamiltonian": self.hamiltonian, "momentum": self.momentum,
                "tolerance": self.tolerance, "passed": self.passed}


def _as_field(grid: GridSpec, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim == 2:
        t = t[None]
    return np.broadcast_to(t, (grid.points,) + t.shape[1:]).copy()


def _dx(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Stack of spatial derivatives: out[p, l, ...] = d_l values[p, ...]."""
    return np.stack([spectral_derivative(values, grid, ax) for ax in range(grid.dim)], axis=1)


def spatial_christoffel(grid: GridSpec, h: np.ndarray) -> np.ndarray:
    """Gamma[p, i, j, k] = Gamma^i_jk of the Riemannian metric h."""
    hinv = np.linalg.inv(h)
    dh = _dx(grid, h)
    S = (np.einsum("pjlk->pljk", dh) + np.einsum("pklj->pljk", dh) - dh)
    return 0.5 * np.einsum("pil,pljk->pijk", hinv, S)


def scalar_curvature(grid: GridSpec, h: np.ndarray) -> np.ndarray:
    """Scal(h) = h^{jk} (d_i G^i_jk - d_k G^i_ji + G^i_ie G^e_jk - G^i_ke G^e_ji)."""
    h = _as_field(grid, h)
    G = spatial_christoffel(grid, h)
    dG = _dx(grid, G)  # dG[p, l, i, j, k] = d_l G^i_jk
    ric = (np.einsum("piijk->pjk", dG) - np.einsum("pkiji->pjk", dG)
           + np.einsum("piie,pejk->pjk", G, G) - np.einsum("pike,peji->pjk", G, G))
    return np.einsum("pjk,pjk->p", np.linalg.inv(h), ric)


def constraint_check(
    grid: GridSpec, h0: np.ndarray, k0: np.ndarray, Lambda: float, tolerance: float = 1e-10
) -> ConstraintResidual:
    """
    Sup norms of the Hamiltonian constraint Scal(h) - tr((k h^-1)^2) + tr(k h^-1)^2 - 2 Lambda
    and the momentum constraint div_h(k - tr(k h^-1) h).
    """
    h = _as_field(grid, h0)
    k = _as_field(grid, k0)
    check_spd(h)
    hinv = np.linalg.inv(h)
    kh = k @ hinv
    ham = scalar_curvature(grid, h) - np.trace(kh @ kh, axis1=1, axis2=2) + np.trace(kh, axis1=1, axis2=2) ** 2
    ham = ham - 2.0 * Lambda
    pi = k - np.trace(kh, axis1=1, axis2=2)[:, None, None] * h
    G = spatial_christoffel(grid, h)
    dpi = _dx(grid, pi)  # dpi[p, l, i, j]
    cov = dpi - np.einsum("peli,pej->plij", G, pi) - np.einsum("pelj,pie->plij", G, pi)
    mom = np.einsum("pjl,plij->pi", hinv, cov)
    res = ConstraintResidual(float(np.max(np.abs(ham))), float(np.max(np.abs(mom))), tolerance)
    logger.debug(f"constraint residuals: {res.to_dict()}")
    return res


def constraint_check_metric(h: MetricFamily, Lambda: float, tolerance: float = 1e-10) -> ConstraintResidual:
    """Constraints of the data (h^(0), k = 1/2 h^(1)) induced by a metric family."""
    k0 = 0.5 * h.coeffs[1] if h.taylor_order >= 1 else np.zeros_like(h.coeffs[0])
    return constraint_check(h.grid, h.coeffs[0], k0, Lambda, tolerance)


def einstein_residual(h: MetricFamily, Lambda: float) -> List[float]:
    """
    Per-order max of Ric(g) - 2 Lambda / (n - 2) g for g = -dt^2 + h_t, n = d + 1.

    Valid through D - 2. In one space dimension the Einstein condition is
    vacuous and the plain Ricci tensor is reported.
    """
    n = h.dim + 1
    R = riemann_series(h)
    ric = np.einsum("tpabad->tpbd", R)
    g = lorentz_series(h)
    target = 2.0 * Lambda / (n - 2) * g if n > 2 else np.zeros_like(g)
    diff = ric - target
    return [float(np.max(np.abs(diff[j]))) for j in range(max(h.taylor_order - 1, 0))]
