"""
Wave operators of g = -dt^2 + h_t, their reduction to d_t^2 + a_i(t), and the
residual checks of the gauge identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..bundles import TraceReversalMode, pack_matrix, trace_reversal_alpha, unpack_matrix, v2_dim
from ..core.exceptions import TruncationError
from ..core.logging import get_logger
from ..series import TimeAnalyticOperator, series_inverse, series_matmul, series_product
from ..spectral_core import DenseOperator, GridSpec, adjoint
from .metrics import MetricFamily, determinant_scale_series, transport_series
from .spacetime import (
    SpacetimeOperator,
    box_operator,
    christoffel_series,
    covariant_derivative,
    first_slot_contraction,
    lorentz_inverse_series,
    lorentz_series,
    riemann_series,
)

logger = get_logger(__name__)


@dataclass
class WaveOperators:
    """Unreduced operators D1, D2, d, delta and I on V1 (full) and V2 (packed)."""

    grid: GridSpec
    Lambda: float
    alpha: float
    D1: SpacetimeOperator
    D2: SpacetimeOperator
    d: SpacetimeOperator
    delta: SpacetimeOperator
    I_E: SpacetimeOperator

    @property
    def K(self) -> SpacetimeOperator:
        return self.I_E @ self.d

    @property
    def P(self) -> SpacetimeOperator:
        return self.D2 - self.I_E @ (self.d @ self.delta)


def _const(grid: GridSpec, matrix: np.ndarray, order: int) -> SpacetimeOperator:
    return SpacetimeOperator.constant(grid, matrix, order)


def curvature_operator_series(g: np.ndarray, ginv: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Series of (Zu)_ab = -2 R_acbd g^{cp} g^{dq} u_pq on full n x n tensors."""
    n = g.shape[-1]
    low = series_product("pae,pecbd->pacbd", g, R)
    x = series_product("pacbd,pce->pabed", low, ginv)
    z = series_product("pabed,pdf->pabef", x, ginv)
    return -2.0 * z.reshape(z.shape[0], z.shape[1], n * n, n * n)


def trace_reversal_series(g: np.ndarray, ginv: np.ndarray, alpha: float) -> np.ndarray:
    """Series of the packed map u -> u - alpha tr_g(u) g."""
    n = g.shape[-1]
    m = v2_dim(n - 1)
    E, Pm = unpack_matrix(n), pack_matrix(n)
    packed_g = np.einsum("ij,tpj->tpi", Pm, g.reshape(g.shape[:2] + (n * n,)))
    trace_row = np.einsum("tpj,jb->tpb", ginv.reshape(ginv.shape[:2] + (n * n,)), E)
    out = -alpha * series_product("pa,pb->pab", packed_g, trace_row)
    out[0] += np.eye(m)
    return out


def build_wave_operators(h: MetricFamily, Lambda: float, trace_mode: TraceReversalMode = "literal") -> WaveOperators:
    """
    Assemble D1 = -box - Lambda, D2 = -box + 2 Riem, d = Sym nabla, delta = -2 div and I.

    Christoffel data costs one order and each second-order composition one more,
    so D1 and D2 are valid through D - 2.
    """
    grid = h.grid
    n = grid.dim + 1
    D = h.taylor_order
    gamma = christoffel_series(h)
    g, ginv = lorentz_series(h), lorentz_inverse_series(h)
    valid = D - 1

    box1 = box_operator(grid, gamma, ginv, 1, valid)
    D1 = box1.scale(-1.0) - _const(grid, Lambda * np.eye(n), D)

    E, Pm = unpack_matrix(n), pack_matrix(n)
    box2 = box_operator(grid, gamma, ginv, 2, valid)
    Z = SpacetimeOperator.multiplication(grid, curvature_operator_series(g, ginv, riemann_series(h, gamma)), D - 2)
    D2 = _const(grid, Pm, D) @ (box2.scale(-1.0) + Z) @ _const(grid, E, D)

    swap = np.eye(n * n).reshape(n, n, n, n).transpose(0, 1, 3, 2).reshape(n * n, n * n)
    sym = 0.5 * (np.eye(n * n) + swap)
    d_op = _const(grid, Pm @ sym, D) @ covariant_derivative(grid, gamma, 1, valid)

    nabla2 = covariant_derivative(grid, gamma, 2, valid)
    contract = SpacetimeOperator.multiplication(grid, first_slot_contraction(ginv), D)
    delta = (contract @ nabla2 @ _const(grid, E, D)).scale(-2.0)

    alpha = trace_reversal_alpha(grid.dim, trace_mode)
    I_E = SpacetimeOperator.multiplication(grid, trace_reversal_series(g, ginv, alpha), D)
    logger.debug(f"wave operators: D1 valid {D1.valid_order}, D2 valid {D2.valid_order}")
    return WaveOperators(grid, Lambda, alpha, D1, D2, d_op, delta, I_E)


def transport_frames(h: MetricFamily) -> Dict[str, np.ndarray]:
    """Series of W_i = s U_i and their inverses V_i, with U_2 = U_1 x U_1 on packed tensors."""
    d = h.dim
    n = d + 1
    u = transport_series(h)
    D1, P = u.shape[0], u.shape[1]
    U1 = np.zeros((D1, P, n, n))
    U1[0, :, 0, 0] = 1.0
    U1[:, :, 1:, 1:] = u
    kron = series_product("pac,pbd->pabcd", U1, U1).reshape(D1, P, n * n, n * n)
    U2 = np.einsum("ij,tpjk,kl->tpil", pack_matrix(n), kron, unpack_matrix(n))
    s = determinant_scale_series(h)[:, :, None, None]
    W1 = series_matmul(s * np.eye(n), U1)
    W2 = series_matmul(s * np.eye(v2_dim(d)), U2)
    return {"W1": W1, "W2": W2, "V1": series_inverse(W1), "V2": series_inverse(W2)}


def _term_residual(op: SpacetimeOperator, j: int, target: Optional[np.ndarray] = None) -> float:
    """Largest coefficient of the d_t^j terms (minus ``target`` at order 0) through the valid order."""
    worst = 0.0
    last = op.valid_order + 1
    for (jj, alpha), c in op.terms.items():
        if jj != j:
            continue
        c = c[:last].copy()
        if target is not None and not any(alpha):
            c[0] = c[0] - target
        worst = max(worst, float(np.max(np.abs(c))) if c.size else 0.0)
    return worst


@dataclass
class ReducedOperators:
    """Reduced operators d_t^2 + a_i(t) and d^ = d0 d_t + d1, with reduction diagnostics."""

    a1: TimeAnalyticOperator
    a2: TimeAnalyticOperator
    d0: TimeAnalyticOperator
    d1: TimeAnalyticOperator
    wave: WaveOperators
    frames: Dict[str, np.ndarray]
    leading_residual: Dict[int, float] = field(default_factory=dict)
    first_order_residual: Dict[int, float] = field(default_factory=dict)
    reduced: Dict[str, SpacetimeOperator] = field(default_factory=dict)

    @property
    def valid_order(self) -> int:
        return min(self.a1.valid_order, self.a2.valid_order, self.d0.valid_order, self.d1.valid_order)


def build_reduced_ops(
    h: MetricFamily,
    Lambda: float,
    trace_mode: TraceReversalMode = "literal",
    required_order: Optional[int] = None,
) -> ReducedOperators:
    """
    Conjugate D_i by the transport frames and split off the d_t terms.

    Args:
        h: Metric family (built with guard orders on top of the working order)
        Lambda: Cosmological constant
        trace_mode: Trace-reversal convention for I
        required_order: Order the reduced series must be valid through

    Returns:
        ReducedOperators with a_i, d0, d1 and the residuals of the elimination

    Raises:
        TruncationError: If the reduced series are not valid through ``required_order``
    """
    wave = build_wave_operators(h, Lambda, trace_mode)
    frames = transport_frames(h)
    grid = h.grid
    mult = SpacetimeOperator.multiplication
    D = h.taylor_order

    hat = {}
    hat["D1"] = mult(grid, frames["W1"], D) @ wave.D1 @ mult(grid, frames["V1"], D)
    hat["D2"] = mult(grid, frames["W2"], D) @ wave.D2 @ mult(grid, frames["V2"], D)
    hat["d"] = mult(grid, frames["W2"], D) @ wave.d @ mult(grid, frames["V1"], D)
    hat["I"] = mult(grid, frames["W2"], D) @ wave.I_E @ mult(grid, frames["V2"], D)

    n1, n2 = grid.dim + 1, v2_dim(grid.dim)
    leading = {1: _term_residual(hat["D1"], 2, np.eye(n1)), 2: _term_residual(hat["D2"], 2, np.eye(n2))}
    first = {1: _term_residual(hat["D1"], 1), 2: _term_residual(hat["D2"], 1)}
    logger.info(f"reduction residuals: leading {leading}, first-order {first}")

    red = ReducedOperators(
        a1=hat["D1"].time_block(0),
        a2=hat["D2"].time_block(0),
        d0=hat["d"].time_block(1),
        d1=hat["d"].time_block(0),
        wave=wave,
        frames=frames,
        leading_residual=leading,
        first_order_residual=first,
        reduced=hat,
    )
    if required_order is not None and required_order > red.valid_order:
        raise TruncationError(
            f"truncation overflow: reduced operators valid through {red.valid_order}, "
            f"{required_order} requested"
        )
    return red


def band_basis(grid: GridSpec, fiber: int, cutoff: float) -> np.ndarray:
    """Orthonormal plane waves with integer wavenumbers below ``cutoff``, one block per fiber slot."""
    P = grid.points
    mask = grid.band_mask(cutoff)
    waves = grid.dft_matrix.conj()[:, mask] / np.sqrt(P)
    cols = []
    for a in range(fiber):
        block = np.zeros((fiber * P, waves.shape[1]), dtype=complex)
        block[a * P:(a + 1) * P] = waves
        cols.append(block)
    return np.concatenate(cols, axis=1)


def band_norm(op: DenseOperator, cutoff: float) -> float:
    """2-norm of ``op`` restricted to band-limited inputs."""
    if op.is_multiplier:
        mask = op.grid.band_mask(cutoff)
        sym = op.symbols[mask]
        return float(np.max(np.linalg.norm(sym, ord=2, axis=(1, 2)))) if sym.size else 0.0
    B = band_basis(op.grid, op.fiber_in, cutoff)
    return float(np.linalg.norm(op.matrix @ B, 2))


@dataclass
class ResidualSeries:
    """Per-order absolute and relative norms of one identity residual."""

    name: str
    absolute: List[float]
    relative: List[float]

    @property
    def max_relative(self) -> float:
        return max(self.relative, default=0.0)

    def to_dict(self) -> Dict[str, object]:
        return {"absolute": self.absolute, "relative": self.relative, "max_relative": self.max_relative}


def _residual(name: str, terms: List[TimeAnalyticOperator], through: int, cutoff: float) -> ResidualSeries:
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    absolute, relative = [], []
    for k in range(min(through, total.taylor_order) + 1):
        res = band_norm(total.coeffs[k], cutoff)
        scale = max([1.0] + [band_norm(t.coeffs[k], cutoff) for t in terms if t.taylor_order >= k])
        absolute.append(res)
        relative.append(res / scale)
    return ResidualSeries(name, absolute, relative)


def _spacetime_residual(name: str, op: SpacetimeOperator, scale_ops: List[SpacetimeOperator]) -> ResidualSeries:
    """Largest coefficient of ``op`` per Taylor order, relative to the operands."""
    last = op.valid_order
    absolute, relative = [], []
    scale = [max(s.coefficient_norms()[k] for s in scale_ops) for k in range(last + 1)] if last >= 0 else []
    norms = op.coefficient_norms()
    for k in range(last + 1):
        absolute.append(norms[k] if op.terms else 0.0)
        relative.append(absolute[-1] / max(1.0, scale[k]))
    return ResidualSeries(name, absolute, relative)


@dataclass
class GaugeResidualReport:
    residuals: Dict[str, ResidualSeries]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r.max_relative <= self.tolerance for r in self.residuals.values())

    def to_dict(self) -> Dict[str, object]:
        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "residuals": {k: v.to_dict() for k, v in self.residuals.items()},
        }


def gauge_residuals(
    red: ReducedOperators,
    through: Optional[int] = None,
    cutoff: Optional[float] = None,
    tolerance: float = 1e-8,
    include_spacetime: bool = True,
) -> GaugeResidualReport:
    """
    Residuals of d^ D^_1 = D^_2 d^ split by powers of d_t, plus PK = 0, D2 K = K D1
    and the trace-reversal intertwining I^ D^_2 = D^_2 I^.

    Residuals are evaluated coefficient-wise through ``through`` (default: the
    valid order minus one) on band-limited test sections.
    """
    a1, a2, d0, d1 = red.a1, red.a2, red.d0, red.d1
    grid = a1.grid
    cutoff = cutoff if cutoff is not None else max(1, grid.n_per_axis // 4)
    through = red.valid_order - 1 if through is None else through
    if through > red.valid_order - 1:
        raise TruncationError(f"truncation overflow: residuals through {through} need order {through + 1}")

    out: Dict[str, ResidualSeries] = {}
    out["i"] = _residual("i", [d0.derivative()], through, cutoff)
    out["ii"] = _residual("ii", [d1.derivative().scale(2.0), a2 @ d0, (d0 @ a1).scale(-1.0)], through, cutoff)
    out["iii"] = _residual(
        "iii",
        [d1.derivative().derivative(), a2 @ d1, (d1 @ a1).scale(-1.0), (d0 @ a1.derivative()).scale(-1.0)],
        through - 1,
        cutoff,
    )
    if include_spacetime:
        w = red.wave
        K = w.K
        out["PK"] = _spacetime_residual("PK", w.P @ K, [w.D2 @ K, K @ w.D1])
        out["D2K-KD1"] = _spacetime_residual("D2K-KD1", w.D2 @ K - K @ w.D1, [w.D2 @ K, K @ w.D1])
        Ihat, D2hat = red.reduced["I"], red.reduced["D2"]
        out["I-intertwining"] = _spacetime_residual(
            "I-intertwining", Ihat @ D2hat - D2hat @ Ihat, [Ihat @ D2hat]
        )
    report = GaugeResidualReport(out, tolerance)
    logger.info("gauge residuals: " + ", ".join(f"{k}={v.max_relative:.2e}" for k, v in out.items()))
    return report


def self_adjoint_defect(a0: DenseOperator, weight: DenseOperator, cutoff: float) -> float:
    """Relative band norm of a0^* - a0 for the indefinite fiber form ``weight``."""
    from ..spectral_core import InnerProduct

    adj = adjoint(a0, InnerProduct(weight, "indefinite"))
    return band_norm(adj - a0, cutoff) / max(band_norm(a0, cutoff), 1e-300)


def principal_symbol_defect(a0: DenseOperator, h0: np.ndarray) -> float:
    """
    Relative distance of the degree-two part of the symbol of ``a0`` from (k.h0^-1 k) 1.

    For an x-independent symbol polynomial of degree two in k, (a(2k) - 2 a(k) + a(0)) / 2
    is exactly its homogeneous top part. Evaluated on every k with 2k strictly inside the
    lattice. Returns NaN when ``a0`` is not a Fourier multiplier or no such k exists.
    """
    if not a0.is_multiplier:
        return float("nan")
    grid = a0.grid
    lattice = np.rint(grid.wavenumbers * grid.period / (2 * np.pi)).astype(int)
    index = {tuple(v): p for p, v in enumerate(lattice)}
    hinv = np.linalg.inv(np.asarray(h0).reshape(-1, grid.dim, grid.dim)[0])
    sym = a0.symbols
    eye = np.eye(a0.fiber_in)
    zero = sym[index[(0,) * grid.dim]]
    worst = float("nan")
    for p, v in enumerate(lattice):
        if not v.any() or np.any(np.abs(2 * v) >= grid.n_per_axis // 2):
            continue
        k = grid.wavenumbers[p]
        quad = float(k @ hinv @ k)
        top = 0.5 * (sym[index[tuple(2 * v)]] - 2.0 * sym[p] + zero)
        defect = float(np.linalg.norm(top - quad * eye, ord=2)) / quad
        worst = defect if np.isnan(worst) else max(worst, defect)
    return worst
