"""
Gauge operators on Cauchy data and the state conditions built on them.

K_Sigma = I_Sigma T_Sigma transports gauge data of V1 to V2, K_Sigma^dagger is its adjoint
for the physical charges. The boundary gauge fix, the synchronous decomposition
and positivity on Ker K_Sigma^dagger all run on band-limited data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .bundles import BundleGeometry, ChargeSet, unpack_matrix
from .core.exceptions import GaugeFixError, MissingArtifactError
from .core.logging import get_logger
from .core.models import CheckRecord
from .core.registry import make_record
from .euclidean import CalderonProjectors, charge_selfadjoint_defect, wick_rotate_differential
from .factorization import HadamardProjectors, frequency_sign_proxy
from .geometry.reduction import band_basis
from .series import TimeAnalyticOperator
from .spectral_core import DecayTable, DenseOperator, smoothing_order_profile

logger = get_logger(__name__)


def _blk(a: DenseOperator, b: DenseOperator, c: DenseOperator, d: DenseOperator) -> DenseOperator:
    return DenseOperator.block([[a, b], [c, d]])


def surface_transfer(
    a1: TimeAnalyticOperator, a2: TimeAnalyticOperator, d0: TimeAnalyticOperator, d1: TimeAnalyticOperator
) -> DenseOperator:
    """T_Sigma = [[d1, i d0], [i/2 (d0 a1 + a2 d0), d1]] at t = 0."""
    A1, A2, D0, D1 = a1.coeffs[0], a2.coeffs[0], d0.coeffs[0], d1.coeffs[0]
    return _blk(D1, D0.scale(1j), (D0 @ A1 + A2 @ D0).scale(0.5j), D1)


def wick_surface_transfer(
    a1: TimeAnalyticOperator, a2: TimeAnalyticOperator, d0: TimeAnalyticOperator, d1: TimeAnalyticOperator
) -> DenseOperator:
    """T~_Sigma = [[d~1, -d~0], [-1/2 (d~0 a~1 + a~2 d~0), d~1]] at s = 0, from the rotated operators."""
    dt0, dt1 = wick_rotate_differential(d0, d1)
    at1, at2 = a1.wick_rotate(), a2.wick_rotate()
    D0, D1 = dt0.coeffs[0], dt1.coeffs[0]
    return _blk(D1, D0.scale(-1.0), (D0 @ at1.coeffs[0] + at2.coeffs[0] @ D0).scale(-0.5), D1)


@dataclass
class GaugeSurfaceOps:
    T_sigma: DenseOperator
    T_tilde: DenseOperator
    I_sigma: DenseOperator
    K_sigma: DenseOperator
    K_dagger: DenseOperator
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def n1(self) -> int:
        return self.K_sigma.fiber_in // 2

    @property
    def n2(self) -> int:
        return self.K_sigma.fiber_out // 2


def build_gauge_surface_ops(
    a1: TimeAnalyticOperator,
    a2: TimeAnalyticOperator,
    d0: TimeAnalyticOperator,
    d1: TimeAnalyticOperator,
    I2: DenseOperator,
    charges: ChargeSet,
    tolerance: float = 1e-10,
    strict: bool = False,
    wick_scale: float = 1.0,
) -> GaugeSurfaceOps:
    """
    Assemble T_Sigma, K_Sigma = I_Sigma T_Sigma and K^dagger with q1 K^dagger = K^* q2
    (physical charges). The Euclidean transfer carries the normalization ``wick_scale``
    of K~ = kappa I~ d~ and is compared after dividing it out.

    Raises:
        GaugeFixError: If ``strict`` and the relative size of K^dagger K exceeds ``tolerance``
    """
    T = surface_transfer(a1, a2, d0, d1)
    Tt = wick_surface_transfer(a1, a2, d0, d1).scale(wick_scale)
    z = DenseOperator.zeros(I2.grid, I2.fiber_in, I2.fiber_out)
    I_sigma = _blk(I2, z, z, I2)
    K = I_sigma @ T
    G1, G2 = charges.q_phys[1].gram, charges.q_phys[2].gram
    K_dag = G1.inverse() @ K.H @ G2
    scale = max(K.norm() * K_dag.norm(), 1e-300)
    eye = DenseOperator.identity(I2.grid, 2 * I2.fiber_in)
    residuals = {
        "transfer_wick": (T - Tt.scale(1.0 / wick_scale)).norm() / max(T.norm(), 1e-300),
        "kdagger_k": (K_dag @ K).norm() / scale,
        "construction": (G1 @ K_dag - K.H @ G2).norm() / max((K.H @ G2).norm(), 1e-300),
        "I_sigma_squared": (I_sigma @ I_sigma - eye).norm(),
    }
    logger.info(f"gauge surface operators: {residuals}")
    if strict and residuals["kdagger_k"] > tolerance:
        raise GaugeFixError(
            f"K^dagger K = {residuals['kdagger_k']:.3e} exceeds {tolerance:.1e}; "
            "reduced operators are inconsistent"
        )
    return GaugeSurfaceOps(T, Tt, I_sigma, K, K_dag, residuals)


def _square_embed(R: DenseOperator) -> DenseOperator:
    """[[0, 0], [R, 0]]: square operator whose columns carry those of R."""
    g = R.grid
    top = [DenseOperator.zeros(g, R.fiber_in, R.fiber_in), DenseOperator.zeros(g, R.fiber_out, R.fiber_in)]
    bottom = [R, DenseOperator.zeros(g, R.fiber_out, R.fiber_out)]
    return DenseOperator.block([top, bottom])


def intertwine_profile(
    c1: DenseOperator, c2: DenseOperator, K: DenseOperator,
    m_list: Sequence[int] = (1, 2, 3, 4), bound: float = 10.0, label: str = "",
) -> DecayTable:
    """Decay profile of c2 K - K c1."""
    return smoothing_order_profile(_square_embed(c2 @ K - K @ c1), m_list, bound, label=label)


def gauge_intertwine_residual(
    c_tilde1: CalderonProjectors, c_tilde2: CalderonProjectors, K_sigma: DenseOperator,
    m_list: Sequence[int] = (1, 2, 3, 4), bound: float = 10.0,
) -> Dict[str, DecayTable]:
    """Profiles of the obstruction K_-infinity = c~2^+- K - K c~1^+- for both signs."""
    return {
        "+": intertwine_profile(c_tilde1.c_plus, c_tilde2.c_plus, K_sigma, m_list, bound, "c~2+ K - K c~1+"),
        "-": intertwine_profile(c_tilde1.c_minus, c_tilde2.c_minus, K_sigma, m_list, bound, "c~2- K - K c~1-"),
    }


def lorentzian_intertwine_residual(
    c1: HadamardProjectors, c2: HadamardProjectors, K_sigma: DenseOperator,
    m_list: Sequence[int] = (1, 2, 3, 4), bound: float = 10.0,
) -> Dict[str, DecayTable]:
    return {
        "+": intertwine_profile(c1.c_plus, c2.c_plus, K_sigma, m_list, bound, "c2+ K - K c1+"),
        "-": intertwine_profile(c1.c_minus, c2.c_minus, K_sigma, m_list, bound, "c2- K - K c1-"),
    }


def gauge_condition_operator(geo: BundleGeometry) -> DenseOperator:
    """
    L: V2 -> V1 on Sigma. Row 0 is the g0-trace, rows j = 1..d pick the mixed
    components u_{0j}. L v = 0 iff v has no mixed part and I2 v = v.
    """
    n = geo.d + 1
    E = unpack_matrix(n)
    P = geo.h0.shape[0]
    rows = np.zeros((P, n, E.shape[1]))
    ginv = np.zeros((P, n, n))
    ginv[:, 0, 0] = -1.0
    ginv[:, 1:, 1:] = np.linalg.inv(geo.h0)
    rows[:, 0] = ginv.reshape(P, n * n) @ E
    for j in range(1, n):
        rows[:, j, j] = 1.0
    return DenseOperator.pointwise(geo.grid, rows)


def _smallest_singular_value(H: DenseOperator) -> float:
    if H.is_multiplier:
        return float(np.min(np.linalg.svd(H.symbols, compute_uv=False)))
    return float(np.min(linalg.svdvals(H.matrix)))


def principal_ratio_spread(H: DenseOperator, fraction: float = 0.75) -> Optional[float]:
    """max / min of sigma(H(k)) / <k> over modes with |k| >= fraction * max |k|; None for dense H."""
    if not H.is_multiplier:
        return None
    k_abs = H.grid.k_abs
    sel = k_abs >= fraction * k_abs.max()
    sv = np.linalg.svd(H.symbols[sel], compute_uv=False)
    ratios = sv / np.sqrt(1.0 + k_abs[sel] ** 2)[:, None]
    return float(ratios.max() / ratios.min())


@dataclass
class GaugeFix:
    """Boundary gauge fix: y = w|_Sigma, h = rho~+ w and the gauge-fixed trace v|_Sigma."""

    y: np.ndarray
    h: np.ndarray
    v_trace: np.ndarray
    residuals: Dict[str, float]
    smallest_singular_value: float


class GaugeFixer:
    """
    Solves the gauge condition L (u - K~w)|_Sigma = 0 for D~1-harmonic w on Omega+.

    The trace of K~w at Sigma is E y with E = (K_Sigma)_00 + (K_Sigma)_01 N_+ and y = w|_Sigma,
    so the system reads H y = L u|_Sigma with H = L E.
    """

    def __init__(self, ops: GaugeSurfaceOps, N_plus: DenseOperator, L: DenseOperator, I2: DenseOperator):
        n1, n2 = ops.n1, ops.n2
        K = ops.K_sigma
        self.ops = ops
        self.N_plus = N_plus
        self.L = L
        self.I2 = I2
        self.E = K.block_of(slice(0, n2), slice(0, n1)) + K.block_of(slice(0, n2), slice(n1, 2 * n1)) @ N_plus
        self.H = L @ self.E
        self.smallest_singular_value = _smallest_singular_value(self.H)
        scale = max(self.H.norm(), 1e-300)
        if self.smallest_singular_value < 1e-12 * scale:
            raise GaugeFixError(
                f"gauge-fix operator H is singular (smallest singular value {self.smallest_singular_value:.3e})"
            )
        self.H_inv = self.H.inverse()
        logger.debug(f"gauge fix: smallest singular value of H {self.smallest_singular_value:.3e}")

    def solve(self, u_trace: np.ndarray) -> GaugeFix:
        """Gauge-fix V2 boundary values ``u_trace`` (one vector or columns)."""
        u = np.asarray(u_trace, dtype=complex)
        y = self.H_inv.apply(self.L.apply(u))
        h = np.concatenate([y, self.N_plus.apply(y)])
        v = u - self.ops.K_sigma.apply(h)[: u.shape[0]]
        n1 = self.ops.n1
        P = self.L.grid.points
        Lv = self.L.apply(v)
        scale = max(1.0, float(np.linalg.norm(u)))
        residuals = {
            "mixed": float(np.linalg.norm(Lv[P:n1 * P])) / scale,
            "trace_reversal": float(np.linalg.norm(self.I2.apply(v) - v)) / scale,
        }
        return GaugeFix(y, h, v, residuals, self.smallest_singular_value)


@dataclass
class SynchronousDecomposition:
    k: np.ndarray
    h: np.ndarray
    residuals: Dict[str, float]


def synchronous_decompose(
    f: np.ndarray,
    fixer: GaugeFixer,
    c_tilde1: CalderonProjectors,
    c_tilde2: CalderonProjectors,
    charges: ChargeSet,
) -> SynchronousDecomposition:
    """
    c~2^+ f = k + K_Sigma c~1^+ h with J2 k = k. The boundary values of the Omega+ solution
    with Cauchy data c~2^+ f are gauge fixed; h is the Cauchy data of the gauge parameter.
    """
    K = fixer.ops.K_sigma
    cf = c_tilde2.c_plus.apply(f)
    n2P = fixer.ops.n2 * K.grid.points
    fix = fixer.solve(cf[:n2P])
    k = cf - K.apply(fix.h)
    J2 = charges.J2.matrix
    scale = max(1.0, float(np.linalg.norm(f)))
    k_sym = 0.5 * (k + J2.apply(k))
    residuals = {
        "j2": float(np.linalg.norm(J2.apply(k) - k)) / scale,
        "reconstruction": float(np.linalg.norm(cf - k - K.apply(c_tilde1.c_plus.apply(fix.h)))) / scale,
        "h_fixed": float(np.linalg.norm(c_tilde1.c_plus.apply(fix.h) - fix.h)) / scale,
        "j2_charge": abs(charges.q_phys[2].pair(k_sym, k_sym) - charges.q_tilde[2].pair(k_sym, k_sym))
        / max(abs(charges.q_tilde[2].pair(k_sym, k_sym)), 1e-300),
    }
    residuals.update({f"gauge_fix_{name}": v for name, v in fix.residuals.items()})
    return SynchronousDecomposition(k, fix.h, residuals)


def kernel_slice(
    K_dagger: DenseOperator, cutoff: float, sv_cutoff: float = 1e-10, cap: Optional[int] = None
) -> np.ndarray:
    """
    Orthonormal basis of the numerical null space of K^dagger on band-limited Cauchy data
    (columns of the flat section space), at most ``cap`` columns.
    """
    B = band_basis(K_dagger.grid, K_dagger.fiber_in, cutoff)
    M = K_dagger.apply(B)
    scale = max(float(np.linalg.norm(M, 2)), 1e-300)
    Z = linalg.null_space(M / scale, rcond=sv_cutoff)
    basis = B @ Z
    if cap is not None and basis.shape[1] > cap:
        basis = basis[:, :cap]
    logger.info(f"kernel slice of K^dagger: rank {basis.shape[1]} of {B.shape[1]} band-limited columns")
    return basis


def complement_slice(K_dagger: DenseOperator, kernel: np.ndarray, cutoff: float) -> np.ndarray:
    """Band-limited columns orthogonal to ``kernel``."""
    B = band_basis(K_dagger.grid, K_dagger.fiber_in, cutoff)
    R = B - kernel @ (kernel.conj().T @ B)
    return linalg.orth(R)


def _hermitian_min(Q: np.ndarray) -> float:
    if Q.size == 0:
        return 0.0
    return float(np.min(np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))))


@dataclass
class PositivityResult:
    kernel_rank: int
    min_value: float
    min_energy: float
    smoothing_bound: float
    negative_control_min: float
    sampled_values: List[float] = field(default_factory=list)
    min_value_minus: Optional[float] = None
    min_energy_minus: Optional[float] = None
    smoothing_bound_minus: Optional[float] = None

    @property
    def margin_plus(self) -> float:
        return self.min_value + self.smoothing_bound

    @property
    def margin_minus(self) -> Optional[float]:
        if self.min_value_minus is None:
            return None
        return self.min_value_minus + (self.smoothing_bound_minus or 0.0)

    @property
    def margin(self) -> float:
        """Worst margin over the evaluated branches."""
        minus = self.margin_minus
        return self.margin_plus if minus is None else min(self.margin_plus, minus)

    @property
    def min_energy_all(self) -> float:
        if self.min_energy_minus is None:
            return self.min_energy
        return min(self.min_energy, self.min_energy_minus)

    def to_dict(self) -> Dict[str, object]:
        return {
            "kernel_rank": self.kernel_rank,
            "min_value": self.min_value,
            "min_energy": self.min_energy,
            "smoothing_bound": self.smoothing_bound,
            "min_value_minus": self.min_value_minus,
            "min_energy_minus": self.min_energy_minus,
            "smoothing_bound_minus": self.smoothing_bound_minus,
            "negative_control_min": self.negative_control_min,
            "margin_plus": self.margin_plus,
            "margin_minus": self.margin_minus,
            "margin": self.margin,
        }


def _branch_forms(
    fixer: GaugeFixer, c: DenseOperator, sign: float, G_phys: DenseOperator, G_tilde: DenseOperator,
    kernel: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """(Q_val, Q_energy, bound) for one branch; ``sign`` is +1 for c~2^+ and -1 for c~2^-."""
    K = fixer.ops.K_sigma
    cf = c.apply(kernel)
    Q_val = sign * (kernel.conj().T @ G_phys.apply(cf))
    fix = fixer.solve(cf[: fixer.ops.n2 * K.grid.points])
    k_tilde = c.apply(kernel - K.apply(fix.h))
    Q_energy = sign * (k_tilde.conj().T @ G_tilde.apply(k_tilde))
    correction = 0.5 * (Q_val + Q_val.conj().T) - 0.5 * (Q_energy + Q_energy.conj().T)
    return Q_val, Q_energy, float(np.linalg.norm(correction, 2))


def positivity_report(
    fixer: GaugeFixer,
    c_tilde2: CalderonProjectors,
    charges: ChargeSet,
    kernel: np.ndarray,
    complement: Optional[np.ndarray] = None,
    samples: int = 8,
    seed: int = 0,
    fixer_minus: Optional[GaugeFixer] = None,
) -> PositivityResult:
    """
    Positivity of +-(f | q_phys c~2^+- f) on the kernel slice.

    Q_val is the Hermitian form f -> (f | q_phys c~2^+ f) on the slice and Q_energy the form
    f -> (k~ | q~ k~) with k~ = c~2^+ (f - K_Sigma h), h from the gauge fix of c~2^+ f. The
    smoothing bound is the 2-norm of Q_val - Q_energy. With ``fixer_minus`` (built on N_-)
    the same forms with c~2^- and an overall minus sign give the second branch.
    """
    c = c_tilde2.c_plus
    G_phys = charges.q_phys[2].gram
    G_tilde = charges.q_tilde[2].gram
    if kernel.shape[1] == 0:
        return PositivityResult(0, 0.0, 0.0, 0.0, 0.0)

    Q_val, Q_energy, bound = _branch_forms(fixer, c, 1.0, G_phys, G_tilde, kernel)
    minus: Dict[str, Optional[float]] = {}
    if fixer_minus is not None:
        Qm_val, Qm_energy, bound_m = _branch_forms(fixer_minus, c_tilde2.c_minus, -1.0, G_phys, G_tilde, kernel)
        minus = {
            "min_value_minus": _hermitian_min(Qm_val),
            "min_energy_minus": _hermitian_min(Qm_energy),
            "smoothing_bound_minus": bound_m,
        }

    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((kernel.shape[1], samples)) + 1j * rng.standard_normal((kernel.shape[1], samples))
    coeffs /= np.linalg.norm(coeffs, axis=0)
    sampled = [float(np.real(np.vdot(x, Q_val @ x))) for x in coeffs.T]

    negative = 0.0
    if complement is not None and complement.shape[1]:
        negative = _hermitian_min(complement.conj().T @ G_phys.apply(c.apply(complement)))

    result = PositivityResult(
        kernel_rank=kernel.shape[1],
        min_value=_hermitian_min(Q_val),
        min_energy=_hermitian_min(Q_energy),
        smoothing_bound=bound,
        negative_control_min=negative,
        sampled_values=sampled,
        **minus,
    )
    logger.info(f"positivity on kernel slice: {result.to_dict()}")
    return result


@dataclass
class StateReport:
    checks: List[CheckRecord]
    provenance: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.informational for c in self.checks)

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "provenance": self.provenance,
            "checks": [c.model_dump(mode="json") for c in self.checks],
        }


_STATE_ARTIFACTS = ("hadamard", "calderon", "charges", "intertwine", "positivity", "frequency_sign")


def state_conditions_report(
    artifacts: Mapping[str, object],
    tolerances: Optional[Mapping[str, float]] = None,
    provenance: Optional[Dict[str, object]] = None,
) -> StateReport:
    """
    Aggregate the state conditions: normalization, self-adjointness, positivity on
    Ker K^dagger, gauge invariance and the frequency-sign proxy.

    ``artifacts`` maps "hadamard" and "calderon" to {1: ..., 2: ...} projector pairs,
    "charges" to the ChargeSet, "intertwine" to {"+": DecayTable, "-": DecayTable},
    "positivity" to a PositivityResult and "frequency_sign" to {level: value}.

    Raises:
        MissingArtifactError: If an upstream artifact is absent
    """
    for key in _STATE_ARTIFACTS:
        if artifacts.get(key) is None:
            raise MissingArtifactError(key)
    tol = dict(tolerances or {})
    hadamard: Mapping[int, HadamardProjectors] = artifacts["hadamard"]  # type: ignore[assignment]
    calderon: Mapping[int, CalderonProjectors] = artifacts["calderon"]  # type: ignore[assignment]
    charges: ChargeSet = artifacts["charges"]  # type: ignore[assignment]
    intertwine: Mapping[str, DecayTable] = artifacts["intertwine"]  # type: ignore[assignment]
    positivity: PositivityResult = artifacts["positivity"]  # type: ignore[assignment]
    proxy: Mapping[float, float] = artifacts["frequency_sign"]  # type: ignore[assignment]

    normalization = max(
        max(h.sum_defect() for h in hadamard.values()),
        max(c.sum_defect() for c in calderon.values()),
    )
    selfadjoint = max(
        max(hadamard[i].symplectic_defect(charges.q_phys[i]) for i in hadamard),
        max(charge_selfadjoint_defect(calderon[i].c_plus, charges.q_phys[i]) for i in calderon),
    )
    levels = sorted(proxy)
    values = [proxy[k] for k in levels]
    leakage = values[-1] if values else 0.0
    checks = [
        make_record("state-normalization", normalization, tol),
        make_record("state-selfadjoint", selfadjoint, tol),
        make_record("state-positivity", positivity.margin, tol, **positivity.to_dict()),
        make_record("state-gauge-invariance", max(t.max_constant for t in intertwine.values()), tol,
                    all_pass=all(t.all_pass for t in intertwine.values())),
        make_record("state-frequency-sign", leakage, tol,
                    levels={str(k): v for k, v in zip(levels, values)}, excluded_modes="k = 0"),
    ]
    if not checks[3].detail["all_pass"]:
        checks[3] = checks[3].model_copy(update={"passed": False})
    return StateReport(checks, provenance or {})


def frequency_sign(calderon2: CalderonProjectors, hadamard2: HadamardProjectors) -> Dict[float, float]:
    """Opposite-frequency block of T^{-1} c~2^+ in the Hadamard frame, mode 0 excluded."""
    return frequency_sign_proxy(calderon2.c_plus, hadamard2.frame, sign=1)
