"""
Tensor bundles V1 (one-forms) and V2 (symmetric two-tensors) over T^d, their
Hermitian forms, trace reversal and the charges on Cauchy data.

Symmetric two-tensors on the (d+1)-dimensional spacetime are stored packed:
the upper triangle of the n x n component matrix in row-major order, so the
components read u_tt, u_t1..u_td, u_11, u_12, ..., u_dd.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from .core.exceptions import ChargeAssemblyError, GridError, NonPositiveMetricError
from .core.logging import get_logger
from .spectral_core import DenseOperator, GridSpec, InnerProduct, SectionField

logger = get_logger(__name__)

TraceReversalMode = Literal["reflection", "literal", "einstein"]


def v2_index_pairs(d: int) -> List[Tuple[int, int]]:
    n = d + 1
    return [(a, b) for a in range(n) for b in range(a, n)]


def v2_dim(d: int) -> int:
    return (d + 1) * (d + 2) // 2


def unpack_matrix(n: int) -> np.ndarray:
    """E with vec(u) = E @ packed(u) for symmetric n x n u (vec is row-major)."""
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    E = np.zeros((n * n, len(pairs)))
    for j, (a, b) in enumerate(pairs):
        E[a * n + b, j] = 1.0
        E[b * n + a, j] = 1.0
    return E


def pack_matrix(n: int) -> np.ndarray:
    """P with packed(u) = P @ vec(u); P @ E = 1."""
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    Pm = np.zeros((len(pairs), n * n))
    for j, (a, b) in enumerate(pairs):
        Pm[j, a * n + b] = 1.0
    return Pm


def lorentz_metric(h: np.ndarray) -> np.ndarray:
    """g = -dt^2 + h for h of shape (..., d, d)."""
    d = h.shape[-1]
    g = np.zeros(h.shape[:-2] + (d + 1, d + 1), dtype=h.dtype)
    g[..., 0, 0] = -1.0
    g[..., 1:, 1:] = h
    return g


def check_spd(h: np.ndarray, what: str = "h0") -> float:
    """Smallest eigenvalue of a symmetric field; raises when not positive."""
    if not np.allclose(h, np.swapaxes(h, -1, -2), atol=1e-12):
        raise NonPositiveMetricError(f"{what} is not symmetric")
    lam = float(np.min(np.linalg.eigvalsh(np.real(h))))
    if lam <= 0:
        raise NonPositiveMetricError(f"{what} is not positive definite (min eigenvalue {lam:.3e})")
    return lam


def v1_weight_field(h: np.ndarray) -> np.ndarray:
    """Pointwise Gram matrix of (w|w) = g^{ab} conj(w_a) w_b."""
    return np.linalg.inv(lorentz_metric(h))


def v2_weight_field(h: np.ndarray) -> np.ndarray:
    """Pointwise Gram matrix E^T (g^-1 x g^-1) E of tr(u* g^-1 v g^-1) on packed tensors."""
    d = h.shape[-1]
    n = d + 1
    ginv = np.linalg.inv(lorentz_metric(h))
    E = unpack_matrix(n)
    kron = np.einsum("...ac,...bd->...abcd", ginv, ginv).reshape(h.shape[:-2] + (n * n, n * n))
    return np.einsum("ia,...ij,jb->...ab", E, kron, E)


def tau1_matrix(d: int) -> np.ndarray:
    return np.diag([-1.0] + [1.0] * d)


def tau2_matrix(d: int) -> np.ndarray:
    signs = [1.0 if (a == 0) == (b == 0) else -1.0 for a, b in v2_index_pairs(d)]
    return np.diag(signs)


def trace_reversal_alpha(d: int, mode: TraceReversalMode) -> float:
    if mode == "reflection":
        return 2.0 / (d + 1)
    return 0.5


def trace_reversal_field(h: np.ndarray, alpha: float) -> np.ndarray:
    """Packed matrix of u -> u - alpha tr_g(u) g, pointwise."""
    d = h.shape[-1]
    n = d + 1
    g = lorentz_metric(h)
    ginv = np.linalg.inv(g)
    E = unpack_matrix(n)
    Pm = pack_matrix(n)
    packed_g = np.einsum("ij,...j->...i", Pm, g.reshape(h.shape[:-2] + (n * n,)))
    trace_row = np.einsum("...j,jb->...b", ginv.reshape(h.shape[:-2] + (n * n,)), E)
    eye = np.eye(v2_dim(d))
    return eye - alpha * np.einsum("...a,...b->...ab", packed_g, trace_row)


@dataclass
class Bundle1Section:
    w_t: SectionField
    w_sigma: SectionField

    def __post_init__(self) -> None:
        if self.w_t.grid != self.w_sigma.grid:
            raise GridError("Bundle1Section components must share a grid")

    def to_field(self) -> SectionField:
        return SectionField(self.w_t.grid, 1 + self.w_sigma.fiber_dim,
                            np.concatenate([self.w_t.values, self.w_sigma.values], axis=1))

    @classmethod
    def from_field(cls, f: SectionField) -> "Bundle1Section":
        return cls(SectionField(f.grid, 1, f.values[:, :1]),
                   SectionField(f.grid, f.fiber_dim - 1, f.values[:, 1:]))


@dataclass
class Bundle2Section:
    """u_tt (scalar), u_tsigma (covector) and u_sigmasigma (packed upper triangle)."""

    u_tt: SectionField
    u_tsigma: SectionField
    u_sigmasigma: SectionField

    def __post_init__(self) -> None:
        grids = {self.u_tt.grid, self.u_tsigma.grid, self.u_sigmasigma.grid}
        if len(grids) != 1:
            raise GridError("Bundle2Section components must share a grid")
        d = self.u_tsigma.fiber_dim
        if self.u_sigmasigma.fiber_dim != d * (d + 1) // 2:
            raise GridError("u_sigmasigma must hold d(d+1)/2 packed components")

    @property
    def dim(self) -> int:
        return self.u_tsigma.fiber_dim

    def to_field(self) -> SectionField:
        vals = np.concatenate([self.u_tt.values, self.u_tsigma.values, self.u_sigmasigma.values], axis=1)
        return SectionField(self.u_tt.grid, vals.shape[1], vals)

    @classmethod
    def from_field(cls, f: SectionField, d: int) -> "Bundle2Section":
        return cls(
            SectionField(f.grid, 1, f.values[:, :1]),
            SectionField(f.grid, d, f.values[:, 1:1 + d]),
            SectionField(f.grid, d * (d + 1) // 2, f.values[:, 1 + d:]),
        )

    @classmethod
    def from_full(cls, grid: GridSpec, u: np.ndarray) -> "Bundle2Section":
        """Build from full component arrays of shape (points, n, n); symmetrized."""
        n = u.shape[-1]
        sym = 0.5 * (u + np.swapaxes(u, -1, -2))
        packed = np.einsum("ij,pj->pi", pack_matrix(n), sym.reshape(sym.shape[0], n * n))
        return cls.from_field(SectionField(grid, packed.shape[1], packed), n - 1)

    def to_full(self) -> np.ndarray:
        n = self.dim + 1
        vals = self.to_field().values
        return np.einsum("ij,pj->pi", unpack_matrix(n), vals).reshape(-1, n, n)


def hermitian_form_v2(
    u: Bundle2Section,
    v: Bundle2Section,
    h0: np.ndarray,
    normalization: Literal["tensor", "v2"] = "tensor",
) -> complex:
    """
    Indefinite pairing |u_tt|^2 - 2 (u_tS|u_tS)_h + (u_SS|u_SS)_h integrated with |h0|^(1/2).

    ``normalization="v2"`` multiplies by 2, matching 2 tr(u* g^-1 u g^-1).
    """
    grid = u.u_tt.grid
    if v.u_tt.grid != grid:
        raise GridError("sections live on different grids")
    h = np.asarray(h0, dtype=float).reshape(-1, u.dim, u.dim)
    check_spd(h)
    G = v2_weight_field(h)
    density = np.sqrt(np.linalg.det(h))
    uf = u.to_field().values
    vf = v.to_field().values
    integrand = np.einsum("pa,pab,pb->p", uf.conj(), np.broadcast_to(G, (grid.points,) + G.shape[1:]), vf)
    total = complex(np.sum(integrand * np.broadcast_to(density, (grid.points,))) * grid.cell_volume)
    return 2.0 * total if normalization == "v2" else total


def trace_reversal(u: Bundle2Section, g0: np.ndarray, mode: TraceReversalMode = "reflection") -> Bundle2Section:
    """
    Apply I u = u - alpha tr_g(u) g pointwise.

    ``g0`` is the Lorentzian fiber metric diag(-1, h0) of shape (n, n) or (points, n, n).
    """
    g = np.asarray(g0, dtype=float)
    if g.ndim == 2:
        g = g[None]
    d = g.shape[-1] - 1
    alpha = trace_reversal_alpha(d, mode)
    Imat = trace_reversal_field(g[:, 1:, 1:], alpha)
    if mode == "literal" and d != 3:
        defect = float(np.max(np.abs(Imat @ Imat - np.eye(Imat.shape[-1]))))
        if defect > 1e-12:
            logger.warning(f"trace reversal with coefficient 1/2 is not involutive in dim {d + 1}: "
                           f"|I^2 - 1| = {defect:.3e}")
    vals = u.to_field().values
    out = np.einsum("pab,pb->pa", np.broadcast_to(Imat, (vals.shape[0],) + Imat.shape[1:]), vals)
    return Bundle2Section.from_field(SectionField(u.u_tt.grid, vals.shape[1], out), d)


@dataclass
class BundleGeometry:
    """Fiber data of V1 and V2 at the Cauchy surface: grid, h0 field and trace-reversal mode."""

    grid: GridSpec
    h0: np.ndarray
    trace_mode: TraceReversalMode = "reflection"

    def __post_init__(self) -> None:
        self.h0 = np.asarray(self.h0, dtype=float)
        if self.h0.ndim == 2:
            self.h0 = self.h0[None]
        if self.h0.shape[-1] != self.grid.dim:
            raise GridError("h0 dimension does not match grid")
        self.min_eigenvalue = check_spd(self.h0)

    @property
    def d(self) -> int:
        return self.grid.dim

    @property
    def n1(self) -> int:
        return self.d + 1

    @property
    def n2(self) -> int:
        return v2_dim(self.d)

    @cached_property
    def density(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.h0))[:, None, None]

    def _op(self, field_values: np.ndarray) -> DenseOperator:
        return DenseOperator.pointwise(self.grid, field_values)

    def _weighted(self, gram: np.ndarray) -> DenseOperator:
        return self._op(gram * self.density / self.grid.points)

    @cached_property
    def weight1(self) -> DenseOperator:
        return self._weighted(v1_weight_field(self.h0))

    @cached_property
    def weight2(self) -> DenseOperator:
        return self._weighted(2.0 * v2_weight_field(self.h0))

    @cached_property
    def tau1(self) -> DenseOperator:
        return self._op(tau1_matrix(self.d))

    @cached_property
    def tau2(self) -> DenseOperator:
        return self._op(tau2_matrix(self.d))

    @cached_property
    def positive_weight1(self) -> DenseOperator:
        """Gram matrix of the Euclidean form on V1 (weight1 twisted by tau1)."""
        return self._weighted(v1_weight_field(self.h0) @ tau1_matrix(self.d))

    @cached_property
    def positive_weight2(self) -> DenseOperator:
        return self._weighted(2.0 * v2_weight_field(self.h0) @ tau2_matrix(self.d))

    def trace_reversal_op(self, mode: Optional[TraceReversalMode] = None) -> DenseOperator:
        alpha = trace_reversal_alpha(self.d, mode or self.trace_mode)
        return self._op(trace_reversal_field(self.h0, alpha))

    @cached_property
    def I2(self) -> DenseOperator:
        return self.trace_reversal_op()

    def inner_product(self, i: int, positive: bool = True) -> InnerProduct:
        if positive:
            w = self.positive_weight1 if i == 1 else self.positive_weight2
            return InnerProduct(w, "positive")
        w = self.weight1 if i == 1 else self.weight2
        return InnerProduct(w, "indefinite")

    def cauchy_weight(self, i: int) -> DenseOperator:
        """Euclidean weight on Cauchy data (two copies of the fiber)."""
        w = self.positive_weight1 if i == 1 else self.positive_weight2
        z = DenseOperator.zeros(self.grid, w.fiber_in, w.fiber_out)
        return DenseOperator.block([[w, z], [z, w]])

    def fiber(self, i: int) -> int:
        return self.n1 if i == 1 else self.n2


@dataclass
class ChargeForm:
    """Charge operator on Cauchy data together with the Euclidean weight it is paired with."""

    matrix: DenseOperator
    kind: Literal["lorentzian", "physical", "euclidean_q", "euclidean_sigma", "involution"]
    weight: DenseOperator

    @property
    def gram(self) -> DenseOperator:
        """Hermitian (or anti-Hermitian) matrix of the sesquilinear form (f | q g)."""
        return self.weight @ self.matrix

    def pair(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.vdot(f, self.gram.apply(g)))

    def hermiticity_defect(self) -> float:
        G = self.gram
        sign = -1.0 if self.kind == "euclidean_sigma" else 1.0
        return (G - G.H.scale(sign)).norm() / max(G.norm(), 1e-300)


@dataclass
class ChargeSet:
    q: Dict[int, ChargeForm]
    q_phys: Dict[int, ChargeForm]
    q_tilde: Dict[int, ChargeForm]
    sigma_tilde: Dict[int, ChargeForm]
    J2: ChargeForm
    identity_residuals: Dict[str, float] = field(default_factory=dict)


def _block2(a: DenseOperator, b: DenseOperator, c: DenseOperator, e: DenseOperator) -> DenseOperator:
    return DenseOperator.block([[a, b], [c, e]])


def build_charges(fiber_spec: BundleGeometry, tol: float = 1e-12) -> ChargeSet:
    """
    Assemble q_i, q_{i,phys}, q~_i, sigma~_i and J2 on Cauchy data and verify the
    identities J2^2 = 1, J2 self-adjoint and J2 q_{2,phys} J2 = q~_2.
    """
    geo = fiber_spec
    grid = geo.grid
    q, q_phys, q_tilde, sigma_tilde = {}, {}, {}, {}
    for i in (1, 2):
        F = geo.fiber(i)
        one = DenseOperator.identity(grid, F)
        zero = DenseOperator.zeros(grid, F, F)
        tau = geo.tau1 if i == 1 else geo.tau2
        W = geo.cauchy_weight(i)
        qi = _block2(zero, tau, tau, zero)
        Ii = one if i == 1 else geo.I2
        q[i] = ChargeForm(qi, "lorentzian", W)
        q_phys[i] = ChargeForm(qi @ _block2(Ii, zero, zero, Ii), "physical", W)
        q_tilde[i] = ChargeForm(_block2(zero, one, one, zero), "euclidean_q", W)
        sigma_tilde[i] = ChargeForm(_block2(zero, one.scale(-1.0), one, zero), "euclidean_sigma", W)

    F2 = geo.n2
    zero2 = DenseOperator.zeros(grid, F2, F2)
    J = _block2(geo.I2 @ geo.tau2, zero2, zero2, DenseOperator.identity(grid, F2))
    W2 = geo.cauchy_weight(2)
    J2 = ChargeForm(J, "involution", W2)

    eye = DenseOperator.identity(grid, 2 * F2)
    J_adj = W2.inverse() @ J.H @ W2
    residuals = {
        "J2_squared": (J @ J - eye).norm(),
        "J2_selfadjoint": (J_adj - J).norm(),
        "J2_conjugation": (J @ q_phys[2].matrix @ J - q_tilde[2].matrix).norm(),
    }
    for i in (1, 2):
        residuals[f"q{i}_phys_hermitian"] = q_phys[i].hermiticity_defect()
        inv = q_phys[i].gram.inverse()
        residuals[f"q{i}_phys_inverse"] = (inv @ q_phys[i].gram - DenseOperator.identity(grid, 2 * geo.fiber(i))).norm()
    logger.debug(f"charge identity residuals: {residuals}")

    involutive = geo.trace_mode != "literal" or geo.d == 3
    bad = {k: v for k, v in residuals.items() if v > tol * 10 and (involutive or not k.startswith("J2"))}
    if bad:
        raise ChargeAssemblyError(f"charge identities failed: {bad}")
    if not involutive:
        logger.warning("literal trace reversal away from dim 4: J2 identities reported, not enforced")
    return ChargeSet(q, q_phys, q_tilde, sigma_tilde, J2, residuals)


def symplectic_adjoint(A: DenseOperator, q: ChargeForm) -> DenseOperator:
    """A^dagger = q^{-1} A^* q, with A^* the adjoint for the weight paired with q."""
    G = q.gram
    return G.inverse() @ A.H @ G


@dataclass
class FiberForms:
    """Positive and indefinite fiber weights of one bundle with the twist tau between them."""

    positive: DenseOperator
    indefinite: DenseOperator
    tau: DenseOperator

    @classmethod
    def from_geometry(cls, geo: BundleGeometry, i: int) -> "FiberForms":
        if i == 1:
            return cls(geo.positive_weight1, geo.weight1, geo.tau1)
        return cls(geo.positive_weight2, geo.weight2, geo.tau2)

    @classmethod
    def scalar(cls, grid: GridSpec, fiber: int = 1) -> "FiberForms":
        """Flat weights with trivial twist, for scalar model problems."""
        w = DenseOperator.identity(grid, fiber).scale(1.0 / grid.points)
        return cls(w, w, DenseOperator.identity(grid, fiber))

    @property
    def fiber(self) -> int:
        return self.positive.fiber_in

    def cauchy_weight(self) -> DenseOperator:
        z = DenseOperator.zeros(self.positive.grid, self.fiber, self.fiber)
        return DenseOperator.block([[self.positive, z], [z, self.positive]])

    def charge(self) -> ChargeForm:
        """q = [[0, tau], [tau, 0]] on Cauchy data."""
        z = DenseOperator.zeros(self.positive.grid, self.fiber, self.fiber)
        return ChargeForm(DenseOperator.block([[z, self.tau], [self.tau, z]]), "lorentzian",
                          self.cauchy_weight())
