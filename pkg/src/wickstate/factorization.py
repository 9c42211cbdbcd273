"""
Lorentzian factorization of d_t^2 + a(t): regularized square root, the Riccati
fixed point b, Hadamard projectors, Cauchy evolution and the Green/charge identity.

Cauchy data of u are (u(0), i^{-1} d_t u(0)); the first-order system reads
d_t psi = i A psi with A = [[0, 1], [a, 0]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, linalg

from .bundles import ChargeForm, FiberForms
from .core.exceptions import (
    AccretivityError,
    CoercivityError,
    EvolutionError,
    FixedPointError,
    GridError,
    SingularWeightError,
)
from .core.logging import get_logger
from .series import TimeAnalyticOperator
from .spectral_core import (
    DecayTable,
    DenseOperator,
    InnerProduct,
    adjoint,
    blockwise,
    mode_column_norms,
    smoothing_order_profile,
)

logger = get_logger(__name__)

_SQRT3 = math.sqrt(3.0)
_GL_NODES = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
_GL_MATRIX = ((0.25, 0.25 - _SQRT3 / 6.0), (0.25 + _SQRT3 / 6.0, 0.25))


def bump(x: np.ndarray) -> np.ndarray:
    """exp(x^2 / (x^2 - 1)) on |x| < 1, zero outside; equals 1 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(xi ** 2 / (xi ** 2 - 1.0))
    return out


def weight_similarity(weight: Optional[DenseOperator], like: DenseOperator) -> Tuple[DenseOperator, DenseOperator]:
    """S = W^{1/2} and its inverse, turning W-Hermitian operators into flat-Hermitian ones."""
    if weight is None:
        one = DenseOperator.identity(like.grid, like.fiber_in)
        return one, one
    S = blockwise(lambda w: linalg.sqrtm(0.5 * (w + w.conj().T)), weight)
    return S, S.inverse()


def min_hermitian_eigenvalue(op: DenseOperator) -> float:
    """Smallest eigenvalue of the flat Hermitian part (op + op^H) / 2."""
    if op.is_multiplier:
        herm = 0.5 * (op.symbols + np.conj(np.swapaxes(op.symbols, 1, 2)))
        return float(np.min(np.linalg.eigvalsh(herm)))
    m = op.matrix
    return float(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))


def coercivity_margin(A: DenseOperator, weight: Optional[DenseOperator] = None) -> float:
    """Smallest eigenvalue of the Hermitian part of A with respect to ``weight``."""
    S, Sinv = weight_similarity(weight, A)
    return min_hermitian_eigenvalue(S @ A @ Sinv)


def reference_operator(a0: DenseOperator, forms: FiberForms) -> DenseOperator:
    """2 a_ref = (a + a^*)/2 + tau^{-1} (a + a^*)/2 tau, with * for the positive weight."""
    herm = (a0 + adjoint(a0, InnerProduct(forms.positive))).scale(0.5)
    tau_inv = forms.tau.inverse()
    return (herm + tau_inv @ herm @ forms.tau).scale(0.5)


def regularize(
    a_ref: DenseOperator,
    R: float,
    weight: Optional[DenseOperator] = None,
    a: Optional[DenseOperator] = None,
) -> DenseOperator:
    """
    r = R chi(a_ref / R) by spectral calculus of the Hermitian ``a_ref``.

    Raises:
        CoercivityError: If the Hermitian part of a + r (a defaults to a_ref) is not >= 1
    """
    if R <= 0:
        raise CoercivityError(f"regularizer radius must be positive, got {R}")
    S, Sinv = weight_similarity(weight, a_ref)
    M = S @ a_ref @ Sinv

    def _chi(m: np.ndarray) -> np.ndarray:
        lam, V = np.linalg.eigh(0.5 * (m + m.conj().T))
        return (V * (R * bump(lam / R))) @ V.conj().T

    r = Sinv @ blockwise(_chi, M) @ S
    target = a if a is not None else a_ref
    margin = coercivity_margin(target + r, weight)
    logger.debug(f"regularize: R={R}, coercivity margin {margin:.6f}")
    if margin < 1.0 - 1e-10:
        raise CoercivityError(
            f"Re(a + r) has minimum {margin:.4f} < 1 at R={R}; increase the regularizer radius"
        )
    return r


def coercive_regularizer(
    a0: DenseOperator, forms: FiberForms, radius: float, max_doublings: int = 8
) -> Tuple[DenseOperator, float]:
    """Regularize with R doubled until a0 + r is coercive; returns (r, R)."""
    a_ref = reference_operator(a0, forms)
    R = radius
    for _ in range(max_doublings + 1):
        try:
            return regularize(a_ref, R, forms.positive, a=a0), R
        except CoercivityError as e:
            logger.debug(f"{e}; doubling")
            R *= 2.0
    raise CoercivityError(f"no coercive regularizer up to R={R / 2.0}")


def accretive_sqrt(A: DenseOperator, weight: Optional[DenseOperator] = None, tol: float = 1e-10) -> DenseOperator:
    """
    Principal square root E of an operator with numerical range in Re z > 0.

    Raises:
        AccretivityError: If the numerical range touches the imaginary axis or the
            root fails its accuracy checks
    """
    S, Sinv = weight_similarity(weight, A)
    M = S @ A @ Sinv
    margin = min_hermitian_eigenvalue(M)
    if margin <= 0:
        raise AccretivityError(f"numerical range reaches Re z = {margin:.3e} <= 0")
    E = blockwise(linalg.sqrtm, M)
    defect = (E @ E - M).norm() / max(M.norm(), 1e-300)
    if defect > tol or min_hermitian_eigenvalue(E) <= 0:
        raise AccretivityError(f"square root check failed (relative defect {defect:.3e})")
    return Sinv @ E @ S


def _fixed_point_update(update: DenseOperator) -> float:
    return smoothing_order_profile(update, (3,), bound=np.inf).constants[3]


class SylvesterSolver:
    """
    Solves e0 X + X e0 = C mode by mode.

    e0 is diagonalized once; the solve is then an entrywise division by
    lambda_i + lambda_j. Badly conditioned eigenbases fall back to scipy's
    Bartels-Stewart solver.
    """

    def __init__(self, e0: DenseOperator, max_condition: float = 1e8):
        self.e0 = e0
        batch = e0.symbols if e0.is_multiplier else e0.matrix[None]
        lam, V = np.linalg.eig(batch)
        self.diagonal = bool(np.all(np.isfinite(lam))) and float(np.max(np.linalg.cond(V))) <= max_condition
        if self.diagonal:
            self.V = V
            self.V_inv = np.linalg.inv(V)
            self.denominator = lam[:, :, None] + lam[:, None, :]
        else:
            logger.debug("sylvester: eigenbasis badly conditioned, using Bartels-Stewart")

    def __call__(self, C: DenseOperator) -> DenseOperator:
        if not self.diagonal or self.e0.is_multiplier != C.is_multiplier:
            return blockwise(lambda e, c: linalg.solve_sylvester(e, e, c), self.e0, C)
        batch = C.symbols if C.is_multiplier else C.matrix[None]
        X = self.V @ ((self.V_inv @ batch @ self.V) / self.denominator) @ self.V_inv
        if C.is_multiplier:
            return DenseOperator(C.grid, C.fiber_in, C.fiber_out, symbols=X)
        return DenseOperator(C.grid, C.fiber_in, C.fiber_out, matrix=X[0])

    def series(self, epsilon: TimeAnalyticOperator, C: TimeAnalyticOperator) -> TimeAnalyticOperator:
        """Solve eps X + X eps = C for a series X, order by order."""
        out: List[DenseOperator] = []
        for n in range(C.taylor_order + 1):
            rhs = C.coeffs[n]
            for j in range(1, min(n, epsilon.taylor_order) + 1):
                rhs = rhs - epsilon.coeffs[j] @ out[n - j] - out[n - j] @ epsilon.coeffs[j]
            out.append(self(rhs))
        return TimeAnalyticOperator(out, valid_order=min(C.valid_order, epsilon.valid_order),
                                    truncated=C.truncated)


def fixed_point_b(
    epsilon: TimeAnalyticOperator,
    max_iter: int = 40,
    tol: float = 1e-8,
    on_nonconvergence: Literal["raise", "warn", "ignore"] = "raise",
    divergence: float = 1e6,
) -> Tuple[TimeAnalyticOperator, int, List[float], bool]:
    """
    Solve b_0 = (2 eps)^{-1} (i d_t eps + i d_t b_0 - b_0^2 - b_0 eps + eps b_0) for b = eps + b_0.

    The equation is iterated in its Sylvester form eps d + d eps = i d_t eps + i d_t d - d^2,
    so the commutator with eps stays on the left. The derivative part is nilpotent on the
    truncated series and the quadratic part contracts once eps dominates b_0.

    Stops when the order-0 coefficient of the update has <k>^3-weighted profile
    below ``tol``; an update above ``divergence`` ends the iteration early.
    Returns (b = eps + b_0, iterations, update sizes, converged).

    Raises:
        FixedPointError: On non-convergence when ``on_nonconvergence`` is "raise"
    """
    solver = SylvesterSolver(epsilon.coeffs[0])
    source = epsilon.derivative(keep_order=True).scale(1j)

    def step(x: TimeAnalyticOperator) -> TimeAnalyticOperator:
        return solver.series(epsilon, source + x.derivative(keep_order=True).scale(1j) - x @ x)

    d = solver.series(epsilon, source)
    sizes: List[float] = []
    converged = False
    iterations = 0
    for k in range(1, max_iter + 1):
        iterations = k
        new = step(d)
        size = _fixed_point_update(new.coeffs[0] - d.coeffs[0])
        sizes.append(size)
        d = new
        logger.debug(f"fixed point iteration {k}: update {size:.3e}")
        if size <= tol:
            converged = True
            break
        if not np.isfinite(size) or size > divergence:
            break
    if not converged:
        msg = f"fixed point did not converge in {iterations} iterations (last update {sizes[-1]:.3e})"
        if on_nonconvergence == "raise":
            raise FixedPointError(msg)
        if on_nonconvergence == "warn":
            logger.warning(msg)
    b = epsilon + d
    # Derivative truncation only enters through (2 eps)^{-1}-damped terms.
    b = TimeAnalyticOperator(b.coeffs, valid_order=epsilon.valid_order, truncated=True)
    return b, iterations, sizes, converged


def minus_branch(b: TimeAnalyticOperator, forms: FiberForms) -> TimeAnalyticOperator:
    """b^- = -b^* with * the adjoint for the indefinite fiber form."""
    ip = InnerProduct(forms.indefinite, "indefinite")
    return b.map(lambda c: adjoint(c, ip).scale(-1.0))


def riccati_residual(b: TimeAnalyticOperator, a: TimeAnalyticOperator) -> TimeAnalyticOperator:
    """i d_t b - b^2 + a."""
    return b.derivative(keep_order=True).scale(1j) - b @ b + a


@dataclass
class FactorizationResult:
    epsilon: TimeAnalyticOperator
    b_plus: TimeAnalyticOperator
    b_minus: TimeAnalyticOperator
    r_smoothing: DenseOperator
    radius: float
    iterations: int
    converged: bool
    update_sizes: List[float]
    residual_profile: DecayTable
    riccati_valid_order: int
    condition_number: float

    def summary(self) -> Dict[str, object]:
        return {
            "radius": self.radius,
            "iterations": self.iterations,
            "converged": self.converged,
            "update_sizes": self.update_sizes,
            "riccati_valid_order": self.riccati_valid_order,
            "condition_number": self.condition_number,
            "residual_profile": self.residual_profile.summary(),
        }


def factorize(
    a: TimeAnalyticOperator,
    forms: FiberForms,
    radius: float = 4.0,
    max_iter: int = 40,
    tol: float = 1e-8,
    m_list: Sequence[int] = (1, 2, 3),
    bound: float = 10.0,
    on_nonconvergence: Literal["raise", "warn"] = "raise",
    max_doublings: int = 4,
) -> FactorizationResult:
    """
    Regularize, take the accretive root eps(t) and solve for b^+ = b, b^- = -b^*.

    When the fixed point does not contract, the regularizer radius is doubled; a larger
    R lifts eps on the low modes, which is where the quadratic part of the map is largest.

    The residual profile is taken against a + r; r differs from zero only on finitely many
    modes, so the two residuals agree modulo a smoothing operator.

    Raises:
        FixedPointError: If no radius up to radius * 2^max_doublings gives a convergent
            iteration and ``on_nonconvergence`` is "raise"
    """
    a0 = a.coeffs[0]
    R = radius
    for attempt in range(max_doublings + 1):
        r, R = coercive_regularizer(a0, forms, R)
        shifted = a + TimeAnalyticOperator.constant(r, a.taylor_order)
        e0 = accretive_sqrt(shifted.coeffs[0], forms.positive)
        epsilon = shifted.sqrt(root0=e0)
        last = attempt == max_doublings
        b, iterations, sizes, converged = fixed_point_b(
            epsilon, max_iter, tol, on_nonconvergence if last else "ignore"
        )
        if converged:
            break
        if not last:
            logger.info(f"fixed point not contracting at R={R} (last update {sizes[-1]:.3e}); doubling R")
            R *= 2.0
    bm = minus_branch(b, forms)
    profile = smoothing_order_profile(riccati_residual(b, shifted).coeffs[0], m_list, bound, label="riccati")
    try:
        cond = (b.coeffs[0] - bm.coeffs[0]).condition_number()
    except np.linalg.LinAlgError as e:
        raise SingularWeightError(f"b+ - b- condition number failed: {e}") from e
    logger.info(f"factorization: R={R}, {iterations} iterations, cond(b+ - b-)={cond:.3e}")
    return FactorizationResult(
        epsilon, b, bm, r, R, iterations, converged, sizes, profile,
        max(epsilon.valid_order - 1, 0), cond,
    )


@dataclass
class HadamardProjectors:
    c_plus: DenseOperator
    c_minus: DenseOperator
    frame: DenseOperator

    @property
    def fiber(self) -> int:
        return self.c_plus.fiber_in // 2

    def sum_defect(self) -> float:
        eye = DenseOperator.identity(self.c_plus.grid, self.c_plus.fiber_in)
        return (self.c_plus + self.c_minus - eye).norm()

    def idempotency_defect(self) -> float:
        return max((c @ c - c).norm() for c in (self.c_plus, self.c_minus))

    def symplectic_defect(self, q: ChargeForm) -> float:
        """Relative non-Hermiticity of q c^+, i.e. the failure of c^{+dagger} = c^+."""
        G = q.gram @ self.c_plus
        return (G - G.H).norm() / max(G.norm(), 1e-300)


def _blk(a, b, c, d) -> DenseOperator:
    return DenseOperator.block([[a, b], [c, d]])


def cauchy_frame(b_plus0: DenseOperator, b_minus0: DenseOperator) -> DenseOperator:
    """T = [[N, N], [b+ N, b- N]] with N = (b+ - b-)^{-1/2}."""
    Y = b_plus0 - b_minus0
    N = blockwise(lambda y: np.linalg.inv(linalg.sqrtm(y)), Y)
    return _blk(N, N, b_plus0 @ N, b_minus0 @ N)


def hadamard_projectors(b_plus0: DenseOperator, b_minus0: DenseOperator) -> HadamardProjectors:
    """
    c^+ = T pi^+ T^{-1} written out with Y = b+ - b-:
    [[-Y^{-1} b-, Y^{-1}], [-b+ Y^{-1} b-, b+ Y^{-1}]], and c^- = 1 - c^+.

    Raises:
        SingularWeightError: If b+ - b- is singular
    """
    Y = b_plus0 - b_minus0
    Yinv = Y.inverse()
    c_plus = _blk((Yinv @ b_minus0).scale(-1.0), Yinv,
                  (b_plus0 @ Yinv @ b_minus0).scale(-1.0), b_plus0 @ Yinv)
    eye = DenseOperator.identity(Y.grid, 2 * Y.fiber_in)
    return HadamardProjectors(c_plus, eye - c_plus, cauchy_frame(b_plus0, b_minus0))


def frame_normalization_defect(T: DenseOperator, forms: FiberForms) -> float:
    """Relative size of T^* q T - diag(tau, -tau) with * for the Cauchy weight."""
    W = forms.cauchy_weight()
    q = forms.charge()
    lhs = W.inverse() @ T.H @ q.gram @ T
    z = DenseOperator.zeros(T.grid, forms.fiber, forms.fiber)
    target = _blk(forms.tau, z, z, forms.tau.scale(-1.0))
    return (lhs - target).norm() / max(target.norm(), 1e-300)


def frequency_sign_proxy(
    c: DenseOperator, T: DenseOperator, sign: int = 1, levels: Optional[Sequence[float]] = None
) -> Dict[float, float]:
    """
    Max over modes |k| >= k0 (k != 0) of the opposite-frequency block of T^{-1} c.

    Decay of the values in k0 stands in for the wavefront condition on c^{+-}.
    """
    F = c.fiber_in // 2
    M = T.inverse() @ c
    rows = slice(F, 2 * F) if sign > 0 else slice(0, F)
    norms = mode_column_norms(M.block_of(rows, slice(None)))
    k_abs = c.grid.k_abs
    if levels is None:
        top = float(k_abs.max())
        levels = [top * f for f in (0.125, 0.25, 0.5, 0.75)]
    out = {}
    for k0 in levels:
        sel = (k_abs >= k0) & (k_abs > 0)
        out[float(k0)] = float(norms[sel].max()) if sel.any() else 0.0
    return out


def projector_difference_profile(
    first: HadamardProjectors, second: HadamardProjectors, m_list: Sequence[int] = (1, 2, 3), bound: float = 10.0
) -> DecayTable:
    """Decay profile of c^+ - c^+' for two regularizer choices."""
    return smoothing_order_profile(first.c_plus - second.c_plus, m_list, bound, label="regularizer")


# Cauchy evolution


def _batched(op: DenseOperator) -> np.ndarray:
    return op.symbols if op.is_multiplier else op.matrix[None]


def _generator(a_t: DenseOperator, multiplier: bool) -> np.ndarray:
    """Batch of i A(t) with A = [[0, 1], [a, 0]]."""
    if multiplier and not a_t.is_multiplier:
        raise GridError("mixed multiplier and dense coefficients in evolution")
    a = _batched(a_t if multiplier else a_t.to_dense())
    m = a.shape[-1]
    out = np.zeros(a.shape[:1] + (2 * m, 2 * m), dtype=complex)
    out[:, :m, m:] = 1j * np.eye(m)
    out[:, m:, :m] = 1j * a
    return out


def _gl_step(M1: np.ndarray, M2: np.ndarray, h: float) -> np.ndarray:
    """Propagator of one two-stage Gauss-Legendre step for psi' = M(t) psi."""
    n = M1.shape[-1]
    eye = np.eye(n)
    (a11, a12), (a21, a22) = _GL_MATRIX
    top = np.concatenate([eye - h * a11 * M1, -h * a12 * M1], axis=-1)
    bottom = np.concatenate([-h * a21 * M2, eye - h * a22 * M2], axis=-1)
    system = np.concatenate([top, bottom], axis=-2)
    rhs = np.concatenate([M1, M2], axis=-2)
    k = np.linalg.solve(system, rhs)
    return eye + 0.5 * h * (k[..., :n, :] + k[..., n:, :])


def _as_operator(grid, batch: np.ndarray, fiber: int, multiplier: bool) -> DenseOperator:
    if multiplier:
        return DenseOperator(grid, fiber, fiber, symbols=batch)
    return DenseOperator(grid, fiber, fiber, matrix=batch[0])


def cauchy_evolution(
    a: TimeAnalyticOperator,
    t0: float,
    t1: float,
    steps: int,
    charge: Optional[ChargeForm] = None,
    drift_tol: float = 1e-6,
) -> DenseOperator:
    """
    U(t1, t0) on Cauchy data by fixed-step Gauss-Legendre integration with a(t)
    evaluated from its Taylor series.

    Raises:
        EvolutionError: If omega_max h > pi or the charge drifts beyond ``drift_tol``
    """
    grid = a.grid
    fiber = 2 * a.fiber_in
    multiplier = all(c.is_multiplier for c in a.coeffs)
    if t0 == t1:
        return DenseOperator.identity(grid, fiber)
    if steps <= 0:
        raise EvolutionError(f"steps must be positive, got {steps}")
    h = (t1 - t0) / steps
    omega = math.sqrt(max(a.evaluate(t).norm() for t in (t0, 0.5 * (t0 + t1), t1)))
    if omega * abs(h) > math.pi:
        raise EvolutionError(
            f"step count too small: omega_max h = {omega * abs(h):.3f} > pi; increase steps"
        )
    U = None
    for n in range(steps):
        t = t0 + n * h
        M1 = _generator(a.evaluate(t + _GL_NODES[0] * h), multiplier)
        M2 = _generator(a.evaluate(t + _GL_NODES[1] * h), multiplier)
        S = _gl_step(M1, M2, h)
        U = S if U is None else S @ U
    op = _as_operator(grid, U, fiber, multiplier)
    if charge is not None:
        G = charge.gram
        drift = (op.H @ G @ op - G).norm() / max(G.norm(), 1e-300)
        logger.debug(f"evolution {t0}->{t1}: charge drift {drift:.3e}")
        if drift > drift_tol:
            raise EvolutionError(f"pseudo-unitarity drift {drift:.3e} exceeds {drift_tol:.1e}")
    return op


def evolution_factorization_profile(
    U: DenseOperator, T_t: DenseOperator, T_0: DenseOperator,
    m_list: Sequence[int] = (1, 2, 3), bound: float = 10.0,
) -> Dict[str, DecayTable]:
    """Decay profiles of the off-diagonal blocks of T(t)^{-1} U(t, 0) T(0)."""
    M = T_t.inverse() @ U @ T_0
    F = M.fiber_in // 2
    return {
        "plus_minus": smoothing_order_profile(M.block_of(slice(0, F), slice(F, 2 * F)), m_list, bound,
                                              label="evolution +-"),
        "minus_plus": smoothing_order_profile(M.block_of(slice(F, 2 * F), slice(0, F)), m_list, bound,
                                              label="evolution -+"),
    }


@dataclass
class GreenChargeResult:
    lhs: complex
    rhs: complex
    residual: float
    times: np.ndarray
    solution: np.ndarray = field(repr=False)
    cauchy_data: np.ndarray = field(repr=False)
    homogeneity: float = 0.0


def propagators_on_grid(
    a: TimeAnalyticOperator, times: np.ndarray, substeps: int, charge: Optional[ChargeForm] = None
) -> List[DenseOperator]:
    """U(t_k, 0) for every node of a uniform time grid containing 0."""
    zero = int(np.argmin(np.abs(times)))
    if abs(times[zero]) > 1e-14:
        raise GridError("time grid must contain t = 0")
    eye = DenseOperator.identity(a.grid, 2 * a.fiber_in)
    out: List[Optional[DenseOperator]] = [None] * len(times)
    out[zero] = eye
    for k in range(zero, len(times) - 1):
        out[k + 1] = cauchy_evolution(a, times[k], times[k + 1], substeps, charge) @ out[k]
    for k in range(zero, 0, -1):
        out[k - 1] = cauchy_evolution(a, times[k], times[k - 1], substeps, charge) @ out[k]
    return out  # type: ignore[return-value]


def causal_propagator_data(
    phi: np.ndarray, times: np.ndarray, propagators: List[DenseOperator]
) -> np.ndarray:
    """
    Cauchy data at t = 0 of G phi = int U(0, s) (0, -i phi(s)) ds, the retarded
    minus advanced solution of (d_t^2 + a) u = phi.
    """
    half = phi.shape[1]
    integrand = np.zeros((len(times), 2 * half), dtype=complex)
    for k, U in enumerate(propagators):
        src = np.concatenate([np.zeros(half, dtype=complex), -1j * phi[k]])
        integrand[k] = U.inverse().apply(src)
    return integrate.simpson(integrand, x=times, axis=0)


_SECOND_DIFFERENCE = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def homogeneous_residual(a: TimeAnalyticOperator, solution: np.ndarray, times: np.ndarray) -> float:
    """
    Worst relative size of (d_t^2 + a(t)) u over the interior nodes of a uniform time grid.

    d_t^2 u is the sixth-order central difference of the sampled ``solution``.

    Raises:
        GridError: If the grid is not uniform or has fewer than seven nodes
    """
    times = np.asarray(times, dtype=float)
    if times.size < _SECOND_DIFFERENCE.size:
        raise GridError(f"need at least {_SECOND_DIFFERENCE.size} time nodes, got {times.size}")
    dt = np.diff(times)
    if not np.allclose(dt, dt[0], rtol=1e-10, atol=0.0):
        raise GridError("homogeneity residual needs a uniform time grid")
    reach = _SECOND_DIFFERENCE.size // 2
    worst = 0.0
    for k in range(reach, times.size - reach):
        second = np.tensordot(_SECOND_DIFFERENCE, solution[k - reach:k + reach + 1], axes=1) / dt[0] ** 2
        potential = a.evaluate(float(times[k])).apply(solution[k])
        scale = max(np.linalg.norm(potential), np.linalg.norm(second), 1e-300)
        worst = max(worst, float(np.linalg.norm(second + potential)) / scale)
    return worst


def green_charge_check(
    a: TimeAnalyticOperator,
    phi1: np.ndarray,
    phi2: np.ndarray,
    times: np.ndarray,
    forms: FiberForms,
    substeps: int = 4,
) -> GreenChargeResult:
    """
    Compare (phi1 | G phi2) with i^{-1} (rho G phi1 | q rho G phi2).

    ``phi1``/``phi2`` hold one section vector per time node and must vanish near
    the ends of the window.
    """
    times = np.asarray(times, dtype=float)
    phi1 = np.asarray(phi1, dtype=complex)
    phi2 = np.asarray(phi2, dtype=complex)
    if phi1.shape != phi2.shape or phi1.shape[0] != times.size:
        raise GridError("test sections must be sampled on the time grid")
    q = forms.charge()
    props = propagators_on_grid(a, times, substeps)
    z1 = causal_propagator_data(phi1, times, props)
    z2 = causal_propagator_data(phi2, times, props)
    half = phi2.shape[1]
    sol = np.stack([U.apply(z2)[:half] for U in props])
    pairing = np.array([np.vdot(phi1[k], forms.indefinite.apply(sol[k])) for k in range(times.size)])
    lhs = complex(integrate.simpson(pairing, x=times))
    rhs = -1j * q.pair(z1, z2)
    scale = max(1.0, abs(lhs), abs(rhs))
    res = abs(lhs - rhs) / scale
    homogeneity = homogeneous_residual(a, sol, times)
    logger.debug(
        f"green/charge: lhs={lhs:.6e}, rhs={rhs:.6e}, residual={res:.3e}, homogeneity={homogeneity:.3e}"
    )
    return GreenChargeResult(lhs, rhs, res, times, sol, z2, homogeneity)
