"""
Euclidean side: Wick rotation, Dirichlet problems for -d_s^2 + a~(s) on
(-T, T) x Sigma and on the half-cylinders, Calderon projectors, Dirichlet-to-Neumann
maps and the elliptic Green identities.

Each half-cylinder carries Chebyshev-Lobatto nodes; the two pieces share the
interface s = 0. Euclidean Cauchy data are rho~ u = (u(0), -d_s u(0)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev, legendre
from scipy import linalg
from tqdm import tqdm

from .bundles import ChargeForm, FiberForms
from .core.exceptions import EllipticSolveError, GridError
from .core.logging import get_logger
from .factorization import HadamardProjectors, min_hermitian_eigenvalue, weight_similarity
from .series import TimeAnalyticOperator
from .spectral_core import (
    DecayTable,
    DenseOperator,
    InnerProduct,
    SectionField,
    adjoint,
    bracket_op,
    smoothing_order_profile,
)

logger = get_logger(__name__)

Side = Literal["+", "-"]


def wick_rotate(a: TimeAnalyticOperator, tol: float = 1e-12) -> TimeAnalyticOperator:
    """
    a~(s) = a(i s), coefficientwise i^n A_n.

    The matching condition (i d_t)^n a(0) = d_s^n a~(0) is asserted on the result.
    """
    out = a.wick_rotate()
    for n, (A, At) in enumerate(zip(a.coeffs, out.coeffs)):
        defect = (A.scale(1j ** n) - At).norm()
        if defect > tol * max(1.0, A.norm()):
            raise AssertionError(f"Wick matching failed at order {n}: {defect:.3e}")
    return out


def wick_rotate_differential(
    d0: TimeAnalyticOperator, d1: TimeAnalyticOperator
) -> Tuple[TimeAnalyticOperator, TimeAnalyticOperator]:
    """d~0(s) = -i d0(i s), d~1(s) = d1(i s)."""
    return d0.wick_rotate().scale(-1j), d1.wick_rotate()


def reality_defect(a: TimeAnalyticOperator, forms: FiberForms) -> Dict[str, float]:
    """
    Compare a_n^* with tau a_n tau^{-1} and the rotated form a~^*(s) with tau a~(-s) tau^{-1},
    coefficientwise, * being the positive-weight adjoint.
    """
    ip = InnerProduct(forms.positive)
    tau, tau_inv = forms.tau, forms.tau.inverse()
    at = a.wick_rotate()
    lorentz, euclid = 0.0, 0.0
    for n, (A, At) in enumerate(zip(a.coeffs, at.coeffs)):
        scale = max(A.norm(), 1e-300)
        lorentz = max(lorentz, (adjoint(A, ip) - tau @ A @ tau_inv).norm() / scale)
        reflected = At.scale((-1.0) ** n)
        euclid = max(euclid, (adjoint(At, ip) - tau @ reflected @ tau_inv).norm() / scale)
    return {"lorentzian": lorentz, "euclidean": euclid}


def chebyshev_lobatto(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes x_j = cos(pi j / N) and the differentiation matrix on them."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    V = chebyshev.chebvander(x, N)
    dcoef = chebyshev.chebder(np.eye(N + 1), axis=0)
    dV = chebyshev.chebval(x, dcoef).T
    return x, np.linalg.solve(V.T, dV.T).T


def clenshaw_curtis_weights(x: np.ndarray) -> np.ndarray:
    """Quadrature weights on [-1, 1] for Chebyshev nodes ``x`` (exact for degree len(x) - 1)."""
    N = len(x) - 1
    k = np.arange(N + 1)
    moments = np.where(k % 2 == 0, 2.0 / np.where(k == 1, 1.0, 1.0 - k.astype(float) ** 2), 0.0)
    V = chebyshev.chebvander(x, N)
    return np.linalg.solve(V.T, moments)


def _kron_row(row: np.ndarray, m: int) -> np.ndarray:
    return np.kron(row[None, :], np.eye(m))


class EllipticProblem:
    """
    Collocation discretization of -d_s^2 + a~(s) on (-T, 0) u (0, T).

    Operators act per Fourier mode when every coefficient of a~ is a multiplier
    (``modes`` = grid points, block size = fiber); otherwise one dense block of
    size fiber * points.
    """

    def __init__(
        self,
        a_tilde: TimeAnalyticOperator,
        T: float = 1.0,
        nodes: int = 48,
        forms: Optional[FiberForms] = None,
        show_progress: bool = False,
    ):
        if T <= 0:
            raise GridError(f"half-length T must be positive, got {T}")
        if nodes < 4:
            raise GridError(f"need at least 4 collocation nodes, got {nodes}")
        self.a_tilde = a_tilde
        self.T = float(T)
        self.N = nodes
        self.grid = a_tilde.grid
        self.fiber = a_tilde.fiber_in
        self.forms = forms or FiberForms.scalar(self.grid, self.fiber)
        self.multiplier = all(c.is_multiplier for c in a_tilde.coeffs) and self.forms.positive.is_multiplier
        self.show_progress = show_progress

        x, Dx = chebyshev_lobatto(nodes)
        self.x = x
        self.s_plus = self.T * (1.0 + x) / 2.0
        self.s_minus = self.T * (x - 1.0) / 2.0
        self.Ds = (2.0 / self.T) * Dx
        self.D2 = self.Ds @ self.Ds
        self.quad = (self.T / 2.0) * clenshaw_curtis_weights(x)
        xg, wg = legendre.leggauss(nodes + 1)
        self.to_gauss = chebyshev.chebvander(xg, nodes) @ np.linalg.inv(chebyshev.chebvander(x, nodes))
        self.gauss_weights = (self.T / 2.0) * wg
        self.a_plus = self._node_blocks(self.s_plus)
        self.a_minus = self._node_blocks(self.s_minus)
        self.coercivity = self.coercivity_margin()

    # layout helpers

    @property
    def modes(self) -> int:
        return self.grid.points if self.multiplier else 1

    @property
    def block(self) -> int:
        return self.fiber if self.multiplier else self.fiber * self.grid.points

    def _batched(self, op: DenseOperator) -> np.ndarray:
        return op.symbols if self.multiplier else op.to_dense().matrix[None]

    def _node_blocks(self, s_values: np.ndarray) -> np.ndarray:
        return np.stack([self._batched(self.a_tilde.evaluate(s)) for s in s_values])

    def to_modes(self, vec: np.ndarray) -> np.ndarray:
        """Section vector(s) (fiber-major) -> array (modes, block, ...)."""
        vec = np.asarray(vec, dtype=complex)
        if not self.multiplier:
            return vec.reshape((1, self.block) + vec.shape[1:])
        P = self.grid.points
        arr = np.moveaxis(vec.reshape((self.fiber, P) + vec.shape[1:]), 0, 1)
        return self.grid.fft(arr)

    def from_modes(self, arr: np.ndarray) -> np.ndarray:
        if not self.multiplier:
            return arr.reshape((self.block,) + arr.shape[2:])
        vals = self.grid.ifft(arr)
        return np.moveaxis(vals, 1, 0).reshape((self.fiber * self.grid.points,) + arr.shape[2:])

    def _progress(self, desc: str):
        return tqdm(range(self.modes), desc=desc, disable=not self.show_progress or self.modes < 8,
                    leave=False)

    # coercivity

    def coercivity_margin(self) -> float:
        """
        Lower bound (pi / 2T)^2 + min_s min eig Re a~(s) for the quadratic form of the
        Dirichlet realization, Hermitian parts taken for the positive fiber weight.
        """
        S, Sinv = weight_similarity(self.forms.positive, self.a_tilde.coeffs[0])
        worst = math.inf
        for s in np.concatenate([self.s_minus, self.s_plus]):
            worst = min(worst, min_hermitian_eigenvalue(S @ self.a_tilde.evaluate(s) @ Sinv))
        return (math.pi / (2.0 * self.T)) ** 2 + worst

    def require_coercive(self) -> None:
        if self.coercivity <= 0:
            raise EllipticSolveError(
                f"coercivity certificate fails (margin {self.coercivity:.3e}); shrink T={self.T}"
            )

    @classmethod
    def coercive(
        cls, a_tilde: TimeAnalyticOperator, T: float = 1.0, nodes: int = 48,
        forms: Optional[FiberForms] = None, max_halvings: int = 6, show_progress: bool = False,
    ) -> "EllipticProblem":
        """Build the problem, halving T until the coercivity certificate holds."""
        requested = T
        for _ in range(max_halvings + 1):
            problem = cls(a_tilde, T, nodes, forms, show_progress)
            if problem.coercivity > 0:
                if problem.T != requested:
                    logger.warning(f"half-length shrunk to T={problem.T} for coercivity")
                return problem
            logger.info(f"coercivity margin {problem.coercivity:.3e} at T={T}; halving")
            T /= 2.0
        raise EllipticSolveError(f"no coercive half-length found down to T={T * 2.0}")

    # assembly

    def _interior_rows(self, a_nodes: np.ndarray, k: int) -> List[Tuple[int, np.ndarray]]:
        m = self.block
        rows = []
        for j in range(1, self.N):
            row = -_kron_row(self.D2[j], m).astype(complex)
            row[:, j * m:(j + 1) * m] += a_nodes[j, k]
            rows.append((j, row))
        return rows

    def two_domain_matrix(self, k: int) -> np.ndarray:
        """
        Unknowns [u- at s_minus nodes; u+ at s_plus nodes]. Rows: collocation at
        interior nodes, Dirichlet at s = -T and s = T, value and derivative jumps at s = 0.
        """
        m, N = self.block, self.N
        n1 = (N + 1) * m
        A = np.zeros((2 * n1, 2 * n1), dtype=complex)
        for j, row in self._interior_rows(self.a_minus, k):
            A[j * m:(j + 1) * m, :n1] = row
        for j, row in self._interior_rows(self.a_plus, k):
            A[n1 + j * m:n1 + (j + 1) * m, n1:] = row
        eye = np.eye(m)
        A[N * m:n1, N * m:n1] = eye
        A[n1:n1 + m, n1:n1 + m] = eye
        # [u] = u+(0) - u-(0) in the rows of u-(0); [u'] in the rows of u+(0)
        A[0:m, n1 + N * m:n1 + n1] = eye
        A[0:m, 0:m] -= eye
        A[n1 + N * m:2 * n1, n1:] = _kron_row(self.Ds[N], m)
        A[n1 + N * m:2 * n1, :n1] -= _kron_row(self.Ds[0], m)
        return A

    def half_domain_matrix(self, side: Side, k: int) -> np.ndarray:
        """Dirichlet problem on one half-cylinder; rows of the s = 0 node carry the trace."""
        m, N = self.block, self.N
        n1 = (N + 1) * m
        a_nodes = self.a_plus if side == "+" else self.a_minus
        A = np.zeros((n1, n1), dtype=complex)
        for j, row in self._interior_rows(a_nodes, k):
            A[j * m:(j + 1) * m] = row
        A[0:m, 0:m] = np.eye(m)
        A[N * m:n1, N * m:n1] = np.eye(m)
        return A

    def interface_index(self, side: Side) -> int:
        """Node index of s = 0 on each half."""
        return self.N if side == "+" else 0

    # solves

    def _two_domain_rhs(
        self, volume_minus, volume_plus, jump_value, jump_derivative
    ) -> np.ndarray:
        m, N = self.block, self.N
        n1 = (N + 1) * m
        rhs = np.zeros(2 * n1, dtype=complex)
        if volume_minus is not None:
            for j in range(1, N):
                rhs[j * m:(j + 1) * m] = volume_minus[j]
        if volume_plus is not None:
            for j in range(1, N):
                rhs[n1 + j * m:n1 + (j + 1) * m] = volume_plus[j]
        if jump_value is not None:
            rhs[0:m] = jump_value
        if jump_derivative is not None:
            rhs[n1 + N * m:2 * n1] = jump_derivative
        return rhs

    def dirichlet_solve(
        self,
        volume_minus: Optional[np.ndarray] = None,
        volume_plus: Optional[np.ndarray] = None,
        jump_value: Optional[np.ndarray] = None,
        jump_derivative: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Solve -u'' + a~ u = f with u(+-T) = 0 and prescribed jumps at s = 0.

        Volume data are section vectors per node, shape (N+1, fiber * points); jumps are
        section vectors. An interface source delta(s) w is the jump [u'] = -w, and
        delta'(s) w is [u] = -w. Returns nodal values (u_minus, u_plus).

        Raises:
            EllipticSolveError: If the coercivity certificate fails or the system is singular
        """
        self.require_coercive()
        N = self.N
        vm = None if volume_minus is None else np.stack([self.to_modes(v) for v in volume_minus], axis=1)
        vp = None if volume_plus is None else np.stack([self.to_modes(v) for v in volume_plus], axis=1)
        jv = None if jump_value is None else self.to_modes(jump_value)
        jd = None if jump_derivative is None else self.to_modes(jump_derivative)
        m = self.block
        out = np.zeros((self.modes, 2 * (N + 1), m), dtype=complex)
        for k in self._progress("dirichlet"):
            rhs = self._two_domain_rhs(
                None if vm is None else vm[k], None if vp is None else vp[k],
                None if jv is None else jv[k], None if jd is None else jd[k],
            )
            out[k] = self._solve(self.two_domain_matrix(k), rhs).reshape(2 * (N + 1), m)
        u = np.stack([self.from_modes(out[:, j]) for j in range(2 * (N + 1))])
        return u[:N + 1], u[N + 1:]

    @staticmethod
    def _solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        try:
            lu = linalg.lu_factor(A, check_finite=True)
        except (ValueError, linalg.LinAlgError) as e:
            raise EllipticSolveError(f"collocation system could not be factored: {e}") from e
        if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * max(1.0, np.max(np.abs(lu[0]))):
            raise EllipticSolveError("collocation system is singular")
        return linalg.lu_solve(lu, rhs)

    def poisson(self, side: Side, trace: np.ndarray) -> np.ndarray:
        """P_{Omega+-} v: solution with u|_Sigma = v and zero outer trace, nodal values (N+1, len(v))."""
        self.require_coercive()
        m, N = self.block, self.N
        tm = self.to_modes(trace)
        j0 = self.interface_index(side)
        out = np.zeros((self.modes, N + 1, m), dtype=complex)
        for k in self._progress(f"poisson {side}"):
            rhs = np.zeros((N + 1) * m, dtype=complex)
            rhs[j0 * m:(j0 + 1) * m] = tm[k]
            out[k] = self._solve(self.half_domain_matrix(side, k), rhs).reshape(N + 1, m)
        return np.stack([self.from_modes(out[:, j]) for j in range(N + 1)])

    def nodes(self, side: Side) -> np.ndarray:
        return self.s_plus if side == "+" else self.s_minus

    def cauchy_trace(self, values: np.ndarray, side: Side) -> np.ndarray:
        """rho~^{+-} u = (u(0), -d_s u(0)) from nodal values on one half."""
        j0 = self.interface_index(side)
        deriv = np.tensordot(self.Ds[j0], values, axes=(0, 0))
        return np.concatenate([values[j0], -deriv])

    def derivative(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.Ds, values, axes=(1, 0))

    def integrate(self, integrand: np.ndarray) -> complex:
        """Clenshaw-Curtis quadrature over one half-cylinder."""
        return complex(np.dot(self.quad, integrand))

    def integrate_pairing(self, left: np.ndarray, right: np.ndarray, weight: DenseOperator) -> complex:
        """
        int left(s)^* W right(s) ds over one half-cylinder for nodal values of shape
        (N+1, dim). Gauss-Legendre on N+1 points, exact for products of the nodal polynomials.
        """
        lg = self.to_gauss @ np.asarray(left, dtype=complex)
        rg = self.to_gauss @ np.asarray(right, dtype=complex)
        weighted = np.stack([weight.apply(r) for r in rg])
        return complex(np.dot(self.gauss_weights, np.einsum("gi,gi->g", lg.conj(), weighted)))


@dataclass
class CalderonProjectors:
    c_plus: DenseOperator
    c_minus: DenseOperator
    residual_metadata: Dict[str, object] = field(default_factory=dict)

    def sum_defect(self) -> float:
        eye = DenseOperator.identity(self.c_plus.grid, self.c_plus.fiber_in)
        return (self.c_plus + self.c_minus - eye).norm()

    def idempotency_defect(self) -> float:
        return max((c @ c - c).norm() for c in (self.c_plus, self.c_minus))


def calderon_projectors(
    problem: EllipticProblem, m_list: Sequence[int] = (1, 2, 3, 4), bound: float = 10.0
) -> CalderonProjectors:
    """
    c~^+- f = -+ rho~^+- D~^{-1} rho~^* sigma~ f. The source rho~^* sigma~ f is
    delta (-f1) + delta' f0, i.e. the jumps [u] = -f0 and [u'] = f1.
    """
    problem.require_coercive()
    m, N = problem.block, problem.N
    n1 = (N + 1) * m
    cp = np.zeros((problem.modes, 2 * m, 2 * m), dtype=complex)
    cm = np.zeros_like(cp)
    eye = np.eye(m)
    for k in problem._progress("calderon"):
        rhs = np.zeros((2 * n1, 2 * m), dtype=complex)
        rhs[0:m, 0:m] = -eye
        rhs[n1 + N * m:2 * n1, m:2 * m] = eye
        sol = problem._solve(problem.two_domain_matrix(k), rhs)
        u_minus = sol[:n1].reshape(N + 1, m, 2 * m)
        u_plus = sol[n1:].reshape(N + 1, m, 2 * m)
        up0 = u_plus[N]
        dup0 = np.tensordot(problem.Ds[N], u_plus, axes=(0, 0))
        um0 = u_minus[0]
        dum0 = np.tensordot(problem.Ds[0], u_minus, axes=(0, 0))
        cp[k] = np.concatenate([-up0, dup0])
        cm[k] = np.concatenate([um0, -dum0])
    c_plus = _cauchy_operator(problem, cp)
    c_minus = _cauchy_operator(problem, cm)
    eye_op = DenseOperator.identity(problem.grid, 2 * problem.fiber)
    meta = {
        "sum_defect": (c_plus + c_minus - eye_op).norm(),
        "idempotency_plus": smoothing_order_profile(c_plus @ c_plus - c_plus, m_list, bound,
                                                    label="c+^2 - c+").summary(),
        "idempotency_minus": smoothing_order_profile(c_minus @ c_minus - c_minus, m_list, bound,
                                                     label="c-^2 - c-").summary(),
        "T": problem.T,
        "nodes": problem.N,
        "coercivity_margin": problem.coercivity,
    }
    logger.info(f"calderon projectors: sum defect {meta['sum_defect']:.3e}")
    return CalderonProjectors(c_plus, c_minus, meta)


def _cauchy_operator(problem: EllipticProblem, blocks: np.ndarray) -> DenseOperator:
    """Per-mode (2m x 2m) blocks on Cauchy data -> operator with fiber 2 * fiber."""
    F2 = 2 * problem.fiber
    if problem.multiplier:
        return DenseOperator(problem.grid, F2, F2, symbols=blocks)
    return DenseOperator(problem.grid, F2, F2, matrix=blocks[0])


def dtn_map(problem: EllipticProblem, side: Side) -> DenseOperator:
    """N_{Omega+-} v = -d_s P_{Omega+-} v at s = 0, by columnwise half-cylinder solves."""
    problem.require_coercive()
    m, N = problem.block, problem.N
    j0 = problem.interface_index(side)
    blocks = np.zeros((problem.modes, m, m), dtype=complex)
    for k in problem._progress(f"dtn {side}"):
        rhs = np.zeros(((N + 1) * m, m), dtype=complex)
        rhs[j0 * m:(j0 + 1) * m] = np.eye(m)
        sol = problem._solve(problem.half_domain_matrix(side, k), rhs).reshape(N + 1, m, m)
        blocks[k] = -np.tensordot(problem.Ds[j0], sol, axes=(0, 0))
    if problem.multiplier:
        return DenseOperator(problem.grid, problem.fiber, problem.fiber, symbols=blocks)
    return DenseOperator(problem.grid, problem.fiber, problem.fiber, matrix=blocks[0])


def dtn_rayleigh_bounds(N_plus: DenseOperator, forms: Optional[FiberForms] = None) -> Tuple[float, float]:
    """
    Bounds [c1, c2] of the Rayleigh quotients of Re N+ against <k> = (1 - Delta)^{1/2}.

    Generalized Hermitian eigenvalues of (Re N+, <k>) in the positive weight.
    """
    grid = N_plus.grid
    S, Sinv = weight_similarity(forms.positive if forms else None, N_plus)
    M = S @ N_plus @ Sinv
    if M.is_multiplier:
        herm = 0.5 * (M.symbols + np.conj(np.swapaxes(M.symbols, 1, 2)))
        bracket = np.sqrt(1.0 + grid.k_abs ** 2)[:, None, None]
        vals = np.linalg.eigvalsh(herm / bracket)
    else:
        B = bracket_op(grid, 1.0, N_plus.fiber_in)
        herm = 0.5 * (M.matrix + M.matrix.conj().T)
        Bm = B.matrix
        vals = linalg.eigh(herm, 0.5 * (Bm + Bm.conj().T), eigvals_only=True)
    return float(np.min(vals)), float(np.max(vals))


@dataclass
class ProjectorComparison:
    plus: DecayTable
    minus: DecayTable
    per_mode: np.ndarray

    def summary(self) -> Dict[str, object]:
        return {
            "plus": self.plus.summary(),
            "minus": self.minus.summary(),
            "max_mode_difference": float(self.per_mode.max()) if self.per_mode.size else 0.0,
        }


def compare_projectors(
    c: HadamardProjectors, ct: CalderonProjectors, m_list: Sequence[int] = (1, 2, 3, 4), bound: float = 10.0
) -> ProjectorComparison:
    """Decay profiles of c^+- - c~^+- and per-mode max absolute entry differences."""
    if c.c_plus.grid != ct.c_plus.grid or c.c_plus.fiber_in != ct.c_plus.fiber_in:
        raise GridError("projectors live on different grids or fibers")
    dp = c.c_plus - ct.c_plus
    dm = c.c_minus - ct.c_minus
    if dp.is_multiplier:
        per_mode = np.max(np.abs(dp.symbols), axis=(1, 2))
    else:
        per_mode = np.array([float(np.max(np.abs(dp.matrix)))])
    return ProjectorComparison(
        smoothing_order_profile(dp, m_list, bound, label="c+ - c~+"),
        smoothing_order_profile(dm, m_list, bound, label="c- - c~-"),
        per_mode,
    )


def charge_selfadjoint_defect(c: DenseOperator, q: ChargeForm) -> float:
    """Relative non-Hermiticity of gram(q) c; zero iff c^dagger = c for q."""
    G = q.gram @ c
    return (G - G.H).norm() / max(G.norm(), 1e-300)


def reflection_defect(ct: CalderonProjectors, forms: FiberForms) -> float:
    """|c~^- - K c~^+ K| with K = diag(tau, -tau) on Cauchy data."""
    z = DenseOperator.zeros(ct.c_plus.grid, forms.fiber, forms.fiber)
    K = DenseOperator.block([[forms.tau, z], [z, forms.tau.scale(-1.0)]])
    return (ct.c_minus - K @ ct.c_plus @ K.inverse()).norm()


def trace_reversal_commutator(ct: CalderonProjectors, I2: DenseOperator) -> float:
    """|(I x 1) c~ - c~ (I x 1)| for both projectors."""
    z = DenseOperator.zeros(I2.grid, I2.fiber_in, I2.fiber_out)
    J = DenseOperator.block([[I2, z], [z, I2]])
    return max((J @ c - c @ J).norm() for c in (ct.c_plus, ct.c_minus))


def green_identities(
    problem: EllipticProblem, seed: int = 0, cutoff: float = 2.0
) -> Dict[str, float]:
    """
    Residuals of the elliptic Green identities on band-limited data.

    green1: int_{Omega+}((D~u)^* v - u^* D~^* v) = -(rho~+ u | sigma~ rho~+ v), for u solving a
    volume problem with quadratic-in-s forcing and v = (1 - s/T)(w0 + (s/T) w1). The d_s^2 part
    is integrated exactly on the nodal polynomials; the a~ part cancels pointwise.
    green2: 2 eta_{Omega+}(u, v) = (rho~+ u | q~ rho~+ v) for D~-harmonic u, v; meaningful
    when a~ is Hermitian.
    """
    rng = np.random.default_rng(seed)
    grid, F = problem.grid, problem.fiber
    W = problem.forms.positive

    def rand_section() -> np.ndarray:
        return SectionField.random_band_limited(grid, F, cutoff, rng).to_vector()

    def pair(x: np.ndarray, y: np.ndarray) -> complex:
        return complex(np.vdot(x, W.apply(y)))

    sp = problem.s_plus
    r = sp / problem.T
    f0, f1, f2 = rand_section(), rand_section(), rand_section()
    f_plus = np.stack([f0 + x * f1 + x * x * f2 for x in r])
    f_minus = np.zeros_like(f_plus)
    _, u = problem.dirichlet_solve(volume_minus=f_minus, volume_plus=f_plus)
    w0, w1 = rand_section(), rand_section()
    v = np.stack([(1.0 - x) * (w0 + x * w1) for x in r])
    a_nodes = [problem.a_tilde.evaluate(s) for s in sp]
    d2u = problem.derivative(problem.derivative(u))
    d2v = problem.derivative(problem.derivative(v))
    potential = problem.integrate(np.array([
        pair(A.apply(u[j]), v[j]) - pair(u[j], _weighted_adjoint(A, W).apply(v[j]))
        for j, A in enumerate(a_nodes)
    ]))
    lhs = problem.integrate_pairing(-d2u, v, W) + problem.integrate_pairing(u, d2v, W) + potential
    ru, rv = problem.cauchy_trace(u, "+"), problem.cauchy_trace(v, "+")
    sig_rv = np.concatenate([-rv[F * grid.points:], rv[:F * grid.points]])
    rhs = -_pair2(ru, sig_rv, W)
    green1 = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))

    p = problem.poisson("+", rand_section())
    q_ = problem.poisson("+", rand_section())
    dp, dq = problem.derivative(p), problem.derivative(q_)
    eta = problem.integrate(np.array([pair(dp[j], dq[j]) + pair(p[j], a_nodes[j].apply(q_[j]))
                                      for j in range(len(sp))]))
    rp, rq = problem.cauchy_trace(p, "+"), problem.cauchy_trace(q_, "+")
    half = F * grid.points
    q_rq = np.concatenate([rq[half:], rq[:half]])
    charge = _pair2(rp, q_rq, W)
    green2 = abs(2 * eta - charge) / max(1.0, abs(eta), abs(charge))
    logger.debug(f"green identities: green1 {green1:.3e}, green2 {green2:.3e}")
    return {"green1": float(green1), "green2": float(green2)}


def _pair2(x: np.ndarray, y: np.ndarray, W: DenseOperator) -> complex:
    half = len(x) // 2
    return complex(np.vdot(x[:half], W.apply(y[:half])) + np.vdot(x[half:], W.apply(y[half:])))


def _weighted_adjoint(A: DenseOperator, W: DenseOperator) -> DenseOperator:
    return W.inverse() @ A.H @ W
