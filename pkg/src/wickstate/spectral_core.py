"""
Grids, Fourier multipliers and dense operators on sections over a flat torus.

Sections are sampled on a uniform tensor grid of T^d. Operators are either
Fourier multipliers (a small matrix per Fourier mode) or dense matrices on the
whole discretized section space. Multipliers are materialized lazily, so
x-independent constructions never pay for the dense representation.

Vector layout is fiber-major: component ``a`` at grid point ``p`` sits at index
``a * points + p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .core.exceptions import GridError, SingularWeightError
from .core.logging import get_logger

logger = get_logger(__name__)

ClaimedOrder = Union[int, Literal["smoothing"], None]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the torus T^d with ``n_per_axis`` points per axis."""

    dim: int
    n_per_axis: int
    period: float = 2 * math.pi

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n_per_axis <= 0 or self.n_per_axis % 2:
            raise GridError(f"n_per_axis must be a positive even integer, got {self.n_per_axis}")
        if self.period <= 0:
            raise GridError(f"period must be positive, got {self.period}")

    @property
    def points(self) -> int:
        return self.n_per_axis ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    @property
    def cell_volume(self) -> float:
        return (self.period / self.n_per_axis) ** self.dim

    @property
    def volume(self) -> float:
        return self.period ** self.dim

    def axis_wavenumbers(self) -> np.ndarray:
        """Integer lattice {-n/2+1, ..., n/2} in FFT ordering."""
        n = self.n_per_axis
        k = np.fft.fftfreq(n, d=1.0 / n)
        k[k == -n // 2] = n // 2
        return k

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavevectors of shape (points, dim) in flattened FFT ordering."""
        scale = 2 * math.pi / self.period
        axes = [self.axis_wavenumbers() * scale] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.linalg.norm(self.wavenumbers, axis=-1)

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Grid points of shape (points, dim), C-ordered over an 'ij' mesh."""
        x = np.arange(self.n_per_axis) * (self.period / self.n_per_axis)
        mesh = np.meshgrid(*([x] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def dft_matrix(self) -> np.ndarray:
        """Matrix F with F @ f equal to the flattened fftn of f."""
        eye = np.eye(self.points).reshape((self.points,) + self.shape)
        cols = np.fft.fftn(eye, axes=tuple(range(1, self.dim + 1)))
        return cols.reshape(self.points, self.points).T

    def fft(self, values: np.ndarray) -> np.ndarray:
        """Forward FFT over the leading points axis of ``values``."""
        tail = values.shape[1:]
        arr = values.reshape(self.shape + tail)
        out = np.fft.fftn(arr, axes=tuple(range(self.dim)))
        return out.reshape((self.points,) + tail)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        tail = coeffs.shape[1:]
        arr = coeffs.reshape(self.shape + tail)
        out = np.fft.ifftn(arr, axes=tuple(range(self.dim)))
        return out.reshape((self.points,) + tail)

    def band_mask(self, cutoff: float) -> np.ndarray:
        """Boolean mask of modes with every integer wavenumber component below ``cutoff``."""
        integer = self.wavenumbers * (self.period / (2 * math.pi))
        return np.all(np.abs(integer) <= cutoff, axis=-1)


@dataclass
class SectionField:
    """Grid-sampled section with ``fiber_dim`` complex components per point."""

    grid: GridSpec
    fiber_dim: int
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex).reshape(self.grid.points, self.fiber_dim)
        if not np.all(np.isfinite(self.values)):
            raise GridError("SectionField values must be finite")

    @classmethod
    def from_vector(cls, grid: GridSpec, fiber_dim: int, vec: np.ndarray) -> "SectionField":
        return cls(grid, fiber_dim, np.asarray(vec).reshape(fiber_dim, grid.points).T)

    @classmethod
    def from_function(
        cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray], fiber_dim: int = 1
    ) -> "SectionField":
        vals = np.asarray(fn(grid.coordinates), dtype=complex)
        return cls(grid, fiber_dim, vals.reshape(grid.points, fiber_dim))

    @classmethod
    def random_band_limited(
        cls, grid: GridSpec, fiber_dim: int, cutoff: float, rng: np.random.Generator
    ) -> "SectionField":
        coeffs = rng.standard_normal((grid.points, fiber_dim)) + 1j * rng.standard_normal(
            (grid.points, fiber_dim)
        )
        coeffs[~grid.band_mask(cutoff)] = 0.0
        return cls(grid, fiber_dim, grid.ifft(coeffs) * grid.points)

    def to_vector(self) -> np.ndarray:
        return self.values.T.ravel()

    def fourier_coefficients(self) -> np.ndarray:
        """Normalized coefficients f_hat(k) = fft(f) / points."""
        return self.grid.fft(self.values) / self.grid.points

    def is_band_limited(self, cutoff: float, tol: float = 1e-12) -> bool:
        coeffs = self.fourier_coefficients()
        outside = coeffs[~self.grid.band_mask(cutoff)]
        return bool(outside.size == 0 or np.max(np.abs(outside)) <= tol)


@dataclass
class CauchyData:
    """Pair (f0, f1) of traces; stored as one field with doubled fiber."""

    f0: SectionField
    f1: SectionField

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.f0.to_vector(), self.f1.to_vector()])

    @classmethod
    def from_vector(cls, grid: GridSpec, fiber_dim: int, vec: np.ndarray) -> "CauchyData":
        half = fiber_dim * grid.points
        return cls(
            SectionField.from_vector(grid, fiber_dim, vec[:half]),
            SectionField.from_vector(grid, fiber_dim, vec[half:]),
        )


class DenseOperator:
    """
    Linear map between discretized sections.

    Stored either as Fourier-multiplier ``symbols`` of shape (points, fiber_out, fiber_in)
    in FFT mode ordering, or as a dense ``matrix`` of shape
    (fiber_out * points, fiber_in * points). ``claimed_order`` is metadata only.
    """

    def __init__(
        self,
        grid: GridSpec,
        fiber_in: int,
        fiber_out: int,
        *,
        matrix: Optional[np.ndarray] = None,
        symbols: Optional[np.ndarray] = None,
        claimed_order: ClaimedOrder = None,
    ):
        if (matrix is None) == (symbols is None):
            raise GridError("DenseOperator needs exactly one of matrix or symbols")
        self.grid = grid
        self.fiber_in = fiber_in
        self.fiber_out = fiber_out
        self.claimed_order = claimed_order
        self._matrix: Optional[np.ndarray] = None
        self.symbols: Optional[np.ndarray] = None
        if symbols is not None:
            sym = np.asarray(symbols, dtype=complex)
            if sym.ndim == 2:
                sym = sym[None]
            sym = np.broadcast_to(sym, (grid.points, fiber_out, fiber_in)).copy()
            self.symbols = sym
        else:
            mat = np.asarray(matrix, dtype=complex)
            expected = (fiber_out * grid.points, fiber_in * grid.points)
            if mat.shape != expected:
                raise GridError(f"matrix shape {mat.shape} does not match {expected}")
            self._matrix = mat

    # construction helpers

    @classmethod
    def identity(cls, grid: GridSpec, fiber: int) -> "DenseOperator":
        return cls(grid, fiber, fiber, symbols=np.eye(fiber), claimed_order=0)

    @classmethod
    def zeros(cls, grid: GridSpec, fiber_in: int, fiber_out: int) -> "DenseOperator":
        return cls(grid, fiber_in, fiber_out, symbols=np.zeros((fiber_out, fiber_in)),
                   claimed_order="smoothing")

    @classmethod
    def multiplier(cls, grid: GridSpec, symbols: np.ndarray, claimed_order: ClaimedOrder = None):
        sym = np.asarray(symbols, dtype=complex)
        if sym.ndim == 2:
            sym = sym[None]
        return cls(grid, sym.shape[2], sym.shape[1], symbols=sym, claimed_order=claimed_order)

    @classmethod
    def pointwise(cls, grid: GridSpec, values: np.ndarray) -> "DenseOperator":
        """Multiplication by a matrix field of shape (points or 1, fiber_out, fiber_in)."""
        vals = np.asarray(values, dtype=complex)
        if vals.ndim == 2:
            vals = vals[None]
        if vals.shape[0] == 1 or np.allclose(vals, vals[:1], rtol=0.0, atol=0.0):
            return cls.multiplier(grid, vals[:1], claimed_order=0)
        fo, fi = vals.shape[1:]
        mat = np.einsum("pab,pq->apbq", vals, np.eye(grid.points)).reshape(
            fo * grid.points, fi * grid.points
        )
        return cls(grid, fi, fo, matrix=mat, claimed_order=0)

    @classmethod
    def block(cls, rows: Sequence[Sequence["DenseOperator"]]) -> "DenseOperator":
        """Assemble a block operator; stays a multiplier when every block is one."""
        grid = rows[0][0].grid
        fiber_out = sum(r[0].fiber_out for r in rows)
        fiber_in = sum(op.fiber_in for op in rows[0])
        if all(op.is_multiplier for r in rows for op in r):
            sym = np.concatenate(
                [np.concatenate([op.symbols for op in r], axis=2) for r in rows], axis=1
            )
            return cls(grid, fiber_in, fiber_out, symbols=sym)
        mat = np.block([[op.matrix for op in r] for r in rows])
        return cls(grid, fiber_in, fiber_out, matrix=mat)

    # representations

    @property
    def is_multiplier(self) -> bool:
        return self.symbols is not None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            F = self.grid.dft_matrix
            Finv = F.conj() / self.grid.points
            m4 = np.einsum("pk,kab,kq->apbq", Finv, self.symbols, F)
            self._matrix = m4.reshape(self.fiber_out * self.grid.points, self.fiber_in * self.grid.points)
        return self._matrix

    @property
    def shape(self) -> tuple[int, int]:
        return (self.fiber_out * self.grid.points, self.fiber_in * self.grid.points)

    def to_dense(self) -> "DenseOperator":
        return DenseOperator(self.grid, self.fiber_in, self.fiber_out, matrix=self.matrix,
                             claimed_order=self.claimed_order)

    def block_of(self, rows: slice, cols: slice) -> "DenseOperator":
        """Sub-operator on fiber component ranges."""
        r = range(self.fiber_out)[rows]
        c = range(self.fiber_in)[cols]
        if self.is_multiplier:
            return DenseOperator.multiplier(self.grid, self.symbols[:, rows, cols])
        P = self.grid.points
        m4 = self.matrix.reshape(self.fiber_out, P, self.fiber_in, P)[rows][:, :, cols]
        return DenseOperator(self.grid, len(c), len(r), matrix=m4.reshape(len(r) * P, len(c) * P))

    # algebra

    def _check_same(self, other: "DenseOperator") -> None:
        if self.grid != other.grid:
            raise GridError("operators live on different grids")

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        self._check_same(other)
        if (self.fiber_in, self.fiber_out) != (other.fiber_in, other.fiber_out):
            raise GridError("fiber mismatch in operator sum")
        if self.is_multiplier and other.is_multiplier:
            return DenseOperator(self.grid, self.fiber_in, self.fiber_out, symbols=self.symbols + other.symbols)
        return DenseOperator(self.grid, self.fiber_in, self.fiber_out, matrix=self.matrix + other.matrix)

    def __neg__(self) -> "DenseOperator":
        return self.scale(-1.0)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        return self + (-other)

    def scale(self, c: complex) -> "DenseOperator":
        if self.is_multiplier:
            return DenseOperator(self.grid, self.fiber_in, self.fiber_out, symbols=c * self.symbols,
                                 claimed_order=self.claimed_order)
        return DenseOperator(self.grid, self.fiber_in, self.fiber_out, matrix=c * self.matrix,
                             claimed_order=self.claimed_order)

    def __mul__(self, c: complex) -> "DenseOperator":
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        self._check_same(other)
        if self.fiber_in != other.fiber_out:
            raise GridError(f"cannot compose fibers {self.fiber_in} and {other.fiber_out}")
        if self.is_multiplier and other.is_multiplier:
            sym = np.einsum("kab,kbc->kac", self.symbols, other.symbols)
            return DenseOperator(self.grid, other.fiber_in, self.fiber_out, symbols=sym)
        return DenseOperator(self.grid, other.fiber_in, self.fiber_out, matrix=self.matrix @ other.matrix)

    @property
    def H(self) -> "DenseOperator":
        """Flat conjugate transpose."""
        if self.is_multiplier:
            return DenseOperator(self.grid, self.fiber_out, self.fiber_in,
                                 symbols=np.conj(np.swapaxes(self.symbols, 1, 2)))
        return DenseOperator(self.grid, self.fiber_out, self.fiber_in, matrix=self.matrix.conj().T)

    def inverse(self) -> "DenseOperator":
        try:
            if self.is_multiplier:
                return DenseOperator(self.grid, self.fiber_out, self.fiber_in,
                                     symbols=np.linalg.inv(self.symbols))
            return DenseOperator(self.grid, self.fiber_out, self.fiber_in, matrix=np.linalg.inv(self.matrix))
        except np.linalg.LinAlgError as e:
            raise SingularWeightError(f"operator is singular: {e}") from e

    def condition_number(self) -> float:
        if self.is_multiplier:
            return float(np.max(np.linalg.cond(self.symbols)))
        return float(np.linalg.cond(self.matrix))

    def norm(self) -> float:
        """Operator 2-norm for the flat pairing."""
        if self.is_multiplier:
            return float(np.max(np.linalg.norm(self.symbols, ord=2, axis=(1, 2)))) if self.grid.points else 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def apply(self, u: Union[np.ndarray, SectionField]) -> np.ndarray:
        vec = u.to_vector() if isinstance(u, SectionField) else np.asarray(u, dtype=complex)
        if not self.is_multiplier:
            return self.matrix @ vec
        P = self.grid.points
        batch = vec.reshape(self.fiber_in, P, -1) if vec.ndim == 2 else vec.reshape(self.fiber_in, P)
        arr = np.moveaxis(batch, 0, 1)
        coeffs = self.grid.fft(arr)
        out = np.einsum("kab,kb...->ka...", self.symbols, coeffs)
        res = np.moveaxis(self.grid.ifft(out), 1, 0)
        if vec.ndim == 2:
            return res.reshape(self.fiber_out * P, -1)
        return res.reshape(self.fiber_out * P)

    def __repr__(self) -> str:
        kind = "multiplier" if self.is_multiplier else "dense"
        return f"DenseOperator({kind}, {self.fiber_out}x{self.fiber_in}, points={self.grid.points})"


def blockwise(fn: Callable[..., np.ndarray], *ops: DenseOperator) -> DenseOperator:
    """
    Apply a matrix function mode by mode when every operand is a multiplier,
    otherwise to the dense matrices.
    """
    grid = ops[0].grid
    if all(op.is_multiplier for op in ops):
        sym = np.stack([np.asarray(fn(*(op.symbols[k] for op in ops))) for k in range(grid.points)])
        return DenseOperator(grid, sym.shape[2], sym.shape[1], symbols=sym)
    mat = np.asarray(fn(*(op.matrix for op in ops)))
    P = grid.points
    return DenseOperator(grid, mat.shape[1] // P, mat.shape[0] // P, matrix=mat)


def derivative_op(grid: GridSpec, axis: int) -> DenseOperator:
    """Fourier multiplier of i k_axis; exact on trigonometric polynomials."""
    if not 0 <= axis < grid.dim:
        raise GridError(f"axis {axis} out of range for dim {grid.dim}")
    sym = (1j * grid.wavenumbers[:, axis])[:, None, None]
    return DenseOperator.multiplier(grid, sym, claimed_order=1)


def bracket_op(grid: GridSpec, power: float, fiber: int = 1) -> DenseOperator:
    """Multiplier of <k>^power = (1 + |k|^2)^(power/2) times the fiber identity."""
    w = (1.0 + grid.k_abs ** 2) ** (power / 2.0)
    return DenseOperator.multiplier(grid, w[:, None, None] * np.eye(fiber)[None], claimed_order=None)


def spectral_derivative(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Spectral x-derivative of a field array whose leading axis runs over points (or is 1)."""
    if values.shape[0] == 1:
        return np.zeros_like(values, dtype=complex)
    ik = 1j * grid.wavenumbers[:, axis]
    coeffs = grid.fft(np.asarray(values, dtype=complex))
    coeffs = coeffs * ik.reshape((-1,) + (1,) * (values.ndim - 1))
    out = grid.ifft(coeffs)
    return out.real if np.isrealobj(values) else out


def sobolev_norm(f: SectionField, s: float) -> float:
    """(sum_k (1+|k|^2)^s |f_hat(k)|^2)^(1/2), summed over fiber components."""
    coeffs = f.fourier_coefficients()
    weight = (1.0 + f.grid.k_abs ** 2) ** s
    return float(np.sqrt(np.sum(weight[:, None] * np.abs(coeffs) ** 2)))


@dataclass
class InnerProduct:
    """Weighted pairing <u, v> = u^H W v on the flattened section space."""

    weight: DenseOperator
    positivity_flag: Literal["positive", "indefinite"] = "positive"

    def __post_init__(self) -> None:
        if (self.weight - self.weight.H).norm() > 1e-12 * max(1.0, self.weight.norm()):
            raise ValueError("inner-product weight must be Hermitian")

    @classmethod
    def flat(cls, grid: GridSpec, fiber: int) -> "InnerProduct":
        """Normalized L2 pairing, consistent with sobolev_norm at s = 0."""
        return cls(DenseOperator.identity(grid, fiber).scale(1.0 / grid.points), "positive")

    def pair(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.vdot(u, self.weight.apply(v)))


def adjoint(A: DenseOperator, ip: InnerProduct) -> DenseOperator:
    """Formal adjoint W^{-1} A^H W with respect to ``ip``."""
    W = ip.weight
    cond = W.condition_number()
    logger.debug(f"adjoint: weight condition number {cond:.3e}")
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularWeightError(f"inner-product weight is singular (condition number {cond:.3e})")
    return W.inverse() @ A.H @ W


@dataclass
class DecayTable:
    """Per-mode weighted norms <k>^m ||A e_k|| and the resulting pass decisions."""

    k_abs: np.ndarray
    base_norms: np.ndarray
    m_list: List[int]
    weighted: Dict[int, np.ndarray]
    constants: Dict[int, float]
    passed: Dict[int, bool]
    bound: float
    label: str = ""

    @property
    def all_pass(self) -> bool:
        return all(self.passed.values())

    @property
    def max_constant(self) -> float:
        return max(self.constants.values()) if self.constants else 0.0

    def to_frame(self) -> pd.DataFrame:
        order = np.lexsort((np.arange(self.k_abs.size), self.k_abs))
        data = {"mode": order, "k_abs": self.k_abs[order], "norm": self.base_norms[order]}
        for m in self.m_list:
            data[f"m{m}"] = self.weighted[m][order]
        return pd.DataFrame(data)

    def to_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12e")

    def summary(self) -> Dict[str, object]:
        return {
            "bound": self.bound,
            "constants": {str(m): float(self.constants[m]) for m in self.m_list},
            "passed": {str(m): bool(self.passed[m]) for m in self.m_list},
        }


def mode_column_norms(A: DenseOperator) -> np.ndarray:
    """max_j ||A e_{k,j}|| for unit plane waves e_{k,j}, one value per mode."""
    if A.is_multiplier:
        return np.max(np.linalg.norm(A.symbols, axis=1), axis=-1)
    P = A.grid.points
    waves = A.grid.dft_matrix.conj() / math.sqrt(P)
    best = np.zeros(P)
    for j in range(A.fiber_in):
        cols = A.matrix[:, j * P:(j + 1) * P] @ waves
        best = np.maximum(best, np.linalg.norm(cols, axis=0))
    return best


def smoothing_order_profile(
    A: DenseOperator,
    m_list: Sequence[int] = (1, 2, 3, 4),
    bound: float = 10.0,
    tail_fraction: float = 0.5,
    noise_floor: float = 1e-8,
    label: str = "",
    column_norms: Optional[np.ndarray] = None,
) -> DecayTable:
    """
    Decay profile of ``A`` over unit Fourier modes.

    Order m passes when the weighted profile <k>^m ||A e_k|| stays below ``bound``
    and its maximum over the outer quarter of the frequency range is at most
    ``tail_fraction`` of the global maximum. A tail whose unweighted norms are all below
    ``noise_floor`` counts as numerically zero and passes the tail test at every order.
    """
    if A.fiber_in != A.fiber_out:
        raise GridError("smoothing_order_profile needs square fiber dimensions")
    k_abs = A.grid.k_abs
    norms = mode_column_norms(A) if column_norms is None else np.asarray(column_norms)
    bracket = np.sqrt(1.0 + k_abs ** 2)
    tail = k_abs >= 0.75 * k_abs.max() if k_abs.max() > 0 else np.zeros_like(k_abs, dtype=bool)
    weighted, constants, passed = {}, {}, {}
    tail_is_noise = not tail.any() or float(norms[tail].max()) <= noise_floor
    for m in m_list:
        w = bracket ** m * norms
        sup = float(w.max()) if w.size else 0.0
        tail_max = float(w[tail].max()) if tail.any() else 0.0
        weighted[m] = w
        constants[m] = sup
        passed[m] = sup <= bound and (tail_is_noise or tail_max <= tail_fraction * sup)
    return DecayTable(k_abs, norms, list(m_list), weighted, constants, passed, bound, label)
