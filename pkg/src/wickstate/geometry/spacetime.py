"""
Differential operators on spacetime R_t x T^d with Taylor-series coefficients.

A SpacetimeOperator is sum_{j, alpha} C_{j,alpha}(t, x) d_t^j d_x^alpha where each
coefficient is a field series of shape (D+1, P, fiber_out, fiber_in). Composition
applies the Leibniz rule in t (series differentiation) and in x (spectral
differentiation). Tensor slots use Gaussian coordinates (t, x^1, ..., x^d) of
g = -dt^2 + h_t, index 0 being t.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..core.exceptions import GridError, TruncationError
from ..core.logging import get_logger
from ..series import (
    TimeAnalyticOperator,
    align_points,
    series_derivative,
    series_inverse,
    series_matmul,
    series_product,
)
from ..spectral_core import DenseOperator, GridSpec, derivative_op, spectral_derivative
from .metrics import MetricFamily

logger = get_logger(__name__)

Key = Tuple[int, Tuple[int, ...]]

_LETTERS_A = "ABCDEF"
_LETTERS_B = "GHIJKL"


def _series_dx(series: np.ndarray, grid: GridSpec, alpha: Tuple[int, ...]) -> np.ndarray:
    """Spatial derivative d^alpha of a field series (points axis 1)."""
    if not any(alpha):
        return series
    if series.shape[1] == 1:
        return np.zeros_like(series)
    out = np.moveaxis(series, 1, 0)
    for axis, count in enumerate(alpha):
        for _ in range(count):
            out = spectral_derivative(out, grid, axis)
    return np.moveaxis(out, 0, 1)


def _series_dt(series: np.ndarray, m: int) -> np.ndarray:
    for _ in range(m):
        series = series_derivative(series)
    return series


def _sub_multi(alpha: Tuple[int, ...]) -> Iterable[Tuple[int, ...]]:
    return product(*(range(a + 1) for a in alpha))


@dataclass
class SpacetimeOperator:
    grid: GridSpec
    fiber_in: int
    fiber_out: int
    terms: Dict[Key, np.ndarray]
    valid_order: int

    @property
    def taylor_order(self) -> int:
        return next(iter(self.terms.values())).shape[0] - 1 if self.terms else self.valid_order

    @property
    def zero_alpha(self) -> Tuple[int, ...]:
        return (0,) * self.grid.dim

    @property
    def max_time_order(self) -> int:
        return max((j for j, _ in self.terms), default=0)

    @classmethod
    def multiplication(cls, grid: GridSpec, series: np.ndarray, valid_order: Optional[int] = None):
        series = np.asarray(series)
        fo, fi = series.shape[-2:]
        valid = series.shape[0] - 1 if valid_order is None else valid_order
        return cls(grid, fi, fo, {(0, (0,) * grid.dim): series}, valid)

    @classmethod
    def constant(cls, grid: GridSpec, matrix: np.ndarray, order: int, key: Optional[Key] = None):
        """Constant-coefficient term ``matrix`` at derivative ``key``."""
        matrix = np.asarray(matrix)
        series = np.zeros((order + 1, 1) + matrix.shape, dtype=matrix.dtype)
        series[0, 0] = matrix
        k = key if key is not None else (0, (0,) * grid.dim)
        return cls(grid, matrix.shape[1], matrix.shape[0], {k: series}, order)

    def _combine(self, other: "SpacetimeOperator", sign: float) -> "SpacetimeOperator":
        if (self.fiber_in, self.fiber_out) != (other.fiber_in, other.fiber_out):
            raise GridError("fiber mismatch in spacetime operator sum")
        terms = dict(self.terms)
        for key, c in other.terms.items():
            if key in terms:
                a, b = align_points(terms[key], c)
                D = min(a.shape[0], b.shape[0])
                terms[key] = a[:D] + sign * b[:D]
            else:
                terms[key] = sign * c
        return SpacetimeOperator(self.grid, self.fiber_in, self.fiber_out, terms,
                                 min(self.valid_order, other.valid_order))

    def __add__(self, other: "SpacetimeOperator") -> "SpacetimeOperator":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SpacetimeOperator") -> "SpacetimeOperator":
        return self._combine(other, -1.0)

    def scale(self, c: complex) -> "SpacetimeOperator":
        return SpacetimeOperator(self.grid, self.fiber_in, self.fiber_out,
                                 {k: c * v for k, v in self.terms.items()}, self.valid_order)

    def compose(self, other: "SpacetimeOperator") -> "SpacetimeOperator":
        """self o other, by the Leibniz rule in t and x."""
        if self.fiber_in != other.fiber_out:
            raise GridError(f"cannot compose fibers {self.fiber_in} and {other.fiber_out}")
        terms: Dict[Key, np.ndarray] = {}
        for (j, alpha), C in self.terms.items():
            for (l, beta), E in other.terms.items():
                for m in range(j + 1):
                    Et = _series_dt(E, m)
                    for gamma in _sub_multi(alpha):
                        if any(gamma) and E.shape[1] == 1:
                            continue
                        weight = comb(j, m)
                        for a_i, g_i in zip(alpha, gamma):
                            weight *= comb(a_i, g_i)
                        Ed = _series_dx(Et, self.grid, gamma)
                        if not np.any(Ed):
                            continue
                        prod = weight * series_product("pab,pbc->pac", C, Ed)
                        key = (j - m + l, tuple(a - g + b for a, g, b in zip(alpha, gamma, beta)))
                        if key in terms:
                            x, y = align_points(terms[key], prod)
                            terms[key] = x + y
                        else:
                            terms[key] = prod
        valid = min(self.valid_order, other.valid_order - self.max_time_order)
        terms = {k: v for k, v in terms.items() if np.any(v)}
        return SpacetimeOperator(self.grid, other.fiber_in, self.fiber_out, terms, valid)

    __matmul__ = compose

    def time_block(self, j: int) -> TimeAnalyticOperator:
        """Spatial operator series multiplying d_t^j."""
        D = self.taylor_order
        grid = self.grid
        selected = {alpha: c for (jj, alpha), c in self.terms.items() if jj == j}
        if not selected:
            zero = DenseOperator.zeros(grid, self.fiber_in, self.fiber_out)
            return TimeAnalyticOperator([zero] * (D + 1), valid_order=self.valid_order)
        if all(c.shape[1] == 1 for c in selected.values()):
            ik = 1j * grid.wavenumbers
            symbols = np.zeros((D + 1, grid.points, self.fiber_out, self.fiber_in), dtype=complex)
            for alpha, c in selected.items():
                factor = np.prod(ik ** np.array(alpha), axis=-1)
                symbols += c[: D + 1, 0][:, None] * factor[None, :, None, None]
            coeffs = [DenseOperator.multiplier(grid, symbols[n]) for n in range(D + 1)]
        else:
            coeffs = []
            for n in range(D + 1):
                acc = None
                for alpha, c in selected.items():
                    op = DenseOperator.pointwise(grid, c[n])
                    for axis, count in enumerate(alpha):
                        for _ in range(count):
                            op = op @ derivative_op(grid, axis)
                    acc = op if acc is None else acc + op
                coeffs.append(acc)
        return TimeAnalyticOperator(coeffs, valid_order=self.valid_order)

    def coefficient_norms(self) -> List[float]:
        """Max |coefficient| over all terms, per Taylor order."""
        D = self.taylor_order
        out = []
        for n in range(D + 1):
            vals = [float(np.max(np.abs(c[n]))) for c in self.terms.values() if c.shape[0] > n]
            out.append(max(vals, default=0.0))
        return out


# Tensor-slot machinery


def christoffel_series(h: MetricFamily) -> np.ndarray:
    """Gamma[t, p, a, b, c] = Gamma^a_{bc} of g = -dt^2 + h_t."""
    d = h.dim
    n = d + 1
    coeffs = h.coeffs
    hinv = series_inverse(coeffs)
    hdot = series_derivative(coeffs)
    D1, P = coeffs.shape[0], coeffs.shape[1]
    gamma = np.zeros((D1, P, n, n, n))
    gamma[:, :, 0, 1:, 1:] = 0.5 * hdot
    mixed = 0.5 * series_matmul(hinv, hdot)
    gamma[:, :, 1:, 0, 1:] = mixed
    gamma[:, :, 1:, 1:, 0] = mixed
    if P > 1:
        dh = np.stack([_series_dx(coeffs, h.grid, tuple(int(i == ax) for i in range(d)))
                       for ax in range(d)], axis=2)
        # dh[t, p, l, a, b] = d_l h_ab
        S = (np.einsum("tpjlk->tpljk", dh) + np.einsum("tpklj->tpljk", dh)
             - np.einsum("tpljk->tpljk", dh))
        gamma[:, :, 1:, 1:, 1:] = 0.5 * series_product("pil,pljk->pijk", hinv, S)
    return gamma


def lorentz_inverse_series(h: MetricFamily) -> np.ndarray:
    hinv = series_inverse(h.coeffs)
    n = h.dim + 1
    g = np.zeros(hinv.shape[:2] + (n, n))
    g[0, :, 0, 0] = -1.0
    g[:, :, 1:, 1:] = hinv
    return g


def lorentz_series(h: MetricFamily) -> np.ndarray:
    n = h.dim + 1
    g = np.zeros(h.coeffs.shape[:2] + (n, n))
    g[0, :, 0, 0] = -1.0
    g[:, :, 1:, 1:] = h.coeffs
    return g


def riemann_series(h: MetricFamily, gamma: Optional[np.ndarray] = None) -> np.ndarray:
    """R[t, p, a, b, c, d] = R^a_{bcd} = d_c G^a_bd - d_d G^a_bc + G^a_ce G^e_bd - G^a_de G^e_bc."""
    gamma = christoffel_series(h) if gamma is None else gamma
    d = h.dim
    n = d + 1
    dgamma = np.zeros(gamma.shape[:2] + (n,) + gamma.shape[2:])
    dgamma[:, :, 0] = series_derivative(gamma)
    for ax in range(d):
        dgamma[:, :, ax + 1] = _series_dx(gamma, h.grid, tuple(int(i == ax) for i in range(d)))
    # dgamma[t, p, c, a, b, e] = d_c Gamma^a_{be}
    R = np.einsum("tpcabd->tpabcd", dgamma) - np.einsum("tpdabc->tpabcd", dgamma)
    R = R + series_product("pace,pebd->pabcd", gamma, gamma)
    R = R - series_product("pade,pebc->pabcd", gamma, gamma)
    return R


def _slot_rows(n: int, k: int, c: int) -> np.ndarray:
    """Embedding u_A -> (e_c x u)_{cA}."""
    size = n ** k
    rows = np.zeros((n * size, size))
    rows[c * size:(c + 1) * size] = np.eye(size)
    return rows


def connection_series(gamma: np.ndarray, k: int) -> np.ndarray:
    """-sum_s Gamma^{b_s}_{c a_s} prod_{r != s} delta, shape (D+1, P, n^{k+1}, n^k)."""
    D1, P, n = gamma.shape[0], gamma.shape[1], gamma.shape[2]
    G = np.transpose(gamma, (0, 1, 3, 4, 2))  # G[c, a, e] = Gamma^e_{ca}
    eye = np.eye(n)
    total = np.zeros((D1, P, n) + (n,) * (2 * k))
    a_idx = _LETTERS_A[:k]
    b_idx = _LETTERS_B[:k]
    for s in range(k):
        operands = [G]
        specs = [f"tpc{a_idx[s]}{b_idx[s]}"]
        for r in range(k):
            if r != s:
                operands.append(eye)
                specs.append(f"{a_idx[r]}{b_idx[r]}")
        total -= np.einsum(",".join(specs) + f"->tpc{a_idx}{b_idx}", *operands)
    return total.reshape(D1, P, n ** (k + 1), n ** k)


def covariant_derivative(grid: GridSpec, gamma: np.ndarray, k: int, valid_order: int) -> SpacetimeOperator:
    """nabla on covariant rank-k tensors; output index order (c, a_1, ..., a_k)."""
    n = grid.dim + 1
    D = gamma.shape[0] - 1
    zero = (0,) * grid.dim
    terms: Dict[Key, np.ndarray] = {}
    for c in range(n):
        series = np.zeros((D + 1, 1, n ** (k + 1), n ** k))
        series[0, 0] = _slot_rows(n, k, c)
        if c == 0:
            terms[(1, zero)] = series
        else:
            terms[(0, tuple(int(i == c - 1) for i in range(grid.dim)))] = series
    if k > 0:
        conn = connection_series(gamma, k)
        if np.any(conn):
            terms[(0, zero)] = conn
    return SpacetimeOperator(grid, n ** k, n ** (k + 1), terms, valid_order)


def trace_contraction(ginv: np.ndarray, k: int) -> np.ndarray:
    """Series of u_{bcA} -> g^{bc} u_{bcA}, shape (D+1, P, n^k, n^{k+2})."""
    n = ginv.shape[-1]
    eye = np.eye(n ** k)
    C = np.einsum("tpbc,AB->tpAbcB", ginv, eye)
    return C.reshape(ginv.shape[0], ginv.shape[1], n ** k, n ** (k + 2))


def first_slot_contraction(ginv: np.ndarray) -> np.ndarray:
    """Series of v_{acb} -> g^{ac} v_{acb}, shape (D+1, P, n, n^3)."""
    n = ginv.shape[-1]
    C = np.einsum("tpac,bB->tpbacB", ginv, np.eye(n))
    return C.reshape(ginv.shape[0], ginv.shape[1], n, n ** 3)


def box_operator(grid: GridSpec, gamma: np.ndarray, ginv: np.ndarray, k: int, valid: int) -> SpacetimeOperator:
    """Wave operator g^{bc} nabla_b nabla_c on rank-k tensors."""
    nabla_k = covariant_derivative(grid, gamma, k, valid)
    nabla_k1 = covariant_derivative(grid, gamma, k + 1, valid)
    contract = SpacetimeOperator.multiplication(grid, trace_contraction(ginv, k), valid)
    return contract @ (nabla_k1 @ nabla_k)


def require_order(op: SpacetimeOperator, needed: int, what: str) -> None:
    if needed > op.valid_order:
        raise TruncationError(
            f"truncation overflow: {what} needs order {needed}, valid through {op.valid_order}"
        )
