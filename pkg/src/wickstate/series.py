"""
Truncated Taylor series in time.

Two representations live here. ``TimeAnalyticOperator`` holds one DenseOperator
per coefficient and is what the factorization and Euclidean stages consume.
Field series are plain arrays of shape (D+1, P, ...) where P is either the
number of grid points or 1 for x-independent coefficients; they carry the
geometry (metric, Christoffel data, transport) before operators are formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable, List, Optional

import numpy as np
from scipy import linalg

from .core.exceptions import GridError, TruncationError
from .core.logging import get_logger
from .spectral_core import DenseOperator, blockwise

logger = get_logger(__name__)


@dataclass
class TimeAnalyticOperator:
    """Sum_n t^n A_n truncated at ``taylor_order``; ``valid_order`` tracks lost accuracy."""

    coeffs: List[DenseOperator]
    valid_order: Optional[int] = None
    truncated: bool = False

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise GridError("TimeAnalyticOperator needs at least one coefficient")
        grid = self.coeffs[0].grid
        shape = (self.coeffs[0].fiber_in, self.coeffs[0].fiber_out)
        for c in self.coeffs:
            if c.grid != grid or (c.fiber_in, c.fiber_out) != shape:
                raise GridError("Taylor coefficients must share grid and fibers")
        if self.valid_order is None:
            self.valid_order = self.taylor_order

    @property
    def taylor_order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def grid(self):
        return self.coeffs[0].grid

    @property
    def fiber_in(self) -> int:
        return self.coeffs[0].fiber_in

    @property
    def fiber_out(self) -> int:
        return self.coeffs[0].fiber_out

    @classmethod
    def constant(cls, op: DenseOperator, taylor_order: int) -> "TimeAnalyticOperator":
        zero = op.scale(0.0)
        return cls([op] + [zero] * taylor_order)

    def _wrap(self, coeffs: List[DenseOperator], valid: Optional[int], truncated: bool = False):
        return TimeAnalyticOperator(coeffs, valid_order=valid, truncated=self.truncated or truncated)

    def evaluate(self, t: complex) -> DenseOperator:
        """Horner evaluation at a (possibly complex) time."""
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc.scale(t) + c
        return acc

    def __add__(self, other: "TimeAnalyticOperator") -> "TimeAnalyticOperator":
        n = min(self.taylor_order, other.taylor_order)
        return self._wrap(
            [a + b for a, b in zip(self.coeffs[: n + 1], other.coeffs[: n + 1])],
            min(self.valid_order, other.valid_order),
        )

    def __sub__(self, other: "TimeAnalyticOperator") -> "TimeAnalyticOperator":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "TimeAnalyticOperator":
        return self._wrap([a.scale(c) for a in self.coeffs], self.valid_order)

    def derivative(self, keep_order: bool = False) -> "TimeAnalyticOperator":
        """d/dt; ``keep_order`` pads a zero top coefficient so the length is kept."""
        zero = self.coeffs[0].scale(0.0)
        if self.taylor_order == 0:
            return self._wrap([zero], 0)
        coeffs = [self.coeffs[n].scale(n) for n in range(1, len(self.coeffs))]
        if keep_order:
            coeffs.append(zero)
        return self._wrap(coeffs, max(self.valid_order - 1, 0))

    def compose(self, other: "TimeAnalyticOperator") -> "TimeAnalyticOperator":
        """Cauchy product truncated at the smaller order."""
        n = min(self.taylor_order, other.taylor_order)
        out = []
        for k in range(n + 1):
            acc = self.coeffs[0] @ other.coeffs[k]
            for j in range(1, k + 1):
                acc = acc + self.coeffs[j] @ other.coeffs[k - j]
            out.append(acc)
        truncated = self.taylor_order + other.taylor_order > n
        return self._wrap(out, min(self.valid_order, other.valid_order), truncated)

    __matmul__ = compose

    def map(self, fn: Callable[[DenseOperator], DenseOperator]) -> "TimeAnalyticOperator":
        return self._wrap([fn(c) for c in self.coeffs], self.valid_order)

    def wick_rotate(self) -> "TimeAnalyticOperator":
        """Substitute t -> i s: coefficients i^n A_n."""
        return self._wrap([c.scale(1j ** n) for n, c in enumerate(self.coeffs)], self.valid_order)

    def inverse(self) -> "TimeAnalyticOperator":
        """Series inverse B with B_0 = A_0^{-1}, B_n = -A_0^{-1} sum_{j>=1} A_j B_{n-j}."""
        a0_inv = self.coeffs[0].inverse()
        out = [a0_inv]
        for n in range(1, len(self.coeffs)):
            acc = self.coeffs[1] @ out[n - 1]
            for j in range(2, n + 1):
                acc = acc + self.coeffs[j] @ out[n - j]
            out.append((a0_inv @ acc).scale(-1.0))
        return self._wrap(out, self.valid_order)

    def sqrt(self, root0: Optional[DenseOperator] = None) -> "TimeAnalyticOperator":
        """
        Series square root E with E^2 = A.

        E_0 is the principal root of A_0 (or ``root0``); higher coefficients solve the
        Sylvester equations E_0 E_n + E_n E_0 = A_n - sum_{j=1}^{n-1} E_j E_{n-j}.
        """
        e0 = root0 if root0 is not None else blockwise(linalg.sqrtm, self.coeffs[0])
        out = [e0]
        for n in range(1, len(self.coeffs)):
            rhs = self.coeffs[n]
            for j in range(1, n):
                rhs = rhs - out[j] @ out[n - j]
            out.append(blockwise(lambda e, c: linalg.solve_sylvester(e, e, c), e0, rhs))
        return self._wrap(out, self.valid_order)

    def truncate(self, order: int) -> "TimeAnalyticOperator":
        if order > self.taylor_order:
            raise TruncationError(f"truncation overflow: order {order} > {self.taylor_order}")
        return TimeAnalyticOperator(list(self.coeffs[: order + 1]),
                                    valid_order=min(self.valid_order, order),
                                    truncated=self.truncated)

    def require_valid(self, order: int, what: str = "series") -> None:
        if order > self.valid_order:
            raise TruncationError(
                f"truncation overflow: {what} needs order {order}, valid through {self.valid_order}"
            )


# Field series: arrays with leading Taylor axis and a broadcastable points axis.


def align_points(*series: np.ndarray) -> List[np.ndarray]:
    """Broadcast the points axis (axis 1) of field series to a common size."""
    P = max(s.shape[1] for s in series)
    return [s if s.shape[1] == P else np.broadcast_to(s, (s.shape[0], P) + s.shape[2:]) for s in series]


def series_product(spec: str, a: np.ndarray, b: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """
    Truncated Cauchy product of two field series under an einsum contraction.

    ``spec`` describes one coefficient with the points label first in every
    operand, e.g. ``"pab,pbc->pac"``.
    """
    D = min(a.shape[0], b.shape[0]) - 1 if order is None else order
    a, b = align_points(a, b)
    out = []
    for n in range(D + 1):
        total = np.einsum(spec, a[0], b[n])
        for j in range(1, n + 1):
            total = total + np.einsum(spec, a[j], b[n - j])
        out.append(total)
    return np.stack(out)


def series_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cauchy product of matrix field series of shape (D+1, P, m, n)."""
    D = min(a.shape[0], b.shape[0]) - 1
    P = max(a.shape[1], b.shape[1])
    out = np.zeros((D + 1, P, a.shape[2], b.shape[3]), dtype=np.result_type(a, b))
    for n in range(D + 1):
        for j in range(n + 1):
            out[n] += a[j] @ b[n - j]
    return out


def series_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of a matrix field series; a[0] must be invertible pointwise."""
    a0_inv = np.linalg.inv(a[0])
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = a0_inv
    for n in range(1, a.shape[0]):
        acc = np.zeros_like(out[0])
        for j in range(1, n + 1):
            acc = acc + a[j] @ out[n - j]
        out[n] = -a0_inv @ acc
    return out


def series_derivative(a: np.ndarray) -> np.ndarray:
    """d/dt, padded with a zero top coefficient so the shape is kept."""
    out = np.zeros_like(a)
    for n in range(1, a.shape[0]):
        out[n - 1] = n * a[n]
    return out


def series_integrate(a: np.ndarray, constant: np.ndarray | float = 0.0) -> np.ndarray:
    """Antiderivative with value ``constant`` at t = 0, truncated to the input order."""
    out = np.zeros_like(a)
    out[0] = constant
    for n in range(1, a.shape[0]):
        out[n] = a[n - 1] / n
    return out


def series_exp(a: np.ndarray) -> np.ndarray:
    """exp of a scalar field series via the recursion n e_n = sum_k k a_k e_{n-k}."""
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = np.exp(a[0])
    for n in range(1, a.shape[0]):
        acc = np.zeros_like(out[0])
        for k in range(1, n + 1):
            acc = acc + k * a[k] * out[n - k]
        out[n] = acc / n
    return out


def series_trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def series_evaluate(a: np.ndarray, t: complex) -> np.ndarray:
    acc = a[-1]
    for c in a[-2::-1]:
        acc = acc * t + c
    return acc


def exponential_coefficients(rate: float, order: int) -> np.ndarray:
    """Taylor coefficients rate^n / n! of exp(rate t)."""
    return np.array([rate ** n / factorial(n) for n in range(order + 1)])
