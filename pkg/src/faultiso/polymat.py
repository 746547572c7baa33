"""Matrix polynomials in the forward-shift operator and causal rational filtering.

A :class:`PolyMatrix` stores coefficients ``P_0 ... P_d`` for
``P(q) = sum_i P_i q^i`` in ascending powers of the shift ``q``.  The module
also provides the banded block-Toeplitz lifting used by the detector
synthesis and the causal difference-equation simulation of proper rational
filters ``num(q) / den(q)``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "PolyMatrix",
    "poly_from_roots",
    "block_toeplitz",
    "rational_filter_step",
    "run_rational_filter",
]

# Coefficient blocks with max-abs norm at or below this are trimmed.
TRIM_TOL = 1e-12


class PolyMatrix:
    """Real matrix polynomial ``P(q) = P_0 + P_1 q + ... + P_d q^d``.

    All coefficient matrices share one shape; trailing (near-)zero
    coefficients are trimmed so the stored degree is minimal.  The zero
    polynomial keeps a single zero coefficient of the right shape.
    """

    def __init__(self, coeffs: Sequence[np.ndarray] | np.ndarray):
        arr = np.asarray(coeffs, dtype=float)
        if arr.ndim == 1:
            # scalar polynomial given as a flat coefficient list
            arr = arr[:, None, None]
        if arr.ndim != 3:
            raise ValueError("coeffs must be a sequence of equally shaped matrices")
        if arr.shape[0] == 0:
            raise ValueError("at least one coefficient is required")
        d = arr.shape[0] - 1
        while d > 0 and np.max(np.abs(arr[d])) <= TRIM_TOL:
            d -= 1
        self._coeffs = arr[: d + 1].copy()

    @property
    def coeffs(self) -> np.ndarray:
        """Coefficient stack of shape ``(degree + 1, rows, cols)``."""
        return self._coeffs

    @property
    def degree(self) -> int:
        return self._coeffs.shape[0] - 1

    @property
    def rows(self) -> int:
        return self._coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self._coeffs.shape[2]

    @property
    def is_scalar(self) -> bool:
        return self.rows == 1 and self.cols == 1

    def scalar_coeffs(self) -> np.ndarray:
        """Flat coefficient vector of a 1x1 polynomial, ascending powers."""
        if not self.is_scalar:
            raise ValueError("polynomial is not scalar")
        return self._coeffs[:, 0, 0]

    def coeff(self, i: int) -> np.ndarray:
        """Coefficient matrix of q^i (zero matrix beyond the degree)."""
        if i <= self.degree:
            return self._coeffs[i]
        return np.zeros((self.rows, self.cols))

    def eval(self, q0: float) -> np.ndarray:
        """Evaluate ``sum_i P_i q0^i``."""
        out = np.zeros((self.rows, self.cols))
        power = 1.0
        for i in range(self.degree + 1):
            out += self._coeffs[i] * power
            power *= q0
        return out

    def __mul__(self, other: "PolyMatrix") -> "PolyMatrix":
        """Polynomial matrix product via coefficient convolution."""
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        if self.cols != other.rows:
            raise ValueError(
                f"dimension mismatch: ({self.rows}x{self.cols}) * "
                f"({other.rows}x{other.cols})"
            )
        dp, dq = self.degree, other.degree
        out = np.zeros((dp + dq + 1, self.rows, other.cols))
        for i in range(dp + 1):
            for j in range(dq + 1):
                out[i + j] += self._coeffs[i] @ other._coeffs[j]
        return PolyMatrix(out)

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch in polynomial addition")
        d = max(self.degree, other.degree)
        out = np.zeros((d + 1, self.rows, self.cols))
        out[: self.degree + 1] += self._coeffs
        out[: other.degree + 1] += other._coeffs
        return PolyMatrix(out)

    def __neg__(self) -> "PolyMatrix":
        return PolyMatrix(-self._coeffs)

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        return self + (-other)

    def scale(self, c: float) -> "PolyMatrix":
        return PolyMatrix(c * self._coeffs)

    def __repr__(self) -> str:
        return f"PolyMatrix(degree={self.degree}, shape=({self.rows}, {self.cols}))"


def poly_from_roots(roots: Iterable[float]) -> PolyMatrix:
    """Monic scalar polynomial ``prod (q - root)`` in ascending powers."""
    coeffs = np.array([1.0])
    for r in roots:
        # multiply by (q - r): shift up one power and subtract r * current
        coeffs = np.concatenate([[0.0], coeffs]) - r * np.concatenate([coeffs, [0.0]])
    return PolyMatrix(coeffs)


def block_toeplitz(p: PolyMatrix, shifts: int) -> np.ndarray:
    """Banded block-Toeplitz lifting with `shifts` block rows.

    Block row i carries ``P_0 ... P_d`` starting at block column i, giving a
    matrix of shape ``(shifts * rows, (shifts + degree) * cols)``.
    """
    if shifts < 1:
        raise ValueError("shifts must be at least 1")
    r, c, d = p.rows, p.cols, p.degree
    out = np.zeros((shifts * r, (shifts + d) * c))
    for i in range(shifts):
        for j in range(d + 1):
            out[i * r : (i + 1) * r, (i + j) * c : (i + j + 1) * c] = p.coeffs[j]
    return out


def _filter_taps(num: PolyMatrix, den: PolyMatrix) -> tuple[np.ndarray, np.ndarray, int]:
    """Validate properness and return (num coeff stack, den coeffs, delay)."""
    if not den.is_scalar:
        raise ValueError("denominator must be a scalar polynomial")
    d_a = den.degree
    if num.rows != 1:
        raise ValueError("numerator must be a row polynomial")
    if num.degree > d_a:
        raise ValueError(
            f"improper filter: deg(num)={num.degree} > deg(den)={d_a}"
        )
    a = den.scalar_coeffs()
    if abs(a[d_a]) <= TRIM_TOL:
        raise ValueError("leading denominator coefficient must be nonzero")
    c = np.zeros((d_a + 1, num.cols))
    c[: num.degree + 1] = num.coeffs[:, 0, :]
    return c, a, d_a


def rational_filter_step(
    num: PolyMatrix,
    den: PolyMatrix,
    z_window: np.ndarray,
    r_history: np.ndarray,
) -> float:
    """One causal step of ``r = den^{-1}(q) num(q) [z]``.

    Parameters
    ----------
    z_window : array, shape (d_a + 1, n_z)
        Inputs ``z(k - d_a), ..., z(k)`` (oldest first).
    r_history : array, shape (d_a,)
        Outputs ``r(k - d_a), ..., r(k - 1)`` (oldest first).

    Returns the output ``r(k)`` of the difference equation
    ``a_{d_a} r(k) = sum_j c_j z(k - d_a + j) - sum_{i<d_a} a_i r(k - d_a + i)``.
    """
    c, a, d_a = _filter_taps(num, den)
    z_window = np.atleast_2d(np.asarray(z_window, dtype=float))
    if z_window.shape != (d_a + 1, num.cols):
        raise ValueError(f"z_window must have shape ({d_a + 1}, {num.cols})")
    r_history = np.asarray(r_history, dtype=float)
    if r_history.shape != (d_a,):
        raise ValueError(f"r_history must have shape ({d_a},)")
    forced = float(np.sum(c * z_window))
    feedback = float(a[:d_a] @ r_history)
    return (forced - feedback) / a[d_a]


def run_rational_filter(num: PolyMatrix, den: PolyMatrix, z: np.ndarray) -> np.ndarray:
    """Causal simulation of ``den^{-1}(q) num(q) [z]`` with zero initial state.

    `z` has shape ``(K,)`` or ``(K, n_z)``; the zero-padding convention
    supplies the pre-history for both input and output.
    """
    c, a, d_a = _filter_taps(num, den)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[1] != num.cols:
        raise ValueError(f"input dimension {z.shape[1]} != numerator cols {num.cols}")
    # per-channel direct-form filtering; taps reversed into delay order
    b_taps = c[::-1]
    a_taps = a[::-1]
    out = np.zeros(z.shape[0])
    for ch in range(z.shape[1]):
        out += lfilter(b_taps[:, ch], a_taps, z[:, ch])
    return out
