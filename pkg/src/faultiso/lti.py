"""Scalar proper rational filters with distinct real poles.

Provides partial-fraction residues, the diagonal (modal) realization used to
expose internal filter states, and the three constants that bound the
windowed output of a zero-steady-state-gain filter in terms of its initial
state and the mean/deviation of the input since onset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polymat import PolyMatrix, poly_from_roots, run_rational_filter

__all__ = [
    "RationalFilter",
    "BoundConstants",
    "residues",
    "zero_ss_bound",
]

MIN_POLE_GAP = 1e-6


def residues(num: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """Partial-fraction residues of ``num(q) / prod(q - p_i)``.

    Uses ``r_i = num(p_i) / prod_{j != i} (p_i - p_j)``, the convention under
    which the impulse response is ``b_d delta(k) + sum_i r_i p_i^{k-1}`` for
    k >= 1.  Poles must be distinct.
    """
    num = np.asarray(num, dtype=float)
    poles = np.asarray(poles, dtype=float)
    d = poles.shape[0]
    gaps = np.abs(poles[:, None] - poles[None, :]) + np.eye(d)
    if np.min(gaps) < MIN_POLE_GAP:
        raise ValueError(f"poles must be distinct (min gap {MIN_POLE_GAP})")
    out = np.empty(d)
    powers = np.arange(num.shape[0])
    for i in range(d):
        b_at_pole = float(np.sum(num * poles[i] ** powers))
        denom = np.prod(poles[i] - np.delete(poles, i)) if d > 1 else 1.0
        out[i] = b_at_pole / denom
    return out


class RationalFilter:
    """Proper scalar filter ``b(q) / prod(q - p_i)`` with distinct real poles.

    The denominator is monic with strictly stable poles.  On construction the
    partial-fraction data is validated against a direct impulse-response
    simulation over the first 50 steps.
    """

    def __init__(self, num, poles, validate: bool = True):
        poles = np.asarray(poles, dtype=float)
        if poles.ndim != 1 or poles.shape[0] < 1:
            raise ValueError("at least one pole is required")
        if np.max(np.abs(poles)) >= 1.0:
            raise ValueError("poles must lie strictly inside the unit circle")
        d = poles.shape[0]
        num = np.asarray(num, dtype=float)
        if num.ndim != 1:
            raise ValueError("numerator must be a flat coefficient vector")
        if num.shape[0] > d + 1:
            if np.max(np.abs(num[d + 1 :])) > 1e-12:
                raise ValueError("improper filter: numerator degree exceeds pole count")
            num = num[: d + 1]
        padded = np.zeros(d + 1)
        padded[: num.shape[0]] = num
        self.num = padded
        self.poles = poles
        self.residues = residues(padded, poles)
        self.feedthrough = float(padded[d])
        i_dom = int(np.argmax(np.abs(poles)))
        self.dominant_pole = float(poles[i_dom])
        if validate:
            self._check_partial_fractions()

    @property
    def order(self) -> int:
        return self.poles.shape[0]

    def den_coeffs(self) -> np.ndarray:
        """Monic denominator coefficients, ascending powers."""
        return poly_from_roots(self.poles).scalar_coeffs()

    def num_poly(self) -> PolyMatrix:
        return PolyMatrix(self.num)

    def den_poly(self) -> PolyMatrix:
        return poly_from_roots(self.poles)

    def eval(self, q0: float) -> float:
        """Frequency-domain evaluation b(q0) / a(q0)."""
        powers = q0 ** np.arange(self.order + 1)
        return float(self.num @ powers) / float(np.prod(q0 - self.poles))

    def impulse_response(self, length: int) -> np.ndarray:
        """Closed-form impulse response from the partial-fraction data."""
        h = np.zeros(length)
        h[0] = self.feedthrough
        if length > 1:
            k = np.arange(1, length)
            h[1:] = (self.residues[None, :] * self.poles[None, :] ** (k[:, None] - 1)).sum(axis=1)
        return h

    def _check_partial_fractions(self) -> None:
        length = 51
        direct = run_rational_filter(
            self.num_poly(), self.den_poly(), np.eye(length, 1)[:, 0]
        )
        closed = self.impulse_response(length)
        err = np.max(np.abs(direct - closed))
        scale = max(1.0, np.max(np.abs(closed)))
        if err > 1e-9 * scale:
            raise ValueError(
                f"partial-fraction data inconsistent with impulse response (err={err:.3e})"
            )

    def modal_realization(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """Diagonal state-space realization (A, B, C, D).

        A = diag(poles), B = ones, C = residues, D = feedthrough; the spectral
        norm of A equals the dominant pole magnitude.
        """
        return (
            np.diag(self.poles),
            np.ones(self.order),
            self.residues.copy(),
            self.feedthrough,
        )

    def simulate_modal(
        self, u: np.ndarray, x0: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Run the modal realization over an input sequence.

        Returns ``(y, states)`` where ``states[k]`` is the internal state at
        step k (before the update driven by u[k]); ``states`` has one extra
        row holding the terminal state.
        """
        u = np.asarray(u, dtype=float)
        if u.ndim != 1:
            raise ValueError("input must be scalar-valued")
        d = self.order
        x = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).copy()
        if x.shape != (d,):
            raise ValueError(f"x0 must have shape ({d},)")
        a_diag = self.poles
        c = self.residues
        y = np.empty(u.shape[0])
        states = np.empty((u.shape[0] + 1, d))
        for k in range(u.shape[0]):
            states[k] = x
            y[k] = c @ x + self.feedthrough * u[k]
            x = a_diag * x + u[k]
        states[-1] = x
        return y, states

    def bound_constants(self, n: int) -> "BoundConstants":
        """Windowed output-bound constants for window length n."""
        if n < 1:
            raise ValueError("window length must be at least 1")
        sum_r2 = float(self.residues @ self.residues)
        p = abs(self.dominant_pole)
        c0 = math.sqrt(n * sum_r2)
        c1 = math.sqrt(n * self.order * sum_r2) / (1.0 - p)
        c2 = abs(self.feedthrough) + float(
            np.sum(np.abs(self.residues) / (1.0 - np.abs(self.poles)))
        )
        return BoundConstants(c0=c0, c1=c1, c2=c2, n=n)

    def gain_grid_estimate(self, points: int = 1024) -> float:
        """Frequency-grid estimate of the peak gain (diagnostics only)."""
        omega = np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)
        q = np.exp(1j * omega)
        num = np.polyval(self.num[::-1], q)
        den = np.prod(q[:, None] - self.poles[None, :], axis=1)
        return float(np.max(np.abs(num / den)))

    def __repr__(self) -> str:
        return (
            f"RationalFilter(order={self.order}, dominant_pole={self.dominant_pole:+.4f})"
        )


@dataclass(frozen=True)
class BoundConstants:
    """Constants bounding the windowed output of a zero-gain filter.

    c0 scales the initial-state decay, c1 the post-onset input mean, and c2
    the post-onset input deviation; n is the output window length they were
    built for.
    """

    c0: float
    c1: float
    c2: float
    n: int


def _pole_power(p_abs: float, exponent: float) -> float:
    """|p|^exponent with the 0^negative edge mapped to +inf."""
    if p_abs == 0.0 and exponent < 0:
        return math.inf
    return p_abs**exponent


def zero_ss_bound(
    filt: RationalFilter,
    n: int,
    k: int,
    k0: int,
    x0_norm: float,
    u_mean: float,
    u_std: float,
) -> float:
    """Upper bound on the windowed output norm of a zero-gain filter.

    Requires ``num(1) = 0`` (zero steady-state gain).  `u_mean` and `u_std`
    are the mean and centered deviation of the input over the ``k - k0``
    samples since onset; the input must be zero through time k0 and the
    internal state at time 0 must have norm `x0_norm`.
    """
    gain_at_one = float(np.sum(filt.num))
    if abs(gain_at_one) > 1e-10 * max(1.0, np.max(np.abs(filt.num))):
        raise ValueError("filter steady-state gain must be zero")
    if k < k0:
        raise ValueError("evaluation instant must not precede the onset")
    c = filt.bound_constants(n)
    p = abs(filt.dominant_pole)
    m = k - k0
    return (
        c.c0 * x0_norm * _pole_power(p, k - n)
        + c.c1 * abs(u_mean) * _pole_power(p, k - n - k0)
        + c.c2 * math.sqrt(m) * u_std
    )
