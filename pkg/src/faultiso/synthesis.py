"""Residual generator synthesis.

The detector is a polynomial row N(q) annihilating the unknown-signal
columns of the plant (N(q) H(q) = 0) while passing the fault channel with
unit steady-state gain through a chosen stable denominator a(q).  The
feasibility program is solved as null-space-plus-normalization: the
annihilation constraint defines a subspace (computed by SVD of the banded
coefficient matrix) and the gain condition is one affine constraint inside
it; the minimum-norm solution makes the output deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import MIN_POLE_GAP, RationalFilter
from .model import DaeModel
from .polymat import PolyMatrix, block_toeplitz, run_rational_filter
from .signals import Signal

__all__ = [
    "DetectorFilter",
    "SynthesisError",
    "NoNullSpace",
    "GainUnreachable",
    "ImproperFilter",
    "synthesize_detector",
    "run_residual",
]


class SynthesisError(Exception):
    """Base class for detector synthesis failures."""


class NoNullSpace(SynthesisError):
    """The annihilation constraint has no solution at the requested degree."""


class GainUnreachable(SynthesisError):
    """No annihilating row senses the fault channel at the requested degree."""


class ImproperFilter(SynthesisError):
    """The chosen denominator degree cannot make the filter causal."""


@dataclass(frozen=True)
class DetectorFilter:
    """Synthesized residual generator and its fault transfer function.

    N annihilates the unknown columns; the residual is computed causally from
    the known signals through NL / a, and the aggregated fault reaches the
    residual through T = -NF / a with T(1) = 1.
    """

    N: PolyMatrix
    a: PolyMatrix
    NF: PolyMatrix
    NL: PolyMatrix
    T: RationalFilter
    nullspace_dim: int

    @property
    def dominant_pole(self) -> float:
        return self.T.dominant_pole

    def coefficient_text(self) -> str:
        """Plain-text export: named blocks, one line per power, ascending."""
        lines = ["# fault-iso filter coefficients v1"]
        lines.append(f"N {self.N.degree + 1} {self.N.cols}")
        for i in range(self.N.degree + 1):
            lines.append(" ".join(f"{v:.17g}" for v in self.N.coeffs[i, 0, :]))
        lines.append("a " + " ".join(f"{v:.17g}" for v in self.a.scalar_coeffs()))
        lines.append("T " + " ".join(f"{v:.17g}" for v in self.T.num))
        lines.append(f"NL {self.NL.degree + 1} {self.NL.cols}")
        for i in range(self.NL.degree + 1):
            lines.append(" ".join(f"{v:.17g}" for v in self.NL.coeffs[i, 0, :]))
        return "\n".join(lines) + "\n"


def _validate_denominator(a: PolyMatrix) -> np.ndarray:
    """Roots of a(q); enforces stability plus distinct real poles."""
    if not a.is_scalar:
        raise ValueError("a(q) must be a scalar polynomial")
    coeffs = a.scalar_coeffs()
    if a.degree < 1:
        raise ValueError("a(q) must have degree at least 1")
    roots = np.roots(coeffs[::-1])
    if np.max(np.abs(roots.imag)) > 1e-9:
        raise ValueError("a(q) must have real poles")
    roots = np.sort(roots.real)
    if np.max(np.abs(roots)) >= 1.0:
        raise ValueError("a(q) must be stable (all roots inside the unit circle)")
    if roots.shape[0] > 1 and np.min(np.diff(roots)) < MIN_POLE_GAP:
        raise ValueError(f"poles of a(q) must be distinct (min gap {MIN_POLE_GAP})")
    return roots


def synthesize_detector(
    dae: DaeModel,
    a: PolyMatrix,
    d_n: int,
    svd_cutoff: float = 1e-10,
) -> DetectorFilter:
    """Solve the annihilation-plus-gain program for N(q) of degree `d_n`.

    Builds the banded coefficient matrices of H and F with ``d_n + 1`` block
    rows, extracts an orthonormal basis of the left null space of the H band
    (singular values below ``svd_cutoff * sigma_max`` count as zero), and
    picks the minimum-norm combination meeting the steady-state gain
    condition ``(N F)(1) = -a(1)``.
    """
    if d_n < 0:
        raise ValueError("the filter degree must be nonnegative")
    roots = _validate_denominator(a)
    d_a = a.degree
    shifts = d_n + 1

    h_band = block_toeplitz(dae.H, shifts)
    f_band = block_toeplitz(dae.F, shifts)

    u, sv, _ = np.linalg.svd(h_band)
    sigma_max = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > svd_cutoff * sigma_max)) if sigma_max > 0 else 0
    null_dim = h_band.shape[0] - rank
    if null_dim == 0:
        raise NoNullSpace(
            f"the annihilation constraint has no solution at degree {d_n}"
        )
    basis = u[:, rank:].T  # rows span {v : v @ h_band = 0}

    gain_vec = basis @ f_band.sum(axis=1)
    gain_target = -float(a.eval(1.0)[0, 0])
    gain_scale = np.linalg.norm(basis @ f_band, ord=2) if f_band.size else 0.0
    if np.linalg.norm(gain_vec) <= 1e-12 * max(1.0, gain_scale):
        raise GainUnreachable(
            f"no annihilating filter of degree {d_n} senses the fault channel"
        )
    weights = gain_target * gain_vec / float(gain_vec @ gain_vec)
    n_bar = weights @ basis

    n_rows = dae.n_rows
    N = PolyMatrix(n_bar.reshape(shifts, 1, n_rows))
    NF = N * dae.F
    NL = N * dae.L
    if NF.degree > d_a or NL.degree > d_a:
        raise ImproperFilter(
            f"deg(NF)={NF.degree}, deg(NL)={NL.degree} exceed deg(a)={d_a}"
        )

    _verify_invariants(n_bar, h_band, NF, a)

    a_lead = a.scalar_coeffs()[d_a]
    t_num = np.zeros(d_a + 1)
    t_num[: NF.degree + 1] = -NF.coeffs[:, 0, 0] / a_lead
    T = RationalFilter(t_num, roots)
    return DetectorFilter(N=N, a=a, NF=NF, NL=NL, T=T, nullspace_dim=null_dim)


def _verify_invariants(n_bar: np.ndarray, h_band: np.ndarray, NF: PolyMatrix, a: PolyMatrix) -> None:
    annihilation = np.linalg.norm(n_bar @ h_band)
    scale = max(1.0, np.linalg.norm(n_bar) * np.linalg.norm(h_band))
    if annihilation > 1e-8 * scale:
        raise SynthesisError(f"annihilation residual {annihilation:.3e} too large")
    gain_err = abs(float(NF.eval(1.0)[0, 0]) + float(a.eval(1.0)[0, 0]))
    if gain_err > 1e-8 * max(1.0, abs(float(a.eval(1.0)[0, 0]))):
        raise SynthesisError(f"steady-state gain residual {gain_err:.3e} too large")


def run_residual(filt: DetectorFilter, z) -> np.ndarray:
    """Causal residual simulation with zero initial conditions.

    `z` may be a :class:`Signal` or an array of shape (K, n_z); returns the
    scalar residual trace.
    """
    values = z.values if isinstance(z, Signal) else np.asarray(z, dtype=float)
    return run_rational_filter(filt.NL, filt.a, values)
