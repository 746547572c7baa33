"""Plant descriptions: implicit polynomial (DAE) form, explicit state-space
(ODE) form, the structural conversion between them, and the rank test that
decides whether the aggregated fault can be detected at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .polymat import PolyMatrix

__all__ = [
    "DaeModel",
    "OdeModel",
    "InfeasibleConversion",
    "ode_to_dae",
    "check_detectability",
    "simulate_ode",
]


class InfeasibleConversion(Exception):
    """The structural conditions for rewriting the ODE as a DAE failed."""


@dataclass
class DaeModel:
    """Implicit plant H(q)[x] + L(q)[z] + F(q)[f_a + E(z) f_m] = 0.

    `x` stacks every unknown signal (states and disturbances), `z` every
    known one (outputs and inputs).  F is a single column: the additive and
    multiplicative faults enter through one shared channel, scaled by the
    known static map E.
    """

    H: PolyMatrix
    L: PolyMatrix
    F: PolyMatrix
    E: Callable[[np.ndarray], float]

    def __post_init__(self):
        if not (self.H.rows == self.L.rows == self.F.rows):
            raise ValueError("H, L, F must share their row count")
        if self.F.cols != 1:
            raise ValueError("F must be a single polynomial column")

    @property
    def n_rows(self) -> int:
        return self.H.rows

    @property
    def n_x(self) -> int:
        return self.H.cols

    @property
    def n_z(self) -> int:
        return self.L.cols


@dataclass
class OdeModel:
    """Explicit plant with faults entering the dynamics and output maps.

    State equation  G X(k+1) = A X(k) + B_u u + B_d d + B_f (f_a + E_X(B_X X, u) f_m)
    Output equation y(k)     = C X(k) + D_u u + D_d d + D_f (f_a + E_Y(B_Y X, u) f_m)

    E_X / E_Y are static scalar-valued maps of their first (vector) argument
    and the input.
    """

    G: np.ndarray
    A: np.ndarray
    B_u: np.ndarray
    B_d: np.ndarray
    B_f: np.ndarray
    C: np.ndarray
    D_u: np.ndarray
    D_d: np.ndarray
    D_f: np.ndarray
    B_X: np.ndarray | None = None
    B_Y: np.ndarray | None = None
    E_X: Callable[[np.ndarray, float], float] | None = None
    E_Y: Callable[[np.ndarray, float], float] | None = None

    def __post_init__(self):
        for name in ("G", "A", "B_u", "B_d", "B_f", "C", "D_u", "D_d", "D_f"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n_x = self.A.shape[0]
        n_y = self.C.shape[0]
        if self.G.shape != (n_x, n_x) or self.A.shape != (n_x, n_x):
            raise ValueError("G and A must be square with the state dimension")
        for name, rows in (("B_u", n_x), ("B_d", n_x), ("B_f", n_x)):
            if getattr(self, name).shape[0] != rows:
                raise ValueError(f"{name} must have {rows} rows")
        for name in ("D_u", "D_d", "D_f"):
            if getattr(self, name).shape[0] != n_y:
                raise ValueError(f"{name} must have {n_y} rows")
        if self.C.shape[1] != n_x:
            raise ValueError("C must have the state dimension as column count")
        if self.B_d.shape[1] != self.D_d.shape[1]:
            raise ValueError("B_d and D_d must agree on the disturbance dimension")
        if self.B_u.shape[1] != self.D_u.shape[1]:
            raise ValueError("B_u and D_u must agree on the input dimension")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def n_u(self) -> int:
        return self.B_u.shape[1]

    @property
    def n_d(self) -> int:
        return self.B_d.shape[1]


def _solve_selector(
    B: np.ndarray, C: np.ndarray, D_f: np.ndarray, D_d: np.ndarray, tol: float
) -> np.ndarray:
    """Least-squares K with K C = B, K D_f = 0, K D_d = 0; raises when infeasible."""
    lhs = np.hstack([C, D_f, D_d])  # K @ lhs = [B, 0, 0]
    rhs = np.hstack([B, np.zeros((B.shape[0], D_f.shape[1])), np.zeros((B.shape[0], D_d.shape[1]))])
    # K^T solves lhs^T K^T = rhs^T in the least-squares sense
    kt, *_ = np.linalg.lstsq(lhs.T, rhs.T, rcond=None)
    K = kt.T
    residual = float(np.linalg.norm(K @ lhs - rhs))
    if residual > tol:
        raise InfeasibleConversion(
            f"selector equations unsolvable (residual {residual:.3e} > tol {tol:.3e})"
        )
    return K


def ode_to_dae(ode: OdeModel, tol: float | None = None) -> DaeModel:
    """Rewrite an explicit plant in implicit polynomial form.

    Solves the selector equations ``B_X = K_X C`` (with ``K_X D_f = 0``,
    ``K_X D_d = 0``) and the Y-side analogues by least squares; a residual
    above `tol` raises :class:`InfeasibleConversion`.  On success the unknown
    stack becomes ``x = [X; d]``, the known stack ``z = [y; u]``, and the
    fault column ``F = [B_f; D_f]``.
    """
    n_x, n_y, n_u, n_d = ode.n_x, ode.n_y, ode.n_u, ode.n_d
    if ode.B_f.shape[1] != 1 or ode.D_f.shape[1] != 1:
        raise ValueError("fault channel must be a single column")

    B_X = ode.B_X if ode.B_X is not None else np.zeros((1, n_x))
    B_Y = ode.B_Y if ode.B_Y is not None else np.zeros((1, n_x))
    B_X = np.atleast_2d(np.asarray(B_X, dtype=float))
    B_Y = np.atleast_2d(np.asarray(B_Y, dtype=float))

    tol_x = tol if tol is not None else 1e-9 * np.linalg.norm(B_X) + 1e-30
    tol_y = tol if tol is not None else 1e-9 * np.linalg.norm(B_Y) + 1e-30
    K_X = _solve_selector(B_X, ode.C, ode.D_f, ode.D_d, tol_x)
    K_Y = _solve_selector(B_Y, ode.C, ode.D_f, ode.D_d, tol_y)

    # H(q) = [[A - q G, B_d], [C, D_d]] acting on x = [X; d]
    h0 = np.block([[ode.A, ode.B_d], [ode.C, ode.D_d]])
    h1 = np.zeros_like(h0)
    h1[:n_x, :n_x] = -ode.G
    H = PolyMatrix(np.stack([h0, h1]))

    # L(q) = [[0, B_u], [-I, D_u]] acting on z = [y; u]
    l0 = np.block(
        [
            [np.zeros((n_x, n_y)), ode.B_u],
            [-np.eye(n_y), ode.D_u],
        ]
    )
    L = PolyMatrix(l0[None, :, :])

    F = PolyMatrix(np.vstack([ode.B_f, ode.D_f])[None, :, :])

    D_u = ode.D_u
    e_x, e_y = ode.E_X, ode.E_Y

    def E(z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        y, u = z[:n_y], z[n_y:]
        u_scalar = float(u[0]) if n_u == 1 else u
        corrected = y - D_u @ u
        if e_x is not None:
            return float(e_x(K_X @ corrected, u_scalar))
        if e_y is not None:
            return float(e_y(K_Y @ corrected, u_scalar))
        raise ValueError("the ODE model defines no nonlinearity map")

    return DaeModel(H=H, L=L, F=F, E=E)


def simulate_ode(
    ode: OdeModel,
    E_z: Callable[[np.ndarray], float] | None,
    u: np.ndarray,
    f_a: np.ndarray | None = None,
    f_m: np.ndarray | None = None,
    d: np.ndarray | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Step the explicit plant with faults injected through the shared channel.

    `E_z` maps a known-signal sample ``z = [y; u]`` to the scalar that scales
    the multiplicative fault; it is evaluated on the fault-free output, and
    when the fault feeds through to the output (nonzero D_f) the evaluation
    is re-checked on the final output for consistency.  Returns
    ``(states, outputs, z)`` with ``z = [y, u]`` stacked per step.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    steps = u.shape[0]
    n_x, n_y, n_d = ode.n_x, ode.n_y, ode.n_d
    f_a = np.zeros(steps) if f_a is None else np.asarray(f_a, dtype=float)
    f_m = np.zeros(steps) if f_m is None else np.asarray(f_m, dtype=float)
    d = np.zeros((steps, n_d)) if d is None else np.asarray(d, dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    x = np.zeros(n_x) if x0 is None else np.asarray(x0, dtype=float).copy()
    g_inv = np.linalg.inv(ode.G)
    feedthrough = bool(np.any(ode.D_f))
    states = np.empty((steps, n_x))
    outputs = np.empty((steps, n_y))
    b_f = ode.B_f[:, 0]
    d_f = ode.D_f[:, 0]
    for k in range(steps):
        states[k] = x
        y_nom = ode.C @ x + ode.D_u @ u[k] + ode.D_d @ d[k]
        e_val = E_z(np.concatenate([y_nom, u[k]])) if E_z is not None else 0.0
        aggregated = f_a[k] + e_val * f_m[k]
        y = y_nom + d_f * aggregated
        if feedthrough and E_z is not None:
            e_final = E_z(np.concatenate([y, u[k]]))
            if abs(e_final - e_val) > 1e-9 * max(1.0, abs(e_val)):
                raise RuntimeError(
                    "nonlinearity map depends on fault-affected outputs; "
                    "the implicit feedthrough loop is not supported"
                )
        outputs[k] = y
        x = g_inv @ (
            ode.A @ x + ode.B_u @ u[k] + ode.B_d @ d[k] + b_f * aggregated
        )
    z = np.hstack([outputs, u])
    return states, outputs, z


def check_detectability(
    dae: DaeModel,
    trials: int = 8,
    tol: float = 1e-9,
    rng: np.random.Generator | None = None,
) -> bool:
    """Sampled rank test: does appending F(q) raise the rank of H(q)?

    Polynomial rank equals the rank at all but finitely many points, so the
    maximum numerical rank over `trials` random evaluation points in [-2, 2]
    (excluding the unit circle) decides the question.  Singular values below
    ``tol * sigma_max`` count as zero.
    """
    if trials < 1:
        raise ValueError("at least one trial point is required")
    rng = rng if rng is not None else np.random.default_rng(181)
    rank_h = 0
    rank_hf = 0
    for _ in range(trials):
        while True:
            q0 = rng.uniform(-2.0, 2.0)
            if abs(abs(q0) - 1.0) > 1e-2:
                break
        h = dae.H.eval(q0)
        hf = np.hstack([h, dae.F.eval(q0)])
        rank_h = max(rank_h, _numerical_rank(h, tol))
        rank_hf = max(rank_hf, _numerical_rank(hf, tol))
    return rank_hf > rank_h


def _numerical_rank(mat: np.ndarray, tol: float) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))
