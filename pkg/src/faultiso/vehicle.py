"""Lateral single-track vehicle case study.

Continuous-time linearized lateral dynamics (state: lateral velocity, yaw
rate, lateral error, heading error), exact zero-order-hold discretization,
and assembly of the faulty-steering scenario: a sinusoidal steering input
with an additive offset fault and a multiplicative loss-of-effectiveness
fault entering the steering channel together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .bounds import fault_onset
from .model import DaeModel, OdeModel, ode_to_dae
from .signals import Signal, gen_piecewise, gen_sine

__all__ = [
    "BicycleParams",
    "DiscretePlant",
    "Scenario",
    "CaseStudy",
    "continuous_matrices",
    "matrix_exp",
    "discretize",
    "simulate_plant",
    "build_case_study",
    "BASELINE_FAULT_ADDITIVE",
    "BASELINE_FAULT_MULTIPLICATIVE",
]

DEG = np.pi / 180.0

# baseline incipient fault profiles: (start index, mode, value or per-step slope)
BASELINE_FAULT_ADDITIVE = (
    (0, "const", 0.0),
    (850, "ramp", 2.5e-4 * DEG),
    (1250, "const", 0.1 * DEG),
)
BASELINE_FAULT_MULTIPLICATIVE = (
    (0, "ramp", -0.05 / 100.0),
    (400, "const", -0.2),
)


@dataclass(frozen=True)
class BicycleParams:
    """Physical parameters of the single-track lateral model."""

    C_f: float = 1.50e5  # front cornering stiffness [N/rad]
    C_r: float = 1.10e5  # rear cornering stiffness [N/rad]
    l_f: float = 1.3  # front axle to CoG [m]
    l_r: float = 1.7  # rear axle to CoG [m]
    v_x: float = 19.0  # longitudinal velocity [m/s]
    m: float = 1500.0  # vehicle mass [kg]
    I: float = 2600.0  # yaw inertia [kg m^2]
    g: float = 9.81  # gravitational acceleration [m/s^2]
    h: float = 0.01  # sampling interval [s]

    def __post_init__(self):
        for name in ("C_f", "C_r", "l_f", "l_r", "v_x", "m", "I", "g", "h"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class DiscretePlant:
    """Zero-order-hold discretization of the lateral model."""

    A: np.ndarray
    B_u: np.ndarray
    B_d: np.ndarray
    B_f: np.ndarray
    C: np.ndarray
    h: float


def continuous_matrices(
    params: BicycleParams, stabilized_signs: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Continuous-time matrices of the lateral model.

    State order [v_y, yaw rate, lateral error, heading error], disturbance
    order [sin(bank angle), curvature]; the measured outputs are the last
    three states.  The default sign pattern leaves the lateral damping block
    positive (open-loop unstable); `stabilized_signs` switches to the
    conventional negative-definite form for users who need a stable plant.
    """
    p = params
    a11 = (p.C_f + p.C_r) / (p.v_x * p.m)
    a12 = (p.l_f * p.C_f - p.l_r * p.C_r) / (p.v_x * p.m)
    a21 = (p.l_f * p.C_f - p.l_r * p.C_r) / (p.v_x * p.I)
    a22 = (p.l_f**2 * p.C_f + p.l_r**2 * p.C_r) / (p.v_x * p.I)
    b1 = -p.C_f / p.m
    b2 = -p.l_f * p.C_f / p.I
    if stabilized_signs:
        a_top = [[-a11, -a12 - p.v_x, 0.0, 0.0], [-a21, -a22, 0.0, 0.0]]
        b1, b2 = -b1, -b2
    else:
        a_top = [[a11, a12, 0.0, 0.0], [a21, a22, 0.0, 0.0]]
    a_bar = np.array(a_top + [[-1.0, 0.0, 0.0, p.v_x], [0.0, -1.0, 0.0, 0.0]])
    b_u = np.array([[b1], [b2], [0.0], [0.0]])
    b_d = np.array([[p.g, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, p.v_x]])
    c = np.array(
        [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
    )
    # the faults act on the steering channel
    b_f = b_u.copy()
    return a_bar, b_u, b_d, b_f, c


def matrix_exp(mat: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade approximation)."""
    return expm(np.asarray(mat, dtype=float))


def discretize(
    a_bar: np.ndarray,
    b_bars: dict[str, np.ndarray],
    h: float,
) -> dict[str, np.ndarray]:
    """Exact zero-order-hold discretization via one augmented exponential.

    Returns ``{"A": e^{A h}, name: int_0^h e^{A s} ds @ B_name, ...}`` for
    every entry of `b_bars`, all from a single block exponential.
    """
    if h <= 0:
        raise ValueError("sampling interval must be positive")
    n = a_bar.shape[0]
    names = list(b_bars)
    widths = [np.atleast_2d(b_bars[name]).shape[1] for name in names]
    total = sum(widths)
    aug = np.zeros((n + total, n + total))
    aug[:n, :n] = a_bar
    col = n
    for name, w in zip(names, widths):
        aug[:n, col : col + w] = np.atleast_2d(b_bars[name])
        col += w
    big = matrix_exp(aug * h)
    out = {"A": big[:n, :n]}
    col = n
    for name, w in zip(names, widths):
        out[name] = big[:n, col : col + w]
        col += w
    return out


def discretize_plant(params: BicycleParams, stabilized_signs: bool = False) -> DiscretePlant:
    """Discretize the lateral model at its sampling interval."""
    a_bar, b_u, b_d, b_f, c = continuous_matrices(params, stabilized_signs)
    blocks = discretize(a_bar, {"B_u": b_u, "B_d": b_d, "B_f": b_f}, params.h)
    return DiscretePlant(
        A=blocks["A"], B_u=blocks["B_u"], B_d=blocks["B_d"], B_f=blocks["B_f"], C=c, h=params.h
    )


@dataclass(frozen=True)
class Scenario:
    """Input and fault profile of one simulation run."""

    length: int = 2000
    amplitude: float = 2.3e-3  # steering amplitude [rad]
    freq_hz: float = 0.3
    fault_additive: tuple = BASELINE_FAULT_ADDITIVE
    fault_multiplicative: tuple = BASELINE_FAULT_MULTIPLICATIVE

    def build_signals(self, h: float) -> tuple[Signal, Signal, Signal]:
        u = gen_sine(self.amplitude, self.freq_hz, h, self.length)
        f_a = gen_piecewise([tuple(bp) for bp in self.fault_additive], self.length)
        f_m = gen_piecewise([tuple(bp) for bp in self.fault_multiplicative], self.length)
        return u, f_a, f_m


@dataclass
class CaseStudy:
    """Assembled case study: plant, implicit model, signals, onsets."""

    params: BicycleParams
    plant: DiscretePlant
    dae: DaeModel
    z: Signal
    u: Signal
    f_a: Signal
    f_m: Signal
    k0: int
    k0_a: int
    k0_m: int


def simulate_plant(
    plant: DiscretePlant,
    u: np.ndarray,
    f_a: np.ndarray | None = None,
    f_m: np.ndarray | None = None,
    d: np.ndarray | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Step the faulty plant; returns (states, outputs).

    The faults enter the steering channel together: the drive term is
    ``B_f (f_a + u f_m)`` on top of the nominal input and disturbance terms.
    """
    u = np.asarray(u, dtype=float)
    steps = u.shape[0]
    n_x = plant.A.shape[0]
    n_d = plant.B_d.shape[1]
    f_a = np.zeros(steps) if f_a is None else np.asarray(f_a, dtype=float)
    f_m = np.zeros(steps) if f_m is None else np.asarray(f_m, dtype=float)
    d = np.zeros((steps, n_d)) if d is None else np.asarray(d, dtype=float)
    x = np.zeros(n_x) if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.empty((steps, n_x))
    outputs = np.empty((steps, plant.C.shape[0]))
    b_u = plant.B_u[:, 0]
    b_f = plant.B_f[:, 0]
    for k in range(steps):
        states[k] = x
        outputs[k] = plant.C @ x
        aggregated = f_a[k] + u[k] * f_m[k]
        x = plant.A @ x + b_u * u[k] + plant.B_d @ d[k] + b_f * aggregated
    return states, outputs


def bicycle_ode(params: BicycleParams, stabilized_signs: bool = False) -> OdeModel:
    """Explicit-form model whose nonlinearity map is the steering input."""
    plant = discretize_plant(params, stabilized_signs)
    n_x = plant.A.shape[0]
    n_y = plant.C.shape[0]
    return OdeModel(
        G=np.eye(n_x),
        A=plant.A,
        B_u=plant.B_u,
        B_d=plant.B_d,
        B_f=plant.B_f,
        C=plant.C,
        D_u=np.zeros((n_y, 1)),
        D_d=np.zeros((n_y, plant.B_d.shape[1])),
        D_f=np.zeros((n_y, 1)),
        B_X=np.zeros((1, n_x)),
        B_Y=np.zeros((1, n_x)),
        E_X=lambda v, u: u,
    )


def build_case_study(
    params: BicycleParams | None = None,
    scenario: Scenario | None = None,
    stabilized_signs: bool = False,
) -> CaseStudy:
    """Discretize, convert to implicit form, and simulate the faulty run.

    The known signal stacks the three measured outputs and the steering
    input; the ground-truth fault signals and their onset indices are
    returned alongside for verification use.
    """
    params = params if params is not None else BicycleParams()
    scenario = scenario if scenario is not None else Scenario()
    for bp in scenario.fault_additive + scenario.fault_multiplicative:
        if bp[0] >= scenario.length and bp[0] > 0:
            raise ValueError("scenario too short for its fault breakpoints")
    plant = discretize_plant(params, stabilized_signs)
    ode = bicycle_ode(params, stabilized_signs)
    dae = ode_to_dae(ode)

    u, f_a, f_m = scenario.build_signals(params.h)
    _, outputs = simulate_plant(
        plant, u.scalar(), f_a.scalar(), f_m.scalar()
    )
    z = Signal(np.hstack([outputs, u.values]))
    k0_a = fault_onset(f_a.scalar(), np.zeros(scenario.length))
    k0_m = fault_onset(np.zeros(scenario.length), f_m.scalar())
    k0 = fault_onset(f_a.scalar(), f_m.scalar())
    return CaseStudy(
        params=params,
        plant=plant,
        dae=dae,
        z=z,
        u=u,
        f_a=f_a,
        f_m=f_m,
        k0=k0,
        k0_a=k0_a,
        k0_m=k0_m,
    )
