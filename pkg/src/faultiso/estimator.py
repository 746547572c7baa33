"""Sliding-window fault isolation.

Each step regresses the trailing residual window on the regressor window
``[e, 1]`` in closed form, yielding the additive/multiplicative fault
estimate pair.  The regressor e is either the raw nonlinearity signal E(z)
(static pre-filter) or E(z) passed through the detector transfer function
(dynamic pre-filter).  A flat regressor window makes the two faults
indistinguishable; such steps are flagged degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lti import RationalFilter
from .signals import Signal
from .synthesis import DetectorFilter, run_residual

__all__ = [
    "RegressionConfig",
    "FaultEstimate",
    "PrefilterMode",
    "static_prefilter",
    "dynamic_prefilter",
    "DegenerateWindow",
    "EstimatorTrace",
    "regress",
    "regression_constant",
    "pinv_norm",
    "prefilter_step",
    "run_estimator",
    "effective_epsilon",
]


class DegenerateWindow(Exception):
    """Regressor window variance too small to separate the two faults."""


@dataclass(frozen=True)
class RegressionConfig:
    """Window length, variance guard, and degenerate-step policy.

    `epsilon` is scale-aware: a window counts as degenerate when its centered
    deviation is at most ``epsilon * max(1, max|e|)`` over the window.
    """

    n: int = 10
    epsilon: float = 1e-9
    degenerate_policy: str = "hold-last"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("window length must be at least 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.degenerate_policy not in ("hold-last", "emit-error"):
            raise ValueError("degenerate_policy must be 'hold-last' or 'emit-error'")


@dataclass(frozen=True)
class FaultEstimate:
    """One regression output: estimates, degeneracy flag, window constant."""

    f_a: float
    f_m: float
    degenerate: bool
    c_n: float


def effective_epsilon(e_window: np.ndarray, cfg: RegressionConfig) -> float:
    """Scale-aware degeneracy threshold for one window."""
    scale = float(np.max(np.abs(e_window))) if e_window.size else 0.0
    return cfg.epsilon * max(1.0, scale)


def _window_moments(e_window: np.ndarray) -> tuple[float, float]:
    n = e_window.shape[0]
    mean = float(e_window.sum()) / n
    centered = e_window - mean
    var = float(centered @ centered) / n
    return mean, var


def regression_constant(e_window: np.ndarray) -> float:
    """sqrt(V^2 + mean^2 + 1) of the window; always at least 1."""
    e_window = np.asarray(e_window, dtype=float)
    mean, var = _window_moments(e_window)
    return math.sqrt(var + mean * mean + 1.0)


def pinv_norm(e_window: np.ndarray) -> float:
    """Spectral norm of the pseudo-inverse of the regressor matrix [e, 1].

    Closed form from the 2x2 Gram eigenvalues:
    ``sqrt(2 (a + sqrt(a^2 - b)) / (n b))`` with ``a = 1 + V^2 + mean^2`` and
    ``b = 4 V^2``.  Rejects flat windows, where the Gram matrix is singular.
    """
    e_window = np.asarray(e_window, dtype=float)
    n = e_window.shape[0]
    mean, var = _window_moments(e_window)
    if var <= 0.0:
        raise DegenerateWindow("flat window: pseudo-inverse undefined")
    a = 1.0 + var + mean * mean
    b = 4.0 * var
    inner = max(a * a - b, 0.0)
    return math.sqrt(2.0 * (a + math.sqrt(inner)) / (n * b))


def regress(
    e_window: np.ndarray,
    r_window: np.ndarray,
    cfg: RegressionConfig,
    last: FaultEstimate | None = None,
    warmup: bool = False,
) -> FaultEstimate:
    """Closed-form least squares of the residual window on [e, 1].

    Returns the estimate pair in the fixed order (additive, multiplicative).
    When the regressor deviation is at or below the scale-aware guard the
    window is degenerate: the previous estimate is held (flagged) or
    :class:`DegenerateWindow` is raised, per the configured policy.  Warm-up
    windows (zero-padded, `warmup=True`) always hold: their degeneracy says
    nothing about the regressor signal itself.
    """
    e_window = np.asarray(e_window, dtype=float)
    r_window = np.asarray(r_window, dtype=float)
    n = e_window.shape[0]
    if r_window.shape[0] != n:
        raise ValueError("windows must have equal length")
    s_e = float(e_window.sum())
    mean = s_e / n
    centered = e_window - mean
    var = float(centered @ centered) / n
    c_n = math.sqrt(var + mean * mean + 1.0)
    if math.sqrt(var) <= effective_epsilon(e_window, cfg):
        if cfg.degenerate_policy == "emit-error" and not warmup:
            raise DegenerateWindow("flat regressor window: faults are inseparable")
        held = last if last is not None else FaultEstimate(0.0, 0.0, False, 1.0)
        return FaultEstimate(held.f_a, held.f_m, True, c_n)
    s_ee = float(e_window @ e_window)
    s_r = float(r_window.sum())
    s_er = float(e_window @ r_window)
    det = n * s_ee - s_e * s_e
    f_m = (n * s_er - s_e * s_r) / det
    f_a = (s_ee * s_r - s_e * s_er) / det
    return FaultEstimate(f_a, f_m, False, c_n)


@dataclass
class PrefilterMode:
    """Regressor source: identity pass-through or the detector dynamics.

    The dynamic variant owns a modal-realization state that advances one step
    per sample; `state` is the internal state before the pending update.
    """

    variant: str
    T: RationalFilter | None = None
    state: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in ("static", "dynamic"):
            raise ValueError("variant must be 'static' or 'dynamic'")
        if self.variant == "dynamic":
            if self.T is None:
                raise ValueError("dynamic pre-filter requires the detector transfer function")
            if self.state is None:
                self.state = np.zeros(self.T.order)

    def state_norm(self) -> float:
        return 0.0 if self.state is None else float(np.linalg.norm(self.state))


def static_prefilter() -> PrefilterMode:
    return PrefilterMode(variant="static")


def dynamic_prefilter(T: RationalFilter) -> PrefilterMode:
    return PrefilterMode(variant="dynamic", T=T)


def prefilter_step(mode: PrefilterMode, ez: float) -> float:
    """Advance the pre-filter one step and return the regressor sample."""
    if mode.variant == "static":
        return float(ez)
    a_diag = mode.T.poles
    e = float(mode.T.residues @ mode.state + mode.T.feedthrough * ez)
    mode.state = a_diag * mode.state + ez
    return e


@dataclass
class EstimatorTrace:
    """Per-step record of one estimation run."""

    r: np.ndarray
    ez: np.ndarray
    e: np.ndarray
    f_a_hat: np.ndarray
    f_m_hat: np.ndarray
    c_n: np.ndarray
    xp_norm: np.ndarray
    degenerate: np.ndarray
    warmup: np.ndarray
    cfg: RegressionConfig
    variant: str

    def __len__(self) -> int:
        return self.r.shape[0]


def run_estimator(
    filt: DetectorFilter,
    mode: PrefilterMode,
    z,
    cfg: RegressionConfig,
    E: Callable[[np.ndarray], float],
) -> EstimatorTrace:
    """Full pipeline: residual, pre-filter, then windowed regression per step.

    The first ``n - 1`` steps regress on zero-padded windows and are flagged
    as warm-up.  Degenerate windows follow the configured policy.  The
    pre-filter state norm is recorded per step for bound evaluation.
    """
    values = z.values if isinstance(z, Signal) else np.asarray(z, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    steps = values.shape[0]
    n = cfg.n

    r = run_residual(filt, values)
    ez = np.array([E(values[k]) for k in range(steps)])

    e = np.empty(steps)
    xp_norm = np.zeros(steps)
    if mode.variant == "dynamic":
        for k in range(steps):
            xp_norm[k] = mode.state_norm()
            e[k] = prefilter_step(mode, ez[k])
    else:
        e[:] = ez

    e_pad = np.concatenate([np.zeros(n - 1), e])
    r_pad = np.concatenate([np.zeros(n - 1), r])

    f_a_hat = np.empty(steps)
    f_m_hat = np.empty(steps)
    c_n = np.empty(steps)
    degenerate = np.zeros(steps, dtype=bool)
    warmup = np.arange(steps) < n - 1

    last: FaultEstimate | None = None
    for k in range(steps):
        est = regress(
            e_pad[k : k + n], r_pad[k : k + n], cfg, last=last, warmup=bool(warmup[k])
        )
        f_a_hat[k] = est.f_a
        f_m_hat[k] = est.f_m
        c_n[k] = est.c_n
        degenerate[k] = est.degenerate
        if not est.degenerate:
            last = est

    return EstimatorTrace(
        r=r,
        ez=ez,
        e=e,
        f_a_hat=f_a_hat,
        f_m_hat=f_m_hat,
        c_n=c_n,
        xp_norm=xp_norm,
        degenerate=degenerate,
        warmup=warmup,
        cfg=cfg,
        variant=mode.variant,
    )
