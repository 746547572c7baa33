"""Estimation-error bound evaluation along recorded traces.

The bounds are verification-side quantities: they consume the ground-truth
fault signals and the fault onset index, neither of which the online
estimator sees.  Two families are provided, one per pre-filter variant, plus
the constant-fault specializations and the product-signal variance
inequalities used as test oracles.

The pre-filter state enters the dynamic coefficients through its norm at
the fault onset; the constant-fault specializations carry their own decay
exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .estimator import EstimatorTrace
from .lti import BoundConstants, RationalFilter
from .signals import window_mean, window_norms, window_std
from .synthesis import DetectorFilter

__all__ = [
    "BoundInputs",
    "BoundTrace",
    "alpha_coeffs",
    "static_bound",
    "beta_coeffs",
    "dynamic_bound",
    "evaluate_bounds",
    "constant_fault_static_series",
    "constant_fault_dynamic_series",
    "var_product_check",
    "error_filter",
    "fault_onset",
]

# Absolute slack when flagging domination, matching the verification
# tolerance of the acceptance suite.
DOMINATION_SLACK = 1e-9


def error_filter(filt: DetectorFilter) -> RationalFilter:
    """Tracking-error transfer function: the fault map minus identity.

    Shares the poles and residues of the fault map; only the feedthrough
    shifts by one, so the steady-state gain is zero.
    """
    num = filt.T.num.copy()
    num -= filt.a.scalar_coeffs() / filt.a.scalar_coeffs()[-1]
    g = RationalFilter(num, filt.T.poles)
    if abs(float(np.sum(g.num))) > 1e-9:
        raise ValueError("error filter must have zero steady-state gain")
    return g


def fault_onset(f_a: np.ndarray, f_m: np.ndarray) -> int:
    """Last index at which both fault signals are still zero.

    Signals are zero through the returned k0 and may be nonzero after it;
    -1 when a fault is active from the very first sample, 0 when both
    signals are identically zero.
    """
    active = (np.asarray(f_a) != 0) | (np.asarray(f_m) != 0)
    nz = np.flatnonzero(active)
    if nz.size == 0:
        return 0
    return int(nz[0]) - 1


@dataclass(frozen=True)
class BoundInputs:
    """Everything one bound evaluation at step k needs.

    Arrays run over the full trace; `k` and `k0` index into them.  The
    constants belong to the tracking-error filter and window length n; `p`
    is the dominant pole magnitude of the detector denominator.
    """

    k: int
    k0: int
    n: int
    f_a: np.ndarray
    f_m: np.ndarray
    ez: np.ndarray
    e: np.ndarray
    xp_k0_norm: float
    constants: BoundConstants
    p: float

    def __post_init__(self):
        if self.k < self.k0:
            raise ValueError("evaluation instant must not precede the onset")
        if self.constants.n != self.n:
            raise ValueError("bound constants were built for a different window length")


def _pole_power(p: float, exponent: float) -> float:
    if p == 0.0 and exponent < 0:
        return math.inf
    return abs(p) ** exponent


def alpha_coeffs(inp: BoundInputs) -> tuple[float, float, float, float]:
    """Static pre-filter coefficients (transient, additive-drift,
    multiplicative-drift, residual)."""
    k, k0, n = inp.k, inp.k0, inp.n
    m = k - k0
    c = inp.constants
    c_n = math.sqrt(
        window_std(inp.e, k, n) ** 2 + window_mean(inp.e, k, n) ** 2 + 1.0
    )
    e_inf = window_norms(inp.e, k, n)[1]
    efm = inp.e * inp.f_m
    root_m_over_n = math.sqrt(m / n)
    a0 = c.c1 * (c_n / math.sqrt(n)) * (
        abs(window_mean(inp.f_a, k, m)) + abs(window_mean(efm, k, m))
    )
    a1 = c.c2 * c_n * root_m_over_n
    a2 = c.c2 * c_n * root_m_over_n * (
        math.sqrt(m) * window_std(inp.ez, k, m) + abs(window_mean(inp.ez, k, m))
    )
    a3 = c_n * (
        window_std(inp.f_a, k, n)
        + window_std(inp.f_m, k, n) * e_inf
        + c.c2 * root_m_over_n * abs(window_mean(inp.f_m, k, m)) * window_std(inp.ez, k, m)
    )
    return a0, a1, a2, a3


def static_bound(inp: BoundInputs) -> float:
    """Right-hand side of the static pre-filter estimation-error bound."""
    a0, a1, a2, a3 = alpha_coeffs(inp)
    k, k0, n = inp.k, inp.k0, inp.n
    m = k - k0
    v_n_e = window_std(inp.e, k, n)
    if v_n_e <= 0.0:
        return math.inf
    return (
        a0 * _pole_power(inp.p, m)
        + a1 * window_std(inp.f_a, k, m)
        + a2 * window_std(inp.f_m, k, m)
        + a3
    ) / v_n_e


def beta_coeffs(inp: BoundInputs) -> tuple[float, float, float, float]:
    """Dynamic pre-filter coefficients; the pre-filter state enters through
    its norm at the fault onset."""
    k, k0, n = inp.k, inp.k0, inp.n
    m = k - k0
    c = inp.constants
    c_n = math.sqrt(
        window_std(inp.e, k, n) ** 2 + window_mean(inp.e, k, n) ** 2 + 1.0
    )
    e_inf = window_norms(inp.e, k, n)[1]
    mismatch_inf = window_norms(inp.e - inp.ez, k, n)[1]
    ezfm = inp.ez * inp.f_m
    mu_n_fm = window_mean(inp.f_m, k, n)
    root_m_over_n = math.sqrt(m / n)
    b0 = (c_n / math.sqrt(n)) * (
        c.c1
        * (
            abs(window_mean(inp.f_a, k, n))
            + abs(window_mean(ezfm, k, m) - window_mean(inp.ez, k, m) * mu_n_fm)
        )
        + c.c0 * abs(mu_n_fm) * inp.xp_k0_norm
    )
    b1 = c.c2 * c_n * root_m_over_n
    b2 = c.c2 * c_n * root_m_over_n * (
        math.sqrt(m) * window_std(inp.ez, k, m) + abs(window_mean(inp.ez, k, m))
    )
    b3 = c_n * (
        window_std(inp.f_a, k, n)
        + window_std(inp.f_m, k, n) * (e_inf + mismatch_inf)
        + c.c2
        * root_m_over_n
        * abs(window_mean(inp.f_m, k, m) - mu_n_fm)
        * window_std(inp.ez, k, m)
    )
    return b0, b1, b2, b3


def dynamic_bound(inp: BoundInputs) -> float:
    """Right-hand side of the dynamic pre-filter estimation-error bound."""
    b0, b1, b2, b3 = beta_coeffs(inp)
    k, k0, n = inp.k, inp.k0, inp.n
    m = k - k0
    v_n_e = window_std(inp.e, k, n)
    if v_n_e <= 0.0:
        return math.inf
    return (
        b0 * _pole_power(inp.p, m)
        + b1 * window_std(inp.f_a, k, m)
        + b2 * window_std(inp.f_m, k, m)
        + b3
    ) / v_n_e


@dataclass
class BoundTrace:
    """Bound series along a run: coefficients, right-hand sides, actual
    error, and the domination verdict on valid (post-warm-up,
    non-degenerate, post-onset) steps."""

    k0: int
    n: int
    coeffs: np.ndarray
    rhs: np.ndarray
    actual: np.ndarray
    valid: np.ndarray
    dominated: np.ndarray

    def violations(self) -> np.ndarray:
        return np.flatnonzero(self.valid & ~self.dominated)


def _rolling_stats(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trailing-window mean, deviation, and max-abs with zero pre-padding."""
    pad = np.concatenate([np.zeros(n - 1), x])
    win = sliding_window_view(pad, n)
    mean = win.mean(axis=1)
    centered = win - mean[:, None]
    var = (centered * centered).mean(axis=1)
    return mean, np.sqrt(var), np.abs(win).max(axis=1)


def _anchored_stats(x: np.ndarray, k0: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and deviation over [k0 + 1, k] per k; zero for k <= k0.

    Prefix sums of the signal shifted by its first post-onset sample; the
    shift leaves the deviation invariant while keeping windows that sit at
    a constant level exactly at zero deviation.
    """
    steps = x.shape[0]
    first = k0 + 1
    shift = x[first] if 0 <= first < steps else 0.0
    xs = x - shift
    s = np.cumsum(xs)
    q = np.cumsum(xs * xs)
    base_s = s[k0] if k0 >= 0 else 0.0
    base_q = q[k0] if k0 >= 0 else 0.0
    k = np.arange(steps)
    m = (k - k0).astype(float)
    mean = np.zeros(steps)
    std = np.zeros(steps)
    sel = m > 0
    mean_shifted = (s[sel] - base_s) / m[sel]
    var = np.maximum((q[sel] - base_q) / m[sel] - mean_shifted**2, 0.0)
    mean[sel] = mean_shifted + shift
    std[sel] = np.sqrt(var)
    return mean, std


def evaluate_bounds(
    trace: EstimatorTrace,
    f_a: np.ndarray,
    f_m: np.ndarray,
    k0: int,
    constants: BoundConstants,
    p: float,
) -> BoundTrace:
    """Vectorized bound series for a full run.

    Evaluates the static or dynamic family according to the trace's
    pre-filter variant.  Degenerate steps report an infinite bound and are
    excluded from the valid mask, as are warm-up steps and steps before the
    onset.
    """
    f_a = np.asarray(f_a, dtype=float)
    f_m = np.asarray(f_m, dtype=float)
    steps = len(trace)
    n = trace.cfg.n
    if constants.n != n:
        raise ValueError("bound constants were built for a different window length")
    k = np.arange(steps)
    m = (k - k0).astype(float)

    mu_n_e, v_n_e, inf_e = _rolling_stats(trace.e, n)
    c_n = np.sqrt(v_n_e**2 + mu_n_e**2 + 1.0)
    mu_n_fa, v_n_fa, _ = _rolling_stats(f_a, n)
    mu_n_fm, v_n_fm, _ = _rolling_stats(f_m, n)
    mu_m_fa, v_m_fa = _anchored_stats(f_a, k0)
    mu_m_fm, v_m_fm = _anchored_stats(f_m, k0)
    mu_m_ez, v_m_ez = _anchored_stats(trace.ez, k0)

    root_m_over_n = np.sqrt(np.maximum(m, 0.0) / n)
    root_m = np.sqrt(np.maximum(m, 0.0))
    pole_pow = np.where(m >= 0, abs(p) ** np.maximum(m, 0.0), 0.0)
    if p == 0.0:
        pole_pow = np.where(m == 0, 1.0, 0.0)

    coeffs = np.zeros((steps, 4))
    if trace.variant == "static":
        mu_m_efm, _ = _anchored_stats(trace.e * f_m, k0)
        coeffs[:, 0] = constants.c1 * (c_n / math.sqrt(n)) * (
            np.abs(mu_m_fa) + np.abs(mu_m_efm)
        )
        coeffs[:, 3] = c_n * (
            v_n_fa
            + v_n_fm * inf_e
            + constants.c2 * root_m_over_n * np.abs(mu_m_fm) * v_m_ez
        )
    else:
        mu_m_ezfm, _ = _anchored_stats(trace.ez * f_m, k0)
        _, _, inf_mismatch = _rolling_stats(trace.e - trace.ez, n)
        xp_k0 = float(trace.xp_norm[k0]) if k0 >= 0 else 0.0
        coeffs[:, 0] = (c_n / math.sqrt(n)) * (
            constants.c1 * (np.abs(mu_n_fa) + np.abs(mu_m_ezfm - mu_m_ez * mu_n_fm))
            + constants.c0 * np.abs(mu_n_fm) * xp_k0
        )
        coeffs[:, 3] = c_n * (
            v_n_fa
            + v_n_fm * (inf_e + inf_mismatch)
            + constants.c2 * root_m_over_n * np.abs(mu_m_fm - mu_n_fm) * v_m_ez
        )
    coeffs[:, 1] = constants.c2 * c_n * root_m_over_n
    coeffs[:, 2] = coeffs[:, 1] * (root_m * v_m_ez + np.abs(mu_m_ez))

    numerator = (
        coeffs[:, 0] * pole_pow
        + coeffs[:, 1] * v_m_fa
        + coeffs[:, 2] * v_m_fm
        + coeffs[:, 3]
    )
    rhs = np.full(steps, math.inf)
    ok = (v_n_e > 0.0) & ~trace.degenerate
    rhs[ok] = numerator[ok] / v_n_e[ok]

    actual = np.hypot(trace.f_a_hat - mu_n_fa, trace.f_m_hat - mu_n_fm)
    valid = (k >= max(k0, n - 1)) & ok
    dominated = actual <= rhs * (1.0 + 1e-12) + DOMINATION_SLACK
    return BoundTrace(
        k0=k0, n=n, coeffs=coeffs, rhs=rhs, actual=actual, valid=valid, dominated=dominated
    )


def constant_fault_static_series(
    trace: EstimatorTrace,
    f_bar_a: float,
    f_bar_m: float,
    k0: int,
    constants: BoundConstants,
    p: float,
) -> np.ndarray:
    """Constant-fault specialization of the static bound, per step.

    Valid for k >= k0 + n; earlier entries are NaN.
    """
    steps = len(trace)
    n = trace.cfg.n
    k = np.arange(steps)
    m = (k - k0).astype(float)
    mu_n_e, v_n_e, _ = _rolling_stats(trace.e, n)
    c_n = np.sqrt(v_n_e**2 + mu_n_e**2 + 1.0)
    mu_m_e, v_m_e = _anchored_stats(trace.e, k0)
    rhs = np.full(steps, math.nan)
    sel = (m >= n) & (v_n_e > 0.0)
    decay = abs(p) ** (k[sel] - n - k0)
    rhs[sel] = (
        c_n[sel]
        / (math.sqrt(n) * v_n_e[sel])
        * (
            constants.c1 * (abs(f_bar_a) + abs(f_bar_m) * mu_m_e[sel]) * decay
            + constants.c2 * np.sqrt(m[sel]) * abs(f_bar_m) * v_m_e[sel]
        )
    )
    return rhs


def constant_fault_dynamic_series(
    trace: EstimatorTrace,
    f_bar_a: float,
    f_bar_m: float,
    k0: int,
    constants: BoundConstants,
    p: float,
    c_n_ref: float | None = None,
) -> np.ndarray:
    """Constant-fault specialization of the dynamic bound, per step.

    In the constant-fault regime the window constant of the regressor is a
    property of the converged regressor, so it is frozen at the first valid
    step (k0 + n) by default; the remaining step dependence is the
    geometric factor and the regressor window deviation.  Pass `c_n_ref`
    to freeze it elsewhere.  Valid for k >= k0 + n; earlier entries NaN.
    """
    steps = len(trace)
    n = trace.cfg.n
    k = np.arange(steps)
    m = (k - k0).astype(float)
    mu_n_e, v_n_e, _ = _rolling_stats(trace.e, n)
    if c_n_ref is None:
        k_ref = min(max(k0 + n, n - 1), steps - 1)
        c_n_ref = float(np.sqrt(v_n_e[k_ref] ** 2 + mu_n_e[k_ref] ** 2 + 1.0))
    xp_k0 = float(trace.xp_norm[k0]) if k0 >= 0 else 0.0
    level = constants.c1 * abs(f_bar_a) + constants.c0 * abs(f_bar_m) * xp_k0
    rhs = np.full(steps, math.nan)
    sel = (m >= n) & (v_n_e > 0.0)
    rhs[sel] = c_n_ref / (math.sqrt(n) * v_n_e[sel]) * level * abs(p) ** m[sel]
    return rhs


def var_product_check(
    a_win: np.ndarray, b_win: np.ndarray
) -> tuple[float, float, float, float]:
    """Both sides of the two product-signal variance inequalities.

    Returns ``(lhs1, rhs1, lhs2, rhs2)`` where the first pair bounds the
    variance defect of a sum and the second the variance of an element-wise
    product.
    """
    a_win = np.asarray(a_win, dtype=float)
    b_win = np.asarray(b_win, dtype=float)
    if a_win.shape != b_win.shape or a_win.ndim != 1:
        raise ValueError("windows must be equal-length vectors")
    n = a_win.shape[0]
    last = n - 1

    def v(x):
        return window_std(x, last, n)

    def mu(x):
        return window_mean(x, last, n)

    lhs1 = abs(v(a_win + b_win) ** 2 - v(a_win) ** 2 - v(b_win) ** 2)
    rhs1 = 2.0 * min(
        np.linalg.norm(a_win) * v(b_win), np.linalg.norm(b_win) * v(a_win)
    )
    lhs2 = v(a_win * b_win)
    rhs2 = (
        math.sqrt(n) * v(a_win) * v(b_win)
        + abs(mu(a_win)) * v(b_win)
        + abs(mu(b_win)) * v(a_win)
    )
    return lhs1, rhs1, lhs2, rhs2
