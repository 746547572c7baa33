"""Discrete-time signal buffers, windowed moments, and test-signal generators.

Signals are finite buffers indexed from k = 0 with an implicit zero
pre-history: every query at k < 0 returns zero.  The windowed operators
(mean, centered deviation, norms) act on the trailing window
``[x(k), x(k-1), ..., x(k-n+1)]`` and are computed by direct summation,
which keeps them drift-free at desk-scale horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Signal",
    "WindowStats",
    "window",
    "window_mean",
    "window_std",
    "window_norms",
    "window_stats",
    "gen_sine",
    "gen_piecewise",
]


class Signal:
    """Finite discrete-time signal of real vectors with zero pre-history.

    Parameters
    ----------
    samples : array_like
        Shape ``(length,)`` for scalar signals or ``(length, dim)``.
    """

    def __init__(self, samples):
        arr = np.array(samples, dtype=float)  # own copy: buffers are immutable
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError("samples must be a 1-D or 2-D array")
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        """Underlying ``(length, dim)`` array."""
        return self._values

    @property
    def dim(self) -> int:
        return self._values.shape[1]

    def __len__(self) -> int:
        return self._values.shape[0]

    def at(self, k: int) -> np.ndarray:
        """Sample at index k; the zero vector for k < 0."""
        if k < 0:
            return np.zeros(self.dim)
        if k >= len(self):
            raise IndexError(f"index {k} beyond recorded horizon {len(self)}")
        return self._values[k]

    def scalar(self) -> np.ndarray:
        """The 1-D sample array; valid only for dim == 1 signals."""
        if self.dim != 1:
            raise ValueError(f"expected a scalar signal, got dim={self.dim}")
        return self._values[:, 0]


@dataclass(frozen=True)
class WindowStats:
    """First/second moments and norms of one trailing window."""

    mean: float
    std: float
    two_norm: float
    inf_norm: float
    length: int


def _as_scalar_array(x) -> np.ndarray:
    if isinstance(x, Signal):
        return x.scalar()
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError("windowed operators act on scalar signals")
    return arr


def window(x, k: int, n: int) -> np.ndarray:
    """Trailing window [x(k-n+1), ..., x(k)] with zero-padding below index 0."""
    arr = _as_scalar_array(x)
    if k >= arr.shape[0]:
        raise IndexError(f"index {k} beyond recorded horizon {arr.shape[0]}")
    if n == 0:
        return np.zeros(0)
    lo = k - n + 1
    if lo >= 0:
        return arr[lo : k + 1]
    w = np.zeros(n)
    if k >= 0:
        w[-(k + 1) :] = arr[: k + 1]
    return w


def window_mean(x, k: int, n: int) -> float:
    """Mean of the trailing n samples at index k; 0 for the empty window."""
    if n == 0:
        return 0.0
    return float(window(x, k, n).sum() / n)


def window_std(x, k: int, n: int) -> float:
    """Centered root-mean-square deviation over the trailing n samples.

    Computed in centered (two-pass) form, which is algebraically the
    root of ``(1/n) sum x^2 - mean^2`` but does not lose the near-zero
    deviations of almost-constant windows to cancellation.
    """
    if n == 0:
        return 0.0
    w = window(x, k, n)
    mean = w.sum() / n
    centered = w - mean
    var = centered @ centered / n
    return math.sqrt(var) if var > 0.0 else 0.0


def window_norms(x, k: int, n: int) -> tuple[float, float]:
    """(Euclidean, max-absolute) norms of the trailing n samples."""
    w = window(x, k, n)
    if n == 0:
        return 0.0, 0.0
    return float(np.linalg.norm(w)), float(np.max(np.abs(w)))


def window_stats(x, k: int, n: int) -> WindowStats:
    """All windowed statistics of the trailing n samples in one pass."""
    two_norm, inf_norm = window_norms(x, k, n)
    return WindowStats(
        mean=window_mean(x, k, n),
        std=window_std(x, k, n),
        two_norm=two_norm,
        inf_norm=inf_norm,
        length=n,
    )


def gen_sine(amplitude: float, freq_hz: float, sample_time: float, length: int) -> Signal:
    """Sampled sinusoid ``amplitude * sin(2 pi f k h)`` of the given length."""
    if sample_time <= 0:
        raise ValueError("sample_time must be positive")
    k = np.arange(length)
    return Signal(amplitude * np.sin(2.0 * math.pi * freq_hz * k * sample_time))


def gen_piecewise(
    breakpoints: Sequence[tuple[int, str, float]], length: int
) -> Signal:
    """Piecewise constant/linear signal from (start, mode, value-or-slope) segments.

    Each segment runs from its start index to the next segment's start (or the
    end of the signal).  Mode ``"const"`` holds the given value; mode ``"ramp"``
    advances by the given per-step slope, continuing from the value the signal
    held just before the segment started.  An empty list yields the zero signal.
    """
    out = np.zeros(length)
    if not breakpoints:
        return Signal(out)
    starts = [bp[0] for bp in breakpoints]
    if any(b - a <= 0 for a, b in zip(starts, starts[1:])):
        raise ValueError("breakpoints must have strictly increasing start indices")
    if starts[0] < 0:
        raise ValueError("breakpoint start indices must be nonnegative")

    bounds = starts[1:] + [length]
    carry = 0.0
    for (start, mode, value), stop in zip(breakpoints, bounds):
        stop = min(stop, length)
        if start >= length:
            break
        if mode == "const":
            out[start:stop] = value
            carry = value
        elif mode == "ramp":
            k = np.arange(start, stop)
            out[start:stop] = carry + value * (k - start)
            # carry continues past the segment end so the next segment can
            # attach continuously
            carry = carry + value * (min(stop, length) - start)
        else:
            raise ValueError(f"unknown segment mode {mode!r}")
    return Signal(out)
