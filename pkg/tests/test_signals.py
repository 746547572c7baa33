import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faultiso import (
    Signal,
    gen_piecewise,
    gen_sine,
    window_mean,
    window_norms,
    window_stats,
    window_std,
)

DEG = math.pi / 180.0


def test_signal_zero_prehistory():
    s = Signal([1.0, 2.0, 3.0])
    assert s.at(-1) == pytest.approx(0.0)
    assert s.at(-100) == pytest.approx(0.0)
    assert s.at(2) == pytest.approx(3.0)
    with pytest.raises(IndexError):
        s.at(3)


def test_window_mean_constant():
    s = Signal(np.full(20, 4.25))
    for k, n in [(0, 1), (5, 3), (19, 20)]:
        assert window_mean(s, k, n) == pytest.approx(4.25)


def test_window_mean_last_two():
    s = Signal([1.0, 2.0, 3.0, 4.0])
    assert window_mean(s, 3, 2) == pytest.approx(3.5)


def test_window_mean_ramp_direct_sum():
    ramp = np.arange(10.0)
    expected = sum(ramp[9 - i] for i in range(10)) / 10
    assert expected == pytest.approx(4.5)
    assert window_mean(ramp, 9, 10) == pytest.approx(expected)


def test_window_mean_empty_window_convention():
    assert window_mean([1.0, 2.0], 1, 0) == 0.0
    assert window_std([1.0, 2.0], 1, 0) == 0.0


def test_window_mean_zero_padding():
    s = Signal([6.0, 6.0])
    # window of 4 at k=1 sees [0, 0, 6, 6]
    assert window_mean(s, 1, 4) == pytest.approx(3.0)


def test_window_std_constant_is_zero():
    assert window_std(np.full(8, -2.5), 7, 8) == 0.0


def test_window_std_alternating():
    assert window_std([1.0, -1.0, 1.0, -1.0], 3, 4) == pytest.approx(1.0)


def test_window_std_sine_matches_direct_summation():
    h = 0.01
    x = gen_sine(1.0, 0.3, h, 1000).scalar()
    k, n = 999, 10
    samples = [x[k - i] for i in range(n)]
    mean = sum(samples) / n
    var = sum(v * v for v in samples) / n - mean**2
    assert window_std(x, k, n) == pytest.approx(math.sqrt(var), abs=1e-12)


def test_window_norms_three_four_five():
    two, inf = window_norms([3.0, 4.0], 1, 2)
    assert two == pytest.approx(5.0)
    assert inf == pytest.approx(4.0)


def test_window_norms_zero_signal():
    assert window_norms(np.zeros(5), 4, 3) == (0.0, 0.0)


def test_window_norms_random_matches_direct():
    rng = np.random.default_rng(7)
    x = rng.normal(size=40)
    w = np.array([x[20 - i] for i in range(10)])
    two, inf = window_norms(x, 20, 10)
    assert two == pytest.approx(np.sqrt(np.sum(w * w)))
    assert inf == pytest.approx(np.max(np.abs(w)))


def test_gen_sine_case_study_input():
    u = gen_sine(2.3e-3, 0.3, 0.01, 400).scalar()
    k = np.arange(400)
    assert u == pytest.approx(2.3e-3 * np.sin(2 * math.pi * 0.3 * 0.01 * k))


def test_gen_sine_zero_amplitude():
    assert np.all(gen_sine(0.0, 5.0, 0.1, 50).scalar() == 0.0)


def test_gen_sine_full_period_sample_count():
    # first k whose phase reaches 2*pi
    h, f = 0.01, 0.3
    k = 0
    while 2 * math.pi * f * h * k < 2 * math.pi:
        k += 1
    assert k == math.ceil(1.0 / (f * h)) == 334


def test_gen_sine_rejects_bad_sample_time():
    with pytest.raises(ValueError):
        gen_sine(1.0, 1.0, 0.0, 10)


def test_gen_piecewise_multiplicative_profile():
    f_m = gen_piecewise([(0, "ramp", -0.05 / 100), (400, "const", -0.2)], 600).scalar()
    assert f_m[0] == pytest.approx(0.0)
    assert f_m[399] == pytest.approx(-0.05 / 100 * 399)
    assert f_m[400] == pytest.approx(-0.2)
    # continuous: the ramp extrapolates exactly onto the plateau
    assert f_m[400] - f_m[399] == pytest.approx(-0.05 / 100, abs=1e-15)
    assert f_m[599] == pytest.approx(-0.2)


def test_gen_piecewise_additive_profile_continuity():
    f_a = gen_piecewise(
        [(0, "const", 0.0), (850, "ramp", 2.5e-4 * DEG), (1250, "const", 0.1 * DEG)],
        1500,
    ).scalar()
    assert np.all(f_a[:850] == 0.0)
    assert f_a[850] == pytest.approx(0.0)
    assert f_a[1249] == pytest.approx(2.5e-4 * DEG * 399)
    # plateau value equals the ramp's natural continuation
    assert f_a[1250] == pytest.approx(0.1 * DEG)
    assert f_a[1250] - f_a[1249] == pytest.approx(2.5e-4 * DEG, abs=1e-15)


def test_gen_piecewise_empty_is_zero():
    assert np.all(gen_piecewise([], 100).scalar() == 0.0)


def test_gen_piecewise_rejects_overlap():
    with pytest.raises(ValueError):
        gen_piecewise([(10, "const", 1.0), (10, "const", 2.0)], 50)
    with pytest.raises(ValueError):
        gen_piecewise([(10, "const", 1.0), (5, "const", 2.0)], 50)


@given(
    data=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40),
    n=st.integers(1, 45),
)
@settings(max_examples=200, deadline=None)
def test_moment_norm_identity(data, n):
    x = np.asarray(data)
    k = len(x) - 1
    mean = window_mean(x, k, n)
    std = window_std(x, k, n)
    two, _ = window_norms(x, k, n)
    lhs = std**2 + mean**2
    rhs = two**2 / n
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@given(
    data=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=30),
    c=st.floats(-1e3, 1e3),
)
@settings(max_examples=200, deadline=None)
def test_constant_shift(data, c):
    x = np.asarray(data)
    k, n = len(x) - 1, len(x)
    assert window_mean(x + c, k, n) == pytest.approx(window_mean(x, k, n) + c, rel=1e-10, abs=1e-9)
    assert window_std(x + c, k, n) == pytest.approx(window_std(x, k, n), rel=1e-10, abs=1e-6)


def test_window_reorder_invariance():
    rng = np.random.default_rng(3)
    x = rng.normal(size=12)
    shuffled = x.copy()
    rng.shuffle(shuffled)
    k, n = 11, 12
    assert window_mean(shuffled, k, n) == pytest.approx(window_mean(x, k, n))
    assert window_std(shuffled, k, n) == pytest.approx(window_std(x, k, n))
    assert window_norms(shuffled, k, n)[0] == pytest.approx(window_norms(x, k, n)[0])
    assert window_norms(shuffled, k, n)[1] == pytest.approx(window_norms(x, k, n)[1])


def test_window_stats_invariants():
    rng = np.random.default_rng(11)
    x = rng.normal(size=30)
    s = window_stats(x, 29, 10)
    assert s.std**2 == pytest.approx(
        np.mean(x[20:30] ** 2) - np.mean(x[20:30]) ** 2, abs=1e-12
    )
    assert s.two_norm**2 >= s.length * s.mean**2 - 1e-12
