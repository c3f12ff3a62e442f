import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momnash.analysis import (
    AnalysisError,
    ChungInstance,
    chung_oracle,
    envelope_shape,
    fit_envelope,
    fit_loglog_slope,
    tail_bound_test,
)
from momnash.noise import NoiseModel, RngStream
from momnash.seekers import Trajectory

K = np.arange(1, 10001, dtype=float)


def test_slope_of_power_laws():
    assert fit_loglog_slope(K, 1.0 / K) == pytest.approx(-1.0, abs=1e-12)
    assert fit_loglog_slope(K, 3.0 * K**-0.5) == pytest.approx(-0.5, abs=1e-12)


def test_slope_of_log_over_k():
    # d ln(ln k / k) / d ln k = 1/ln k - 1, about -0.88 over the last decade of 1e4
    assert fit_loglog_slope(K, np.log(K) / K) == pytest.approx(-0.885, abs=0.01)


def test_slope_needs_points():
    with pytest.raises(AnalysisError):
        fit_loglog_slope(np.arange(1.0, 5.0), np.ones(4))


def test_envelope_shape_examples():
    k = np.array([2.0, 10.0, 1000.0])
    np.testing.assert_allclose(envelope_shape(k, 2.0, 1.0), np.maximum(1 / k, np.log(k) / k))
    # heavy tails soften the rate: exponent 2(delta - 1)/delta = 2/3 at delta = 1.5
    np.testing.assert_allclose(envelope_shape(k, 1.5, 1.0), np.maximum(1 / k, (np.log(k) / k) ** (2 / 3)))
    assert envelope_shape(1000.0, 1.5, 1.0) == pytest.approx((math.log(1000) / 1000) ** (2 / 3))
    np.testing.assert_allclose(envelope_shape(k, 2.0, 2.0, rho=0.1), np.maximum(1 / k, k**-0.2))


def test_envelope_monotone_decreasing():
    k = np.arange(3.0, 10**5)
    for delta, beta in [(2.0, 1.0), (1.5, 1.0), (1.5, 2.1), (2.0, 3.0)]:
        assert np.all(np.diff(envelope_shape(k, delta, beta)) < 0)


def test_fit_envelope_recovers_constant():
    env = fit_envelope(K, 7.0 * np.log(K) / K, delta=2.0, beta=1.0)
    assert env.fitted_A == pytest.approx(7.0)
    assert env.ratio_slope == pytest.approx(0.0, abs=1e-12)
    assert env.satisfied
    assert env(100.0) == pytest.approx(7.0 * math.log(100) / 100)


def test_fit_envelope_flags_slow_decay():
    env = fit_envelope(K, K**-0.5, delta=2.0, beta=1.0)
    assert env.ratio_slope > 0.1
    assert not env.satisfied


def test_fit_envelope_depends_only_on_pairs():
    k = np.arange(0, 500)
    err = 1.0 / np.sqrt(k + 1.0)
    a = Trajectory(k, k * 3, np.zeros((k.size, 1)), err, 1.0)
    b = Trajectory(k, k * k, np.ones((k.size, 1)), err, 2.0)
    fa = fit_envelope(a, delta=2.0, beta=1.0)
    fb = fit_envelope(b, delta=2.0, beta=1.0)
    assert fa == fb


@pytest.mark.parametrize("tau", [0.0, 1.0])
def test_chung_examples(tau):
    inst = ChungInstance(r=3.0, p=1.0, d=1.0, tau=tau)
    cert = chung_oracle(inst, 10**5)
    traj, A, k_start, holds = cert
    assert holds
    assert traj.size == 10**5 - 1
    assert np.all(traj >= 0)
    k = np.arange(2.0, 10**5 + 1)
    tail = k >= k_start
    assert np.all(traj[tail] <= A * np.log(k[tail]) ** tau / k[tail])
    assert A >= 2 * inst.d / (inst.r - inst.p) + 1


def test_chung_frozen_certificates():
    # Y_3 = (1 - 3/2) * 1 + 1/4 < 0 is clamped, so A = 2d/(r - p) + 1 = 2 from K = ceil(r) = 3
    for tau, tight in [(0.0, 0.49995014), (1.0, 0.47282291)]:
        cert = chung_oracle(ChungInstance(3.0, 1.0, 1.0, tau=tau), 10**4)
        assert (cert.A, cert.K, cert.holds) == (2.0, 3, True)
        assert cert.tightest_A == pytest.approx(tight, rel=1e-7)


def test_chung_without_forcing_decays():
    traj, A, _, holds = chung_oracle(ChungInstance(3.0, 1.0, 0.0), 10**4)
    assert holds
    assert traj[-1] < 1e-9


def test_chung_rejects_r_not_above_p():
    with pytest.raises(AnalysisError):
        ChungInstance(r=1.0, p=1.0, d=1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 6.0), st.floats(0.0, 1.0), st.floats(0.0, 10.0), st.floats(0.0, 2.0),
       st.floats(0.0, 10.0))
def test_chung_certificate_always_holds(r, frac, d, tau, y0):
    p = frac * r * 0.95
    cert = chung_oracle(ChungInstance(r, p, d, tau, k0=2, y0=y0), 3000)
    assert cert.holds
    assert cert.tightest_A <= cert.A


def test_tail_noise_free(game15):
    res = tail_bound_test(game15, np.zeros(15), NoiseModel.none(), 100, 0.01, 2000, RngStream(0))
    assert res.violation_rate == 0.0
    assert res.passed


def test_tail_gaussian_and_reproducible(game15, x_star15):
    args = (game15, x_star15, NoiseModel.gaussian(1.0), 100, 0.01, 2000)
    a = tail_bound_test(*args, RngStream(4))
    b = tail_bound_test(*args, RngStream(4))
    assert a.passed
    np.testing.assert_array_equal(a.per_player, b.per_player)
    assert a.bound == pytest.approx(0.02 + 3 * math.sqrt(0.02 * 0.98 / 2000))


def test_tail_threshold_uses_noise_gain(game15):
    noise = NoiseModel.gaussian(1.0)
    res = tail_bound_test(game15, np.zeros(15), noise, 100, 0.01, 1000, RngStream(0))
    expected = math.sqrt(12) * 2 * noise.nu * (16 * (0.125 + math.log(100)) / 100) ** 0.5
    assert res.threshold == pytest.approx(expected)


def test_tail_rejects_invalid_inputs(game15):
    with pytest.raises(AnalysisError):
        tail_bound_test(game15, np.zeros(15), NoiseModel.none(), 100, 0.01, 999, RngStream(0))
    with pytest.raises(AnalysisError):
        tail_bound_test(game15, np.zeros(15), NoiseModel.none(), 20, 0.01, 1000, RngStream(0))
