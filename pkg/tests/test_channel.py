"""
チャネルモデルのテスト
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import special, stats

from core.channel import (
    bessel_j0,
    channel_trace_frame,
    complex_normal,
    correlation_coefficient,
    init_channel,
    j0_series,
    step_channel,
    write_channel_trace,
)
from utils.errors import ScenarioError


def test_correlation_matches_bessel():
    x = 2.0 * math.pi * 10.0 * 0.02
    assert correlation_coefficient(10.0, 0.02) == pytest.approx(special.j0(x), abs=1e-12)
    assert correlation_coefficient(10.0, 0.02) == pytest.approx(0.6425, abs=5e-4)


def test_series_oracle_agrees_with_scipy():
    for x in (0.0, 0.5, 1.25664, 3.0):
        assert j0_series(x) == pytest.approx(special.j0(x), abs=1e-12)
        assert bessel_j0(x) == pytest.approx(special.j0(x), abs=1e-12)


def test_zero_doppler_is_static():
    assert correlation_coefficient(0.0, 0.02) == pytest.approx(1.0)


def test_complex_normal_variance(rng):
    z = complex_normal(rng, 200_000, variance=2.0)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.0, rel=0.02)
    assert np.mean(z.real**2) == pytest.approx(1.0, rel=0.02)


def test_channel_gain_is_fading_times_beta(torus_scenario):
    state = init_channel(torus_scenario, 10.0, 0.02, 3)
    np.testing.assert_allclose(state.g, np.abs(state.h) ** 2 * torus_scenario.beta)
    assert state.slot == 1


def test_step_advances_slot_and_keeps_power(torus_scenario, rng):
    state = init_channel(torus_scenario, 10.0, 0.02, rng)
    powers = []
    for _ in range(200):
        state = step_channel(state, rng, torus_scenario)
        powers.append(np.mean(np.abs(state.h) ** 2))
    assert state.slot == 201
    assert np.mean(powers) == pytest.approx(1.0, rel=0.05)


def test_fading_is_rayleigh(torus_scenario):
    state = init_channel(torus_scenario, 10.0, 0.02, 21)
    # |h|^2 ~ Exp(1)
    result = stats.kstest(np.abs(state.h).ravel() ** 2, "expon")
    assert result.pvalue > 1e-3


def test_invalid_slot_duration(torus_scenario):
    with pytest.raises(ScenarioError):
        init_channel(torus_scenario, 10.0, 0.0, 1)


def test_trace_frame_columns(tmp_path, toy_scenario, toy_channel):
    frame = channel_trace_frame(toy_channel, toy_scenario)
    assert list(frame.columns) == ["slot", "tx_cell", "rx_cell", "user", "h_abs2", "g_db"]
    assert len(frame) == 4
    path = write_channel_trace([toy_channel, toy_channel], toy_scenario, tmp_path / "trace.csv")
    assert path.exists()


def _lag1_real(scenario, state, rng, n_samples):
    """全リンクを合わせた Re(h) のラグ1自己相関"""
    xs = [state.h.real.ravel()]
    for _ in range(math.ceil(n_samples / state.h.size)):
        state = step_channel(state, rng, scenario)
        xs.append(state.h.real.ravel())
    x = np.stack(xs)
    return np.mean(x[1:] * x[:-1]) / np.mean(x * x)


def test_rho_one_keeps_fading_unchanged(torus_scenario, rng):
    state = init_channel(torus_scenario, 0.0, 0.02, rng)
    assert state.rho == 1.0
    after = step_channel(state, rng, torus_scenario)
    np.testing.assert_array_equal(after.h, state.h)
    np.testing.assert_array_equal(after.g, state.g)


def test_rho_zero_draws_independent_fading(torus_scenario, rng):
    state = replace(init_channel(torus_scenario, 10.0, 0.02, rng), rho=0.0)
    assert abs(_lag1_real(torus_scenario, state, rng, 100_000)) <= 0.02


def test_step_channel_lag1_autocorrelation(torus_scenario, rng):
    state = init_channel(torus_scenario, 10.0, 0.02, rng)
    assert _lag1_real(torus_scenario, state, rng, 100_000) == pytest.approx(0.6425, abs=0.01)
