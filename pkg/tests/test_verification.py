"""
検証サービスのテスト
"""

import json
from dataclasses import replace

import numpy as np
import pytest

import services.verification_service as verification
from core.channel import init_channel
from services.verification_service import (
    check_ddpg_chain,
    check_exact_constants,
    check_gradients,
    check_jakes,
    check_reward_proportionality,
    check_theorem,
    jakes_scenario,
    run_verification,
    simulate_autocorrelation,
)


def test_gradient_check_passes(rng):
    result = check_gradients(rng)
    assert result.passed, result.measured


def test_gradient_check_detects_wrong_backward(rng):
    def broken(net, x, u):
        net.forward(x)
        return net.backward(u).scaled(0.5)

    result = check_gradients(rng, backward_fn=broken)
    assert not result.passed
    assert result.measured["max_relative_error"] > 0.1


def test_ddpg_chain_passes(rng):
    result = check_ddpg_chain(rng)
    assert result.passed, result.measured


def test_jakes_reference_value(rng):
    result = check_jakes(rng)
    assert result.passed, result.measured
    assert result.measured["rho"] == pytest.approx(0.6425, abs=1e-4)


def test_autocorrelation_of_white_noise(rng):
    scenario = jakes_scenario()
    channel = replace(init_channel(scenario, 10.0, 0.02, rng), rho=0.0)
    lag1, power = simulate_autocorrelation(scenario, channel, 50_000, rng)
    assert abs(lag1) < 0.02
    assert power == pytest.approx(1.0, abs=0.03)


def test_jakes_check_runs_channel_model(rng, monkeypatch):
    calls = []

    def frozen_step(state, step_rng, scenario):
        calls.append(state.slot)
        return replace(state, slot=state.slot + 1)

    monkeypatch.setattr(verification, "step_channel", frozen_step)
    result = check_jakes(rng, n_samples=5_000)
    assert calls
    # h が変化しないチャネルでは自己相関が 1 になり不合格
    assert not result.passed
    assert result.measured["rho_hat"] == pytest.approx(1.0)


def test_theorem_and_proportionality(rng):
    theorem = check_theorem(rng, count=20)
    assert theorem.passed
    assert theorem.measured["counterexample_optimum"] == pytest.approx(20.0 / 3.0)
    proportional = check_reward_proportionality(rng)
    assert proportional.passed
    assert proportional.measured["multiplicity"] == pytest.approx(76.0)


def test_constants():
    result = check_exact_constants()
    assert result.passed
    assert result.measured["f2_dim"] == 48
    assert result.measured["level_spacing_db"] == pytest.approx(4.125)


def test_full_report(tmp_path):
    report = run_verification(seed=1)
    assert report.passed, report.failed()
    assert len(report.checks) == 6
    assert all(c.elapsed_sec >= 0.0 for c in report.checks)
    saved = json.loads(report.save(tmp_path / "verification.json").read_text(encoding="utf-8"))
    assert saved["passed"] is True
    assert np.isfinite(saved["checks"][2]["measured"]["rho_hat"])
