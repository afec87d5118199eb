"""
SINR・レート・局所報酬のテスト
"""

import math

import numpy as np
import pytest

from core.channel import channel_from_gains
from core.metrics import (
    cap_sinr,
    compute_rates,
    compute_sinr,
    evaluate_allocation,
    local_reward,
    local_rewards,
    rate_sensitivity,
    reward_multiplicity,
)
from models.network_models import NetworkScenario, PowerAllocation, RadioConfig


def _unit_power(scenario):
    return PowerAllocation(np.ones((scenario.n_cells, scenario.users_per_cell)), scenario.radio.p_max_mw)


def test_single_link_without_interference():
    radio = RadioConfig(noise_dbm=10.0 * math.log10(0.5), sinr_cap_db=None)
    scenario = NetworkScenario(
        n_cells=1,
        users_per_cell=1,
        r_min_km=0.01,
        r_max_km=1.0,
        bs_positions=np.zeros((1, 2)),
        ap_positions=np.zeros((1, 1, 2)),
        neighborhoods=((),),
        beta=np.full((1, 1, 1), 0.5),
        radio=radio,
    )
    sinr = compute_sinr(scenario, channel_from_gains(scenario.beta), _unit_power(scenario))
    assert sinr[0, 0] == pytest.approx(1.0)


def test_two_cell_sinr_by_hand(toy_scenario, toy_channel):
    sinr = compute_sinr(toy_scenario, toy_channel, _unit_power(toy_scenario))
    assert sinr[0, 0] == pytest.approx(1.0 / 0.6)
    assert sinr[1, 0] == pytest.approx(1.0 / 0.35)


def test_rates_and_sum_rate(toy_scenario, toy_channel):
    report = evaluate_allocation(toy_scenario, toy_channel, _unit_power(toy_scenario))
    expected = [math.log2(1 + 1 / 0.6), math.log2(1 + 1 / 0.35)]
    np.testing.assert_allclose(report.rate[:, 0], expected)
    assert report.sum_rate == pytest.approx(sum(expected))
    assert report.sum_rate_per_ap == pytest.approx(sum(expected) / 2)


def test_zero_power_gives_zero_rate(toy_scenario, toy_channel):
    alloc = PowerAllocation(np.zeros((2, 1)), toy_scenario.radio.p_max_mw)
    report = evaluate_allocation(toy_scenario, toy_channel, alloc)
    assert report.sum_rate == 0.0


def test_sinr_cap_at_thirty_db():
    capped = cap_sinr(np.array([10.0, 5000.0]), 1000.0)
    np.testing.assert_allclose(capped, [10.0, 1000.0])
    report = compute_rates(np.array([[5000.0]]), 1000.0)
    assert report.rate[0, 0] == pytest.approx(math.log2(1001.0))


def test_negative_sinr_rejected():
    with pytest.raises(ValueError):
        compute_rates(np.array([[-1.0]]), None)


def test_intra_cell_interference(torus_scenario, torus_channel):
    p = np.zeros((25, 4))
    p[0, 0] = 100.0
    p[0, 1] = 50.0
    alloc = PowerAllocation(p, torus_scenario.radio.p_max_mw)
    sinr = compute_sinr(torus_scenario, torus_channel, alloc, apply_cap=False)
    g = torus_channel.g
    noise = torus_scenario.radio.noise_mw
    assert sinr[0, 0] == pytest.approx(g[0, 0, 0] * 100.0 / (g[0, 0, 0] * 50.0 + noise))
    # 近傍外のセルとは互いに干渉しない
    far = next(c for c in range(1, 25) if c not in torus_scenario.neighborhoods[0])
    p[far, 0] = 10.0
    sinr = compute_sinr(torus_scenario, torus_channel, PowerAllocation(p, alloc.p_max_mw), apply_cap=False)
    assert sinr[far, 0] == pytest.approx(g[far, 0, 0] * 10.0 / noise)


def test_local_reward_two_cells(toy_scenario, toy_channel):
    report = evaluate_allocation(toy_scenario, toy_channel, _unit_power(toy_scenario))
    c0, c1 = report.rate[:, 0]
    assert local_reward(toy_scenario, report, 0, 0, 1.0) == pytest.approx(c0 + c1)
    assert local_reward(toy_scenario, report, 0, 0, 0.0) == pytest.approx(c0)
    np.testing.assert_allclose(local_rewards(toy_scenario, report, 0.5)[:, 0], [c0 + 0.5 * c1, c1 + 0.5 * c0])


def test_negative_alpha_rejected(toy_scenario, toy_channel):
    report = evaluate_allocation(toy_scenario, toy_channel, _unit_power(toy_scenario))
    with pytest.raises(ValueError):
        local_rewards(toy_scenario, report, -0.1)


def test_vectorized_rewards_match_scalar(torus_scenario, torus_channel, rng):
    alloc = PowerAllocation(rng.uniform(0, torus_scenario.radio.p_max_mw, (25, 4)), torus_scenario.radio.p_max_mw)
    report = evaluate_allocation(torus_scenario, torus_channel, alloc)
    rewards = local_rewards(torus_scenario, report, 0.7)
    for cell, user in ((0, 0), (12, 3), (24, 1)):
        assert rewards[cell, user] == pytest.approx(local_reward(torus_scenario, report, cell, user, 0.7))


def test_reward_sum_proportional_to_sum_rate(torus_scenario, torus_channel, rng):
    alloc = PowerAllocation(rng.uniform(0, torus_scenario.radio.p_max_mw, (25, 4)), torus_scenario.radio.p_max_mw)
    report = evaluate_allocation(torus_scenario, torus_channel, alloc)
    weights = reward_multiplicity(torus_scenario, 1.0)
    c = 1 + 1.0 * 3 + 18 * 1.0 * 4
    np.testing.assert_allclose(weights, c)
    total = local_rewards(torus_scenario, report, 1.0).sum()
    assert total == pytest.approx(c * report.sum_rate, rel=1e-9)


def test_rate_sensitivity_by_hand(toy_scenario, toy_channel):
    alloc = _unit_power(toy_scenario)
    links, rates, derivative = rate_sensitivity(toy_scenario, toy_channel, alloc, 0, 0)
    np.testing.assert_array_equal(links, [[0, 0], [1, 0]])
    ln2 = math.log(2.0)
    assert derivative[0] == pytest.approx(1.0 / (1.6 * ln2))
    assert derivative[1] == pytest.approx(-0.25 / (0.35 * 1.35 * ln2))


def test_rate_sensitivity_matches_finite_difference(torus_scenario, torus_channel, rng):
    p_max = torus_scenario.radio.p_max_mw
    p = rng.uniform(0.2, 0.8, (25, 4)) * p_max
    cell, user = 6, 2
    links, _, derivative = rate_sensitivity(torus_scenario, torus_channel, PowerAllocation(p, p_max), cell, user)

    def rates_at(value):
        q = p.copy()
        q[cell, user] = value
        report = evaluate_allocation(torus_scenario, torus_channel, PowerAllocation(q, p_max))
        return report.rate[links[:, 0], links[:, 1]]

    h = 1e-3
    numeric = (rates_at(p[cell, user] + h) - rates_at(p[cell, user] - h)) / (2 * h)
    np.testing.assert_allclose(derivative, numeric, rtol=1e-4, atol=1e-10)
