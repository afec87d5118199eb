"""
評価サービスのテスト
"""

import numpy as np
import pytest

from services.agents import create_agent
from services.evaluation_service import (
    EVAL_COLUMNS,
    BaselinePolicy,
    EvaluationService,
    evaluate_scenario,
    run_evaluation,
    summarize_repeats,
)
from utils.errors import ConfigError


def test_summarize_repeats():
    summary = summarize_repeats([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])
    assert summary.mean == pytest.approx(5.5)
    assert summary.variance == pytest.approx(8.25)
    assert summary.top_mean == pytest.approx(9.5)
    assert summary.count == 10
    assert summarize_repeats([2.0]).top_mean == 2.0
    with pytest.raises(ValueError):
        summarize_repeats([])


def test_baselines_table(small_config):
    frame = run_evaluation(["max_power", "random"], small_config)
    assert list(frame.columns) == EVAL_COLUMNS
    assert list(frame["method"]) == ["max_power", "random"]
    assert (frame["n_scenarios"] == small_config.eval_scenarios).all()
    assert (frame["mean_sum_rate_per_ap"] > 0.0).all()
    assert (frame["sweep"] == "none").all()


def test_scenarios_are_shared_across_methods(small_config):
    policy = BaselinePolicy("max_power")
    first = evaluate_scenario(policy, small_config, 0)
    assert evaluate_scenario(policy, small_config, 0) == first
    assert evaluate_scenario(policy, small_config, 1) != first


def test_thread_pool_matches_serial(small_config):
    agent = create_agent(small_config.to_agent_settings(), small_config.radio, 0)
    serial = run_evaluation([agent], small_config)
    parallel = run_evaluation([agent], small_config.with_overrides(eval_workers=2))
    np.testing.assert_allclose(
        serial["mean_sum_rate_per_ap"].to_numpy(), parallel["mean_sum_rate_per_ap"].to_numpy()
    )
    assert serial["method"].iloc[0] == "ddpg-f2"


def test_sweep_points(small_config):
    frame = run_evaluation(["max_power"], small_config, sweep="cell_range", values=[0.2, 0.5])
    assert list(frame["value"]) == [0.2, 0.5]
    assert (frame["sweep"] == "cell_range").all()
    users = run_evaluation(["max_power"], small_config, sweep="user_density", values=[1, 2])
    assert list(users["value"]) == [1, 2]


def test_invalid_sweeps(small_config):
    service = EvaluationService(small_config)
    with pytest.raises(ConfigError):
        service.run(["max_power"], sweep="bandwidth")
    with pytest.raises(ConfigError):
        service.run(["max_power"], sweep="levels")
    with pytest.raises(ConfigError) as info:
        service.run(["max_power"], sweep="cell_range", values=[0.001])
    assert info.value.key == "evaluation.sweep"


def test_levels_sweep_trains_per_level(small_config):
    config = small_config.with_overrides(agent="dql", eval_scenarios=1)
    frame = EvaluationService(config).run_levels_sweep(1, values=[3, 5], baselines=["max_power"])
    assert list(frame["value"]) == [3, 3, 5, 5]
    assert list(frame["method"]) == ["dql-f2", "max_power", "dql-f2", "max_power"]
    with pytest.raises(ConfigError):
        EvaluationService(small_config).run_levels_sweep(1)
