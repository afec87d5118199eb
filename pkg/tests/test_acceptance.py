"""
既定設定での学習結果・スイープ傾向・判断時間の受け入れテスト

いずれも長時間かかるため slow マーカー付き。実行は pytest -m slow
"""

import numpy as np
import pytest
from scipy.stats import spearmanr

from config.config import TrainConfig
from services.benchmark_service import latency_ratio, run_benchmark
from services.evaluation_service import run_evaluation, summarize_repeats
from services.trainer import run_training

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="module")
def trained_ddpg():
    config = TrainConfig(agent="ddpg", feature_kind="f2", log_every=500, eval_workers=4)
    agent, log = run_training(config)
    return config, agent, log


def test_default_ddpg_training_outcome(trained_ddpg):
    config, agent, log = trained_ddpg
    assert 1.5 <= log.final_mean(1000) <= 1.9
    frame = run_evaluation([agent, "max_power", "random"], config).set_index("method")
    ddpg = frame.loc["ddpg-f2", "mean_sum_rate_per_ap"]
    assert ddpg > frame.loc["max_power", "mean_sum_rate_per_ap"]
    assert ddpg >= 1.2 * frame.loc["random", "mean_sum_rate_per_ap"]


def test_sweep_trends(trained_ddpg):
    config, agent, _ = trained_ddpg
    config = config.with_overrides(eval_scenarios=100)
    cell_range = run_evaluation([agent], config, sweep="cell_range")
    rho, _ = spearmanr(cell_range["value"], cell_range["mean_sum_rate_per_ap"])
    assert rho >= 0.9
    density = run_evaluation([agent], config, sweep="user_density")
    rho, _ = spearmanr(density["value"], density["mean_sum_rate_per_ap"])
    assert rho <= -0.9


def test_latency_is_independent_of_cell_count(trained_ddpg):
    config, agent, _ = trained_ddpg
    reports = run_benchmark(agent, config, cell_counts=(25, 100), repeats=10_000)
    assert all(r.mean_sec <= 1e-3 for r in reports)
    assert abs(latency_ratio(reports) - 1.0) <= 0.2


def test_relative_ordering_over_seeds():
    finals = {}
    for kind in ("ddpg", "dql", "reinforce"):
        values = []
        for seed in SEEDS:
            _, log = run_training(TrainConfig(agent=kind, seed=seed, log_every=1000))
            values.append(log.final_mean(1000))
        finals[kind] = summarize_repeats(values)
    baseline = run_evaluation(["random"], TrainConfig(eval_scenarios=500))
    random_mean = float(baseline["mean_sum_rate_per_ap"].iloc[0])
    assert finals["ddpg"].top_mean >= finals["dql"].top_mean >= random_mean
    assert finals["ddpg"].variance < finals["reinforce"].variance
    assert np.isfinite(finals["reinforce"].mean)
