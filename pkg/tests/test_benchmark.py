"""
判断時間ベンチマークのテスト
"""

import logging

from services.agents import create_agent
from services.benchmark_service import latency_ratio, reports_frame, run_benchmark


def test_benchmark_reports(small_config, caplog):
    agent = create_agent(small_config.to_agent_settings(), small_config.radio, 0)
    with caplog.at_level(logging.WARNING):
        reports = run_benchmark(agent, small_config, cell_counts=(25, 49), repeats=20)
    assert "推奨値" in caplog.text
    assert [r.n_cells for r in reports] == [25, 49]
    assert all(r.repeats == 20 and r.mean_sec > 0.0 for r in reports)
    assert all(r.method == "ddpg-f2" for r in reports)
    assert latency_ratio(reports) > 0.0
    frame = reports_frame(reports)
    assert list(frame.columns) == ["method", "n_cells", "repeats", "mean_sec", "median_sec", "p95_sec"]


def test_benchmark_baseline(small_config):
    reports = run_benchmark("max_power", small_config, cell_counts=(25,), repeats=5)
    assert reports[0].method == "max_power"
