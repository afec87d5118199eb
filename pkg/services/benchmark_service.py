"""
実行時間ベンチマーク

分散実行における1リンク1回の判断（特徴量抽出 + 順伝播）の所要時間を計測します。
判断は自リンクの局所観測だけを使うため、セル数 N に依存しないことも確認できます。
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.config import TrainConfig
from core.channel import init_channel
from models.network_models import NetworkScenario
from services.agents import PowerAgent
from services.agents.features import cold_start, extract_features
from services.baselines import BaselineKind
from services.trainer import episode_scenario
from utils.seeding import STREAM_AGENT, STREAM_CHANNEL, make_rng

DEFAULT_CELL_COUNTS = (25, 100)
MIN_REPEATS = 10_000
BENCH_EPISODE = 2_000_000


@dataclass(frozen=True)
class LatencyReport:
    method: str
    n_cells: int
    repeats: int
    mean_sec: float
    median_sec: float
    p95_sec: float

    def to_dict(self):
        return asdict(self)


def _decision_fn(
    source: Union[PowerAgent, str], scenario: NetworkScenario, config: TrainConfig
) -> Callable[[int, int], float]:
    channel = init_channel(
        scenario, config.doppler_hz, config.slot_sec, make_rng([config.seed, BENCH_EPISODE, STREAM_CHANNEL])
    )
    prev_alloc, prev_rates = cold_start(scenario, channel)
    if isinstance(source, PowerAgent):
        agent = source.frozen_copy()

        def decide(cell: int, user: int) -> float:
            obs = extract_features(
                scenario, channel, prev_alloc, prev_rates, cell, user, agent.i_c, agent.feature_kind
            )
            return agent.decide(obs.vector())

        return decide

    kind = BaselineKind.parse(source)
    p_max = scenario.radio.p_max_mw
    rng = make_rng([config.seed, BENCH_EPISODE, STREAM_AGENT])
    if kind is BaselineKind.MAX_POWER:
        return lambda cell, user: p_max
    return lambda cell, user: float(rng.uniform(0.0, p_max))


def measure_latency(
    source: Union[PowerAgent, str],
    config: TrainConfig,
    n_cells: int,
    repeats: int,
) -> LatencyReport:
    """
    n_cells のシナリオで repeats 回の単一判断時間を計測する

    判断するリンクは全リンクを順に巡回する。
    """
    scenario = episode_scenario(config.with_overrides(n_cells=n_cells), BENCH_EPISODE)
    decide = _decision_fn(source, scenario, config)
    links = [(c, u) for c in range(scenario.n_cells) for u in range(scenario.users_per_cell)]
    durations = np.empty(repeats)
    decide(*links[0])  # ウォームアップ
    for i in range(repeats):
        cell, user = links[i % len(links)]
        started = time.perf_counter()
        decide(cell, user)
        durations[i] = time.perf_counter() - started
    method = (
        f"{source.kind}-{source.feature_kind}"
        if isinstance(source, PowerAgent)
        else BaselineKind.parse(source).value
    )
    return LatencyReport(
        method=method,
        n_cells=n_cells,
        repeats=repeats,
        mean_sec=float(durations.mean()),
        median_sec=float(np.median(durations)),
        p95_sec=float(np.percentile(durations, 95)),
    )


def run_benchmark(
    source: Union[PowerAgent, str],
    config: TrainConfig,
    cell_counts: Sequence[int] = DEFAULT_CELL_COUNTS,
    repeats: Optional[int] = None,
    logger: Optional[logging.Logger] = None,
) -> List[LatencyReport]:
    """セル数ごとに単一判断の所要時間を計測する"""
    logger = logger or logging.getLogger(__name__)
    repeats = repeats or config.bench_repeats
    if repeats < MIN_REPEATS:
        logger.warning(f"計測回数 {repeats} は推奨値 {MIN_REPEATS} 未満です")
    reports = []
    for n_cells in cell_counts:
        report = measure_latency(source, config, n_cells, repeats)
        logger.info(
            f"{report.method} N={n_cells}: 平均 {report.mean_sec:.3e}秒, "
            f"中央値 {report.median_sec:.3e}秒 ({repeats}回)"
        )
        reports.append(report)
    return reports


def latency_ratio(reports: Sequence[LatencyReport]) -> float:
    """最大セル数と最小セル数の平均判断時間の比"""
    ordered = sorted(reports, key=lambda r: r.n_cells)
    return ordered[-1].mean_sec / ordered[0].mean_sec


def reports_frame(reports: Sequence[LatencyReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in reports])
