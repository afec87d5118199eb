"""
評価サービス

学習済みエージェントとベースラインを、各リンクが自身の観測だけで行動を決める
分散実行で評価します。スイープ点ごとに乱数シナリオを複数生成し、
AP あたり平均合計レートの平均と分散を表にまとめます。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.config import TrainConfig
from core.channel import init_channel, step_channel
from core.metrics import evaluate_allocation
from models.network_models import ChannelState, NetworkScenario, PowerAllocation, RateReport
from models.run_models import CSV_SCHEMA_VERSION
from services.agents import PowerAgent
from services.agents.features import cold_start, observation_matrix
from services.baselines import BaselineKind, allocate
from services.trainer import episode_scenario, run_training
from utils.errors import ConfigError
from utils.seeding import STREAM_AGENT, STREAM_CHANNEL, make_rng

# 評価用シナリオのエピソード番号（学習エピソードと重ならない範囲）
EVAL_EPISODE_OFFSET = 1_000_000
TOP_FRACTION = 0.2

SWEEPS = {
    "cell_range": ("r_max_km", (0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0, 1.2, 1.5)),
    "user_density": ("users_per_cell", (1, 2, 3, 4, 5, 6, 7, 8)),
    "doppler": ("doppler_hz", (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0)),
    "levels": ("n_levels", (3, 6, 10, 14, 20, 40)),
}

EVAL_COLUMNS = [
    "schema_version",
    "sweep",
    "value",
    "method",
    "mean_sum_rate_per_ap",
    "variance",
    "n_scenarios",
]


class ExecutionPolicy:
    """スロットごとに全リンクの送信電力を決める方式"""

    name = ""

    def allocate(
        self,
        scenario: NetworkScenario,
        channel: ChannelState,
        prev_alloc: PowerAllocation,
        prev_rates: RateReport,
        rng: np.random.Generator,
    ) -> PowerAllocation:
        raise NotImplementedError


class AgentPolicy(ExecutionPolicy):
    """学習済みエージェントの分散実行（探索なし）"""

    def __init__(self, agent: PowerAgent):
        self.agent = agent.frozen_copy()
        self.name = f"{agent.kind}-{agent.feature_kind}"

    def allocate(self, scenario, channel, prev_alloc, prev_rates, rng):
        states, _ = observation_matrix(
            scenario, channel, prev_alloc, prev_rates, self.agent.i_c, self.agent.feature_kind
        )
        powers, _ = self.agent.act(states, rng, explore=False)
        shape = (scenario.n_cells, scenario.users_per_cell)
        return PowerAllocation(np.reshape(powers, shape), scenario.radio.p_max_mw)


class BaselinePolicy(ExecutionPolicy):
    def __init__(self, kind: Union[str, BaselineKind]):
        self.kind = BaselineKind.parse(kind)
        self.name = self.kind.value

    def allocate(self, scenario, channel, prev_alloc, prev_rates, rng):
        return allocate(self.kind, scenario, rng)


def as_policy(source: Union[PowerAgent, ExecutionPolicy, str]) -> ExecutionPolicy:
    if isinstance(source, ExecutionPolicy):
        return source
    if isinstance(source, PowerAgent):
        return AgentPolicy(source)
    return BaselinePolicy(source)


def evaluate_scenario(policy: ExecutionPolicy, config: TrainConfig, index: int) -> float:
    """
    index 番目の評価シナリオで T スロット実行し、AP あたり平均合計レートを返す

    シナリオとチャネルは index から決まるため、方式間で同じシナリオを比較できる。
    """
    episode = EVAL_EPISODE_OFFSET + index
    scenario = episode_scenario(config, episode)
    channel_rng = make_rng([config.seed, episode, STREAM_CHANNEL])
    policy_rng = make_rng([config.seed, episode, STREAM_AGENT])
    channel = init_channel(scenario, config.doppler_hz, config.slot_sec, channel_rng)
    prev_alloc, prev_rates = cold_start(scenario, channel)
    total = 0.0
    for slot in range(1, config.slots_per_episode + 1):
        if slot > 1:
            channel = step_channel(channel, channel_rng, scenario)
        alloc = policy.allocate(scenario, channel, prev_alloc, prev_rates, policy_rng)
        report = evaluate_allocation(scenario, channel, alloc)
        total += report.sum_rate_per_ap
        prev_alloc, prev_rates = alloc, report
    return total / config.slots_per_episode


@dataclass(frozen=True)
class RepeatSummary:
    """繰り返し実験の統計（分散 σ²_c、平均 C̄、上位20%平均 C̄*）"""

    variance: float
    mean: float
    top_mean: float
    count: int


def summarize_repeats(values: Iterable[float], top_fraction: float = TOP_FRACTION) -> RepeatSummary:
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("集計する値がありません")
    n_top = max(1, int(math.ceil(top_fraction * values.size)))
    top = np.sort(values)[::-1][:n_top]
    return RepeatSummary(
        variance=float(values.var()),
        mean=float(values.mean()),
        top_mean=float(top.mean()),
        count=int(values.size),
    )


class EvaluationService:
    """
    評価を実行するクラス

    シナリオ単位でスレッドプールに分配する。エージェントは推論専用の複製を共有する。
    """

    def __init__(self, config: TrainConfig, logger: Optional[logging.Logger] = None):
        self.config = config
        self.logger = logger or logging.getLogger(__name__)

    def evaluate_point(self, policy: ExecutionPolicy, config: TrainConfig) -> List[float]:
        indices = range(config.eval_scenarios)
        if config.eval_workers <= 1:
            return [evaluate_scenario(policy, config, i) for i in indices]
        with ThreadPoolExecutor(max_workers=config.eval_workers) as executor:
            return list(executor.map(lambda i: evaluate_scenario(policy, config, i), indices))

    def run(
        self,
        sources: Sequence[Union[PowerAgent, ExecutionPolicy, str]],
        sweep: Optional[str] = None,
        values: Optional[Sequence[float]] = None,
    ) -> pd.DataFrame:
        """
        方式ごと・スイープ点ごとに評価して表を返す

        Args:
            sources: エージェント、ExecutionPolicy、またはベースライン名
            sweep: cell_range / user_density / doppler（None ならスイープなし）
            values: スイープ値（省略時は既定の値集合）

        Returns:
            pd.DataFrame: 列 EVAL_COLUMNS、1行 = (スイープ点, 方式)
        """
        policies = [as_policy(s) for s in sources]
        points = self._points(sweep, values)
        rows = []
        for value, config in points:
            for policy in policies:
                results = self.evaluate_point(policy, config)
                summary = summarize_repeats(results)
                self.logger.info(
                    f"評価 {sweep or '-'}={value}, {policy.name}: "
                    f"平均={summary.mean:.4f}, 分散={summary.variance:.3e} ({summary.count}シナリオ)"
                )
                rows.append(
                    {
                        "schema_version": CSV_SCHEMA_VERSION,
                        "sweep": sweep or "none",
                        "value": value,
                        "method": policy.name,
                        "mean_sum_rate_per_ap": summary.mean,
                        "variance": summary.variance,
                        "n_scenarios": summary.count,
                    }
                )
        return pd.DataFrame(rows, columns=EVAL_COLUMNS)

    def _points(self, sweep: Optional[str], values: Optional[Sequence[float]]):
        if sweep is None:
            return [(float("nan"), self.config)]
        if sweep == "levels":
            raise ConfigError("evaluation.sweep", "levels スイープは run_levels_sweep を使用してください")
        if sweep not in SWEEPS:
            raise ConfigError("evaluation.sweep", f"不明なスイープです: {sweep}")
        field_name, defaults = SWEEPS[sweep]
        points = []
        for value in values if values is not None else defaults:
            value = int(value) if field_name == "users_per_cell" else float(value)
            try:
                points.append((value, self.config.with_overrides(**{field_name: value})))
            except ConfigError as e:
                raise ConfigError("evaluation.sweep", f"スイープ値 {value} は扱えません: {e}") from e
        return points

    def run_levels_sweep(
        self,
        train_episodes: int,
        values: Optional[Sequence[int]] = None,
        baselines: Sequence[str] = (),
    ) -> pd.DataFrame:
        """
        離散行動の段階数 |A| ごとにエージェントを学習して評価する

        |A| はネットワーク出力次元のため、段階数ごとに新しく学習する。
        """
        if self.config.agent not in ("reinforce", "dql"):
            raise ConfigError("agent.kind", "levels スイープは離散行動のエージェントのみ対象です")
        frames = []
        for level in values if values is not None else SWEEPS["levels"][1]:
            config = self.config.with_overrides(n_levels=int(level), n_episodes=train_episodes)
            self.logger.info(f"|A|={level} のエージェントを {train_episodes} エピソード学習します")
            agent, _ = run_training(config, self.logger)
            frame = EvaluationService(config, self.logger).run([agent, *baselines])
            frame["sweep"] = "levels"
            frame["value"] = int(level)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)


def run_evaluation(
    sources: Sequence[Union[PowerAgent, ExecutionPolicy, str]],
    config: TrainConfig,
    sweep: Optional[str] = None,
    values: Optional[Sequence[float]] = None,
    logger: Optional[logging.Logger] = None,
) -> pd.DataFrame:
    """評価表を作る（EvaluationService.run の簡易呼び出し）"""
    return EvaluationService(config, logger).run(sources, sweep, values)
