"""
学習サービス（集中学習・分散実行）

エピソードごとに大規模フェージングを引き直し、小規模フェージングを初期化して
T スロットを実行します。全リンクの遷移は1組の共有パラメータに集約して更新します。
環境追従（オンライン再学習）ループもここで提供します。
"""

import logging
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from config.config import TrainConfig
from core.channel import init_channel, step_channel
from core.metrics import evaluate_allocation, local_rewards
from core.topology import build_scenario, reshadow
from models.agent_models import TransitionBatch, UpdateResult
from models.network_models import ChannelState, NetworkScenario, PowerAllocation
from models.run_models import EpisodeLog
from services.agents import PowerAgent, ReplayBuffer, create_agent
from services.agents.ddpg import critic_state_matrix
from services.agents.features import cold_start, observation_matrix
from services.tracking import (
    RewardSource,
    TrackingController,
    TrackingDecision,
    TrackingReport,
    tracking_step,
)
from utils.errors import ConfigError, TrackingError
from utils.seeding import STREAM_AGENT, STREAM_CHANNEL, STREAM_SCENARIO, child_seed, make_rng

CheckpointCallback = Callable[[PowerAgent, int], None]


def episode_scenario(
    config: TrainConfig, episode: int, base: Optional[NetworkScenario] = None
) -> NetworkScenario:
    """
    エピソード用のシナリオを作る

    redraw_placement が False で base があれば AP 位置を保ちシャドウイングだけ引き直す。
    """
    seed = child_seed(config.seed, episode, STREAM_SCENARIO)
    if base is not None and not config.redraw_placement:
        return reshadow(base, config.shadow_sigma_db, seed)
    return build_scenario(
        config.n_cells,
        config.users_per_cell,
        config.r_min_km,
        config.r_max_km,
        config.shadow_sigma_db,
        seed,
        placement=config.placement,
        radio=config.radio,
    )


def slot_batch(
    agent: PowerAgent,
    config: TrainConfig,
    scenario: NetworkScenario,
    channel: ChannelState,
    prev_alloc: PowerAllocation,
    prev_rates,
    rng: Optional[np.random.Generator],
    explore: bool,
):
    """
    1スロット分の分散実行を行い、遷移の束と結果を返す

    Returns:
        (TransitionBatch, PowerAllocation, RateReport, 報酬 (N, K), 1判断あたりの時間 [s])
    """
    started = time.perf_counter()
    states, _ = observation_matrix(
        scenario, channel, prev_alloc, prev_rates, agent.i_c, agent.feature_kind
    )
    powers, actions = agent.act(states, rng, explore=explore)
    decision_time = (time.perf_counter() - started) / scenario.n_links

    shape = (scenario.n_cells, scenario.users_per_cell)
    alloc = PowerAllocation(np.reshape(powers, shape), scenario.radio.p_max_mw)
    report = evaluate_allocation(scenario, channel, alloc)
    rewards = local_rewards(scenario, report, config.alpha)

    critic_inputs = jacobians = actor_inputs = actor_jacobians = None
    if agent.uses_critic:
        critic_inputs, jacobians = critic_state_matrix(scenario, channel, alloc, agent.i_c)
        if explore:
            # アクターは雑音なしの A(s) で評価する
            greedy, _ = agent.act(states)
            greedy_alloc = PowerAllocation(np.reshape(greedy, shape), scenario.radio.p_max_mw)
            actor_inputs, actor_jacobians = critic_state_matrix(
                scenario, channel, greedy_alloc, agent.i_c
            )
    batch = TransitionBatch(
        states=states,
        actions=np.asarray(actions),
        rewards=rewards.reshape(-1),
        critic_states=critic_inputs,
        jacobians=jacobians,
        actor_critic_states=actor_inputs,
        actor_jacobians=actor_jacobians,
    )
    return batch, alloc, report, rewards, decision_time


def _mean_or_none(values: List[Optional[float]]) -> Optional[float]:
    values = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(values)) if values else None


class Trainer:
    """
    共有パラメータのエージェントを学習するクラス

    update_mode="slot" ではスロット内の N·K 遷移の勾配和で1回更新し、
    "sequential" では遷移を1つずつ更新する。経験再生有効時はバッファから
    batch_size 個を抽出して更新する。
    """

    def __init__(
        self,
        config: TrainConfig,
        agent: Optional[PowerAgent] = None,
        logger: Optional[logging.Logger] = None,
        keep_arrays: bool = False,
        checkpoint_callback: Optional[CheckpointCallback] = None,
    ):
        if config.is_baseline and agent is None:
            raise ConfigError("agent.kind", f"ベースライン {config.agent} は学習できません")
        self.config = config
        self.logger = logger or logging.getLogger(__name__)
        self.agent = agent or create_agent(
            config.to_agent_settings(), config.radio, config.seed, self.logger
        )
        if config.replay and not self.agent.supports_replay:
            raise ConfigError("training.replay", f"{self.agent.kind} は経験再生に対応していません")
        self.replay = ReplayBuffer(config.replay_capacity, self.logger) if config.replay else None
        self.keep_arrays = keep_arrays
        self.checkpoint_callback = checkpoint_callback

    def run(self) -> Tuple[PowerAgent, EpisodeLog]:
        """全エピソードを実行して (エージェント, ログ) を返す"""
        cfg = self.config
        log = EpisodeLog(cfg.n_cells, cfg.users_per_cell, keep_arrays=self.keep_arrays)
        self.logger.info(
            f"学習を開始します: agent={self.agent.kind}, feature={self.agent.feature_kind}, "
            f"N_e={cfg.n_episodes}, T={cfg.slots_per_episode}, N={cfg.n_cells}, K={cfg.users_per_cell}"
        )
        started = time.perf_counter()
        scenario = None
        for episode in range(1, cfg.n_episodes + 1):
            scenario = episode_scenario(cfg, episode, scenario)
            self.run_episode(episode, scenario, log)

            if episode % cfg.log_every == 0 or episode == cfg.n_episodes:
                self._log_progress(episode, log)
            if (
                self.checkpoint_callback is not None
                and cfg.checkpoint_every > 0
                and episode % cfg.checkpoint_every == 0
            ):
                self.checkpoint_callback(self.agent, episode)

        elapsed = time.perf_counter() - started
        self.logger.info(
            f"学習が完了しました: {elapsed:.1f}秒, 遷移数={log.n_transitions}, "
            f"中止した更新={log.aborted_updates}, 中止したエピソード={len(log.aborted_episodes)}"
        )
        return self.agent, log

    def run_episode(self, episode: int, scenario: NetworkScenario, log: EpisodeLog) -> bool:
        """
        1エピソードを実行する

        Returns:
            bool: 更新が非有限値で中止され、エピソードを打ち切った場合 False
        """
        cfg = self.config
        channel_rng = make_rng([cfg.seed, episode, STREAM_CHANNEL])
        agent_rng = make_rng([cfg.seed, episode, STREAM_AGENT])
        self.agent.start_episode(episode)

        channel = init_channel(scenario, cfg.doppler_hz, cfg.slot_sec, channel_rng)
        prev_alloc, prev_rates = cold_start(scenario, channel)
        for slot in range(1, cfg.slots_per_episode + 1):
            if slot > 1:
                channel = step_channel(channel, channel_rng, scenario)
            batch, alloc, report, rewards, decision_time = slot_batch(
                self.agent, cfg, scenario, channel, prev_alloc, prev_rates, agent_rng, True
            )
            results = self._apply(batch, agent_rng)
            aborted = sum(1 for r in results if r.aborted)
            log.record_slot(
                episode,
                slot,
                alloc.p,
                report.rate,
                rewards,
                loss=_mean_or_none([r.loss for r in results if not r.skipped]),
                critic_loss=_mean_or_none([r.critic_loss for r in results]),
                n_transitions=len(batch),
                aborted_updates=aborted,
                decision_time_sec=decision_time,
            )
            if aborted:
                self.logger.warning(
                    f"エピソード {episode} スロット {slot}: 非有限の勾配のため更新を中止しました。"
                    "このエピソードを打ち切ります"
                )
                log.mark_aborted(episode)
                return False
            prev_alloc, prev_rates = alloc, report
        return True

    def _apply(self, batch: TransitionBatch, rng: np.random.Generator) -> List[UpdateResult]:
        cfg = self.config
        if self.replay is not None:
            self.replay.extend(batch.to_transitions())
            if len(self.replay) < cfg.batch_size:
                return []
            sample = self.replay.sample(cfg.batch_size, rng)
            return [self.agent.update(TransitionBatch.from_transitions(sample))]
        if cfg.update_mode == "sequential":
            return self.agent.sequential_updates(batch)
        return [self.agent.update(batch)]

    def _log_progress(self, episode: int, log: EpisodeLog) -> None:
        frame = log.to_frame()
        recent = frame[frame["episode"] > episode - self.config.log_every]
        rate = recent["sum_rate_per_ap"].mean()
        loss = recent["loss"].mean()
        message = f"エピソード {episode}/{self.config.n_episodes}: AP平均合計レート={rate:.4f}, 損失={loss:.4g}"
        if self.agent.uses_critic:
            message += f", クリティック損失={recent['critic_loss'].mean():.4g}"
        self.logger.info(message)


def run_training(
    config: TrainConfig,
    logger: Optional[logging.Logger] = None,
    agent: Optional[PowerAgent] = None,
    keep_arrays: bool = False,
    checkpoint_callback: Optional[CheckpointCallback] = None,
) -> Tuple[PowerAgent, EpisodeLog]:
    """設定に従って学習し、(学習済みエージェント, EpisodeLog) を返す"""
    trainer = Trainer(config, agent, logger, keep_arrays, checkpoint_callback)
    return trainer.run()


# --- 環境追従 ---


def value_estimates(agent: PowerAgent, batch: TransitionBatch) -> np.ndarray:
    """
    実行した行動に対するエージェント自身の報酬予測

    DDPG はクリティック出力、DQL は選択行動の Q 値。
    """
    if agent.uses_critic:
        return agent.critic_values(batch.critic_states)
    if agent.kind == "dql":
        q = agent.q_net.predict(batch.states)
        return q[np.arange(len(batch)), np.asarray(batch.actions, dtype=int)]
    raise ConfigError("agent.kind", f"{agent.kind} は報酬予測を持たないため環境追従できません")


def run_tracking(
    agent: PowerAgent,
    config: TrainConfig,
    reward_source: Optional[RewardSource] = None,
    logger: Optional[logging.Logger] = None,
    scenario: Optional[NetworkScenario] = None,
    reshadow_every: int = 0,
) -> TrackingReport:
    """
    学習済みエージェントを連続運用し、正規化クリティック損失が閾値を超えたスロットだけ再学習する

    Args:
        agent: DDPG または DQL エージェント
        config: 設定（tracking.window / threshold / slots を使用）
        reward_source: (scenario, channel, 割当) -> 報酬 (N, K)。省略時は局所報酬を計算する
        logger: ロガー
        scenario: 運用するシナリオ（省略時はシードから生成）
        reshadow_every: >0 なら指定スロットごとにシャドウイングを引き直して環境変化を模擬する

    Returns:
        TrackingReport: 実行スロット数・学習スロット数・損失・AP平均合計レート
    """
    logger = logger or logging.getLogger(__name__)
    if not agent.uses_critic and agent.kind != "dql":
        raise ConfigError("agent.kind", f"{agent.kind} は環境追従に対応していません")
    controller = TrackingController(config.tracking_window, config.tracking_threshold, logger)
    scenario = scenario or episode_scenario(config, 0)
    channel_rng = make_rng([config.seed, 0, STREAM_CHANNEL])
    agent_rng = make_rng([config.seed, 0, STREAM_AGENT])
    channel = init_channel(scenario, config.doppler_hz, config.slot_sec, channel_rng)
    prev_alloc, prev_rates = cold_start(scenario, channel)
    report = TrackingReport()

    for slot in range(1, config.tracking_slots + 1):
        if reshadow_every > 0 and slot > 1 and (slot - 1) % reshadow_every == 0:
            scenario = reshadow(
                scenario, config.shadow_sigma_db, child_seed(config.seed, slot, STREAM_SCENARIO)
            )
            logger.info(f"スロット {slot}: 環境変化（シャドウイング再抽選）")
        if slot > 1:
            channel = step_channel(channel, channel_rng, scenario)
        batch, alloc, rates, rewards, _ = slot_batch(
            agent, config, scenario, channel, prev_alloc, prev_rates, agent_rng, False
        )
        if reward_source is not None:
            rewards = np.asarray(reward_source(scenario, channel, alloc), dtype=float)
            batch = batch.with_rewards(rewards)

        try:
            decision = tracking_step(controller, value_estimates(agent, batch), batch.rewards)
        except TrackingError:
            logger.debug(f"スロット {slot}: 有効な報酬がないため判定をスキップします")
            decision = TrackingDecision.SKIP
        report.losses.append(controller.last_loss)
        report.sum_rates.append(rates.sum_rate_per_ap)
        if decision is TrackingDecision.TRAIN:
            agent.update(batch)
            report.trained_slots += 1
        report.slots += 1
        prev_alloc, prev_rates = alloc, rates

    logger.info(
        f"環境追従を終了しました: {report.slots}スロット中 {report.trained_slots}スロットで再学習"
    )
    return report
