"""
DDPG（半モデルフリーのクリティックを用いた決定的方策勾配）

クリティックの入力は局所リンクの現在レートを降順に並べた上位 I_c 個で、行動（送信電力）は
解析的なレートモデルを通してのみクリティックに影響します。アクターの勾配は
クリティックの入力勾配とレートモデルのヤコビアンを連鎖させて求めます。
"""

import logging
from typing import Optional, Tuple

import numpy as np

from core.metrics import rate_sensitivity, signal_and_interference
from core.neural import MlpNetwork, adam_step
from models.agent_models import (
    ActionCodec,
    AgentSettings,
    CriticState,
    TransitionBatch,
    UpdateResult,
)
from models.network_models import ChannelState, NetworkScenario, PowerAllocation
from services.agents.base import PowerAgent
from services.agents.features import sort_top

logger = logging.getLogger(__name__)


def exploration_bound(p_max_mw: float, episode: int) -> float:
    """探索雑音の範囲 P_max / k"""
    if episode < 1:
        raise ValueError(f"エピソード番号は1以上である必要があります: {episode}")
    return p_max_mw / episode


def ddpg_act(
    actor_net: MlpNetwork,
    states,
    episode: int,
    rng: Optional[np.random.Generator],
    explore: bool,
) -> np.ndarray:
    """
    アクターの出力に一様雑音 U(-P_max/k, P_max/k) を加えて [0, P_max] に制限する

    explore=False ではアクターの出力（scaled sigmoid）をそのまま返す。
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    p_max = actor_net.output_scale
    bound = exploration_bound(p_max, episode)
    powers = actor_net.predict(states)[:, 0]
    if not explore or rng is None:
        return powers
    noise = rng.uniform(-bound, bound, size=powers.shape)
    return np.clip(powers + noise, 0.0, p_max)


def critic_state(
    scenario: NetworkScenario,
    channel: ChannelState,
    alloc: PowerAllocation,
    cell: int,
    user: int,
    i_c: int,
    terms: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[CriticState, np.ndarray]:
    """
    クリティック入力と、その各要素の p_{cell,user} に関する偏微分を求める

    並べ替えの順序は permutation に固定し、ヤコビアンも同じ順序で返す。
    局所リンク数が I_c 未満の場合は末尾を0で埋める。
    """
    links, rates, derivative = rate_sensitivity(scenario, channel, alloc, cell, user, terms)
    values, order = sort_top(rates, i_c)
    jacobian = derivative[order]
    chosen = links[order]
    n_padded = i_c - len(values)
    if n_padded > 0:
        values = np.concatenate([values, np.zeros(n_padded)])
        jacobian = np.concatenate([jacobian, np.zeros(n_padded)])
        order = np.concatenate([order, np.full(n_padded, -1)])
        chosen = np.concatenate([chosen, np.full((n_padded, 2), -1)])
    return CriticState(rates=values, permutation=order, links=chosen), jacobian


def critic_state_matrix(
    scenario: NetworkScenario,
    channel: ChannelState,
    alloc: PowerAllocation,
    i_c: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """全リンクのクリティック入力とヤコビアン (N*K, I_c)"""
    terms = signal_and_interference(scenario, channel, alloc)
    n_links = scenario.n_links
    inputs = np.zeros((n_links, i_c))
    jacobians = np.zeros((n_links, i_c))
    for cell in range(scenario.n_cells):
        for user in range(scenario.users_per_cell):
            state, jac = critic_state(scenario, channel, alloc, cell, user, i_c, terms)
            row = cell * scenario.users_per_cell + user
            inputs[row] = state.rates
            jacobians[row] = jac
    return inputs, jacobians


def chained_action_gradient(critic_net: MlpNetwork, critic_inputs, jacobians) -> np.ndarray:
    """
    dQ/dp = (∂Q/∂s_c) · (∂s_c/∂p) をサンプルごとに求める

    Returns:
        np.ndarray: (B,)
    """
    critic_inputs = np.atleast_2d(np.asarray(critic_inputs, dtype=float))
    jacobians = np.atleast_2d(np.asarray(jacobians, dtype=float))
    critic_net.forward(critic_inputs)
    tape = critic_net.backward(np.ones((len(critic_inputs), 1)))
    return np.sum(tape.input_grad * jacobians, axis=1)


def ddpg_update(
    actor_net: MlpNetwork,
    critic_net: MlpNetwork,
    batch: TransitionBatch,
    lr_actor: float,
    lr_critic: float,
) -> UpdateResult:
    """
    クリティック、アクターの順に1ステップずつ更新する

    クリティックは実行した電力でのクリティック入力で ½Σ(Q(s_c) - r)^2 を降下し、
    アクターは更新後のクリティックを決定的な電力 A(s) での入力（batch.actor_point()）で
    評価して Q を上昇する。
    勾配が有限値でない場合はその時点で更新を打ち切る。

    Args:
        actor_net: scaled sigmoid 出力のアクター
        critic_net: 線形1出力のクリティック
        batch: states, critic_states, jacobians, rewards を含む束
            （actor_critic_states, actor_jacobians は任意）
        lr_actor: アクター学習率
        lr_critic: クリティック学習率

    Returns:
        UpdateResult: loss はアクター評価点での -mean(Q)、critic_loss は ½Σ(Q - r)^2
    """
    if batch.critic_states is None or batch.jacobians is None:
        raise ValueError("DDPG の更新にはクリティック入力とヤコビアンが必要です")
    critic_inputs = np.atleast_2d(batch.critic_states)
    rewards = np.asarray(batch.rewards, dtype=float).reshape(-1)

    q_values = critic_net.forward(critic_inputs)[:, 0]
    residual = q_values - rewards
    critic_tape = critic_net.backward(residual[:, None])
    critic_loss = float(0.5 * np.sum(residual**2))
    if not critic_tape.is_finite() or not np.isfinite(critic_loss):
        logger.warning("クリティックの勾配が有限値ではないため更新を中止しました")
        return UpdateResult(loss=float("nan"), critic_loss=float("nan"), aborted=True)
    adam_step(critic_net, critic_tape, lr_critic)

    actor_inputs, actor_jacobians = batch.actor_point()
    actor_inputs = np.atleast_2d(actor_inputs)
    action_grad = chained_action_gradient(critic_net, actor_inputs, actor_jacobians)
    actor_q = critic_net.predict(actor_inputs)[:, 0]
    actor_net.forward(np.atleast_2d(batch.states))
    actor_tape = actor_net.backward(-action_grad[:, None])
    if not actor_tape.is_finite():
        logger.warning("アクターの勾配が有限値ではないため更新を中止しました")
        return UpdateResult(loss=float("nan"), critic_loss=critic_loss, aborted=True)
    adam_step(actor_net, actor_tape, lr_actor)
    return UpdateResult(loss=float(-np.mean(actor_q)), critic_loss=critic_loss)


class DdpgAgent(PowerAgent):
    """アクターとクリティックを全リンクで共有する DDPG エージェント"""

    kind = "ddpg"
    uses_critic = True
    supports_replay = False

    def __init__(
        self,
        settings: AgentSettings,
        codec: ActionCodec,
        actor_net: MlpNetwork,
        critic_net: MlpNetwork,
        logger: Optional[logging.Logger] = None,
    ):
        super().__init__(settings, codec, logger)
        self.actor_net = actor_net
        self.critic_net = critic_net

    def act(self, states, rng=None, explore=False):
        powers = ddpg_act(self.actor_net, states, self.episode, rng, explore)
        return powers, powers

    def critic_values(self, critic_inputs) -> np.ndarray:
        return self.critic_net.predict(np.atleast_2d(critic_inputs))[:, 0]

    def update(self, batch: TransitionBatch) -> UpdateResult:
        s = self.settings
        return ddpg_update(
            self.actor_net, self.critic_net, batch, s.actor_learning_rate, s.critic_learning_rate
        )

    def networks(self):
        return {"actor": self.actor_net, "critic": self.critic_net}

    def _set_networks(self, networks):
        self.actor_net = networks["actor"]
        self.critic_net = networks["critic"]
