"""
DQL（割引率0の深層Q学習）

Q(s, a) を即時報酬 r に回帰させ、動的 ε-greedy で行動を選択します。
次状態の価値推定は使用しません。
"""

import logging
from typing import Optional, Tuple

import numpy as np

from core.neural import GradientTape, MlpNetwork, adam_step, sgd_step
from models.agent_models import ActionCodec, AgentSettings, TransitionBatch, UpdateResult
from services.agents.base import PowerAgent
from services.agents.codec import decode_action

logger = logging.getLogger(__name__)

EPSILON_FIRST = 0.2
EPSILON_LAST = 1e-4


def epsilon_schedule(
    episode: int,
    n_episodes: int,
    eps_first: float = EPSILON_FIRST,
    eps_last: float = EPSILON_LAST,
) -> float:
    """ε_k = ε_1 + (k-1)/(N_e-1) (ε_{N_e} - ε_1)。k は1始まり"""
    if n_episodes <= 1:
        return eps_first
    k = min(max(int(episode), 1), n_episodes)
    return eps_first + (k - 1) / (n_episodes - 1) * (eps_last - eps_first)


def dql_gradient(q_net: MlpNetwork, states, actions, rewards) -> Tuple[GradientTape, float]:
    """選択行動の出力ユニットのみに誤差 (Q - r) を流した勾配と ½Σ(Q - r)^2"""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.asarray(actions, dtype=int).reshape(-1)
    rewards = np.asarray(rewards, dtype=float).reshape(-1)
    q_values = q_net.forward(states)
    rows = np.arange(len(actions))
    residual = q_values[rows, actions] - rewards
    output_grad = np.zeros_like(q_values)
    output_grad[rows, actions] = residual
    tape = q_net.backward(output_grad)
    return tape, float(0.5 * np.sum(residual**2))


def dql_update(
    q_net: MlpNetwork,
    batch: TransitionBatch,
    learning_rate: float,
    optimizer: str = "adam",
) -> UpdateResult:
    """
    Q ネットワークを1ステップ更新する

    Args:
        q_net: 線形出力の Q ネットワーク
        batch: (状態, 行動インデックス, 報酬) の束
        learning_rate: 学習率
        optimizer: "adam" または "sgd"

    Returns:
        UpdateResult: loss は更新前の ½Σ(Q - r)^2
    """
    tape, loss = dql_gradient(q_net, batch.states, batch.actions, batch.rewards)
    if not tape.is_finite() or not np.isfinite(loss):
        logger.warning("DQL の勾配が有限値ではないため更新を中止しました")
        return UpdateResult(loss=float("nan"), aborted=True)
    if optimizer == "sgd":
        sgd_step(q_net, tape, learning_rate)
    else:
        adam_step(q_net, tape, learning_rate)
    return UpdateResult(loss=loss)


def dql_select(q_net: MlpNetwork, states, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """
    ε-greedy で行動インデックスを選ぶ

    確率 ε で一様ランダム、それ以外は argmax_a Q(s, a)。
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon は [0, 1] の範囲である必要があります: {epsilon}")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    greedy = np.argmax(q_net.predict(states), axis=1)
    if epsilon == 0.0:
        return greedy
    explore = rng.random(len(states)) < epsilon
    random_actions = rng.integers(0, q_net.output_dim, size=len(states))
    return np.where(explore, random_actions, greedy)


class DqlAgent(PowerAgent):
    """Q ネットワークを全リンクで共有する DQL エージェント"""

    kind = "dql"

    def __init__(
        self,
        settings: AgentSettings,
        codec: ActionCodec,
        q_net: MlpNetwork,
        logger: Optional[logging.Logger] = None,
    ):
        super().__init__(settings, codec, logger)
        self.q_net = q_net

    @property
    def epsilon(self) -> float:
        s = self.settings
        return epsilon_schedule(self.episode, s.n_episodes, s.eps_first, s.eps_last)

    def act(self, states, rng=None, explore=False):
        if explore and rng is not None:
            actions = dql_select(self.q_net, states, self.epsilon, rng)
        else:
            actions = np.argmax(self.q_net.predict(np.atleast_2d(states)), axis=1)
        return np.atleast_1d(decode_action(self.codec, actions)), actions

    def update(self, batch: TransitionBatch) -> UpdateResult:
        return dql_update(self.q_net, batch, self.settings.actor_learning_rate)

    def networks(self):
        return {"q": self.q_net}

    def _set_networks(self, networks):
        self.q_net = networks["q"]
