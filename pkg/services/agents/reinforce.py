"""
REINFORCE（方策勾配）

softmax 方策ネットワークを、バッチごとに白色化した即時報酬で重み付けした
∇ ln π(a|s) の方向に更新します。
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from core.neural import GradientTape, MlpNetwork, adam_step, log_softmax
from models.agent_models import ActionCodec, AgentSettings, TransitionBatch, UpdateResult
from services.agents.base import PowerAgent
from services.agents.codec import decode_action

logger = logging.getLogger(__name__)

WHITEN_FLOOR = 1e-8


def whiten_rewards(rewards, floor: float = WHITEN_FLOOR) -> np.ndarray:
    """
    報酬を平均0・分散1に正規化する

    標準偏差が floor 以下（全報酬が等しいなど）の場合はすべて0を返す。
    """
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        return rewards
    std = rewards.std()
    if std <= floor:
        return np.zeros_like(rewards)
    return (rewards - rewards.mean()) / std


def log_policy(policy_net: MlpNetwork, states) -> np.ndarray:
    """ln π(·|s)（ロジットから log-sum-exp で計算）"""
    return log_softmax(policy_net.predict_preactivation(states))


def reinforce_gradient(
    policy_net: MlpNetwork, states, actions, weights
) -> Tuple[GradientTape, float]:
    """
    Σ_i w_i ln π(a_i|s_i) の勾配と目的関数値

    ロジット z に対する ∂ ln π(a)/∂z = onehot(a) - π を出力層の手前から逆伝播する。
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.asarray(actions, dtype=int).reshape(-1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    probs = policy_net.forward(states)
    logits = policy_net.last_preactivation
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(actions)), actions] = 1.0
    grad_logits = (onehot - probs) * weights[:, None]
    tape = policy_net.backward(grad_logits, through_head=False)
    log_pi = log_softmax(logits)[np.arange(len(actions)), actions]
    return tape, float(np.sum(weights * log_pi))


def reinforce_update(
    policy_net: MlpNetwork,
    batch: TransitionBatch,
    learning_rate: float,
    whiten: bool = True,
) -> UpdateResult:
    """
    方策ネットワークを1ステップ上昇更新する

    Args:
        policy_net: softmax 出力の方策ネットワーク
        batch: (状態, 行動インデックス, 報酬) の束
        learning_rate: 学習率
        whiten: バッチ内で報酬を白色化するか

    Returns:
        UpdateResult: loss は -Σ r̃ ln π(a|s)
    """
    weights = whiten_rewards(batch.rewards) if whiten else np.asarray(batch.rewards, dtype=float)
    if not np.any(weights):
        return UpdateResult(loss=0.0, skipped=True)
    tape, objective = reinforce_gradient(policy_net, batch.states, batch.actions, weights)
    if not tape.is_finite() or not np.isfinite(objective):
        logger.warning("REINFORCE の勾配が有限値ではないため更新を中止しました")
        return UpdateResult(loss=float("nan"), aborted=True)
    adam_step(policy_net, tape.scaled(-1.0), learning_rate)
    return UpdateResult(loss=-objective)


def reinforce_select(
    policy_net: MlpNetwork,
    states,
    rng: Optional[np.random.Generator] = None,
    greedy: bool = False,
) -> np.ndarray:
    """方策から行動インデックスを抽出する（greedy なら argmax）"""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    probs = np.exp(log_policy(policy_net, states))
    if greedy or rng is None:
        return np.argmax(probs, axis=1)
    cumulative = np.cumsum(probs, axis=1)
    cumulative[:, -1] = 1.0
    draws = rng.random(len(states))[:, None]
    return np.argmax(draws < cumulative, axis=1)


class ReinforceAgent(PowerAgent):
    """softmax 方策を全リンクで共有する REINFORCE エージェント"""

    kind = "reinforce"

    def __init__(
        self,
        settings: AgentSettings,
        codec: ActionCodec,
        policy_net: MlpNetwork,
        logger: Optional[logging.Logger] = None,
    ):
        super().__init__(settings, codec, logger)
        self.policy_net = policy_net

    def act(self, states, rng=None, explore=False):
        actions = reinforce_select(self.policy_net, states, rng, greedy=not explore)
        return np.atleast_1d(decode_action(self.codec, actions)), actions

    def update(self, batch: TransitionBatch) -> UpdateResult:
        return reinforce_update(self.policy_net, batch, self.settings.actor_learning_rate)

    def sequential_updates(self, batch: TransitionBatch) -> List[UpdateResult]:
        # 白色化はスロット全体で1回行い、遷移ごとの更新では行わない
        whitened = batch.with_rewards(whiten_rewards(batch.rewards))
        lr = self.settings.actor_learning_rate
        return [
            reinforce_update(self.policy_net, whitened.subset(i), lr, whiten=False)
            for i in range(len(batch))
        ]

    def networks(self):
        return {"policy": self.policy_net}

    def _set_networks(self, networks):
        self.policy_net = networks["policy"]
