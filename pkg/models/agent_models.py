"""
エージェント関連のモデルクラス

このモジュールには、観測・行動コーデック・遷移・クリティック状態に関する
データモデルクラスが含まれています。
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

FEATURE_KINDS = ("f1", "f2")
AGENT_KINDS = ("reinforce", "dql", "ddpg")
BASELINE_KINDS = ("max_power", "random")
GAMMA_DB_FLOOR = -200.0
GAMMA_DB_CEIL = 200.0


@dataclass(frozen=True, eq=False)
class AgentObservation:
    """リンク (cell, user) の観測（降順ソート済みの干渉特徴量）"""

    gamma_db: np.ndarray
    prev_power: np.ndarray
    prev_rate: Optional[np.ndarray]
    index_set: np.ndarray
    n_padded: int = 0

    @property
    def i_c(self) -> int:
        return len(self.gamma_db)

    def vector(self) -> np.ndarray:
        """ネットワーク入力ベクトル（f1: 2I_c, f2: 3I_c）"""
        parts = [self.gamma_db / 10.0, self.prev_power]
        if self.prev_rate is not None:
            parts.append(self.prev_rate)
        return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class CriticState:
    """
    クリティック入力（局所リンクの現在レートを降順に並べた上位 I_c 個）

    permutation[i] は rates[i] に対応する局所リンクの位置で、ヤコビアン計算時に固定する。
    """

    rates: np.ndarray
    permutation: np.ndarray
    links: np.ndarray


@dataclass(frozen=True)
class ActionCodec:
    """行動と送信電力の対応（離散 |A| 段階 または 連続）"""

    mode: str
    p_min_mw: float
    p_max_mw: float
    n_levels: int = 0

    def __post_init__(self):
        if self.mode not in ("discrete", "continuous"):
            raise ValueError(f"未対応の行動モードです: {self.mode}")
        if self.mode == "discrete" and self.n_levels < 3:
            raise ValueError(f"離散行動の段階数は3以上である必要があります: {self.n_levels}")
        if not 0.0 < self.p_min_mw < self.p_max_mw:
            raise ValueError("0 < P_min < P_max である必要があります")

    @property
    def levels(self) -> np.ndarray:
        """{0} ∪ {P_min (P_max/P_min)^(i/(|A|-2)), i = 0..|A|-2}"""
        if self.mode != "discrete":
            raise ValueError("連続行動には離散レベルがありません")
        exponents = np.arange(self.n_levels - 1) / (self.n_levels - 2)
        nonzero = self.p_min_mw * (self.p_max_mw / self.p_min_mw) ** exponents
        nonzero[-1] = self.p_max_mw
        return np.concatenate([[0.0], nonzero])


@dataclass(frozen=True, eq=False)
class Transition:
    """1リンク分の遷移（観測ベクトル・行動・報酬）"""

    state: np.ndarray
    action: float
    reward: float
    cell: int = -1
    user: int = -1
    critic_state: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class TransitionBatch:
    """
    更新1回分の遷移の束

    critic_states と jacobians は DDPG のみ使用し、実行した（探索雑音入りの）電力で求める。
    actor_critic_states と actor_jacobians はアクター更新用で、探索雑音を除いた
    決定的な電力 A(s) で求める。省略時は critic_states / jacobians を使う。
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    critic_states: Optional[np.ndarray] = None
    jacobians: Optional[np.ndarray] = None
    actor_critic_states: Optional[np.ndarray] = None
    actor_jacobians: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.rewards)

    def actor_point(self) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        """アクター更新で評価するクリティック入力とヤコビアン"""
        if self.actor_critic_states is not None and self.actor_jacobians is not None:
            return self.actor_critic_states, self.actor_jacobians
        return self.critic_states, self.jacobians

    @classmethod
    def from_transitions(cls, transitions) -> "TransitionBatch":
        transitions = list(transitions)
        critic = [t.critic_state for t in transitions]
        return cls(
            states=np.stack([t.state for t in transitions]),
            actions=np.array([t.action for t in transitions]),
            rewards=np.array([t.reward for t in transitions], dtype=float),
            critic_states=None if any(c is None for c in critic) else np.stack(critic),
        )

    def subset(self, index) -> "TransitionBatch":
        index = np.atleast_1d(index)

        def pick(values):
            return None if values is None else values[index]

        return TransitionBatch(
            states=self.states[index],
            actions=self.actions[index],
            rewards=self.rewards[index],
            critic_states=pick(self.critic_states),
            jacobians=pick(self.jacobians),
            actor_critic_states=pick(self.actor_critic_states),
            actor_jacobians=pick(self.actor_jacobians),
        )

    def with_rewards(self, rewards) -> "TransitionBatch":
        return replace(self, rewards=np.asarray(rewards, dtype=float).reshape(-1))

    def to_transitions(self):
        return [
            Transition(state=self.states[i], action=self.actions[i], reward=float(self.rewards[i]))
            for i in range(len(self))
        ]


@dataclass
class UpdateResult:
    """1回の更新の結果"""

    loss: float = 0.0
    critic_loss: Optional[float] = None
    aborted: bool = False
    skipped: bool = False


DEFAULT_LEARNING_RATES = {"reinforce": 1e-4, "dql": 1e-3, "ddpg": 1e-4}


@dataclass(frozen=True)
class AgentSettings:
    """エージェントの構成（ネットワーク構造・学習率・探索スケジュール）"""

    kind: str
    feature_kind: str = "f2"
    i_c: int = 16
    n_levels: int = 10
    hidden: Tuple[int, ...] = (64, 128)
    critic_hidden: Tuple[int, ...] = (64,)
    learning_rate: Optional[float] = None
    critic_learning_rate: float = 1e-3
    n_episodes: int = 5000
    eps_first: float = 0.2
    eps_last: float = 1e-4

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"不明なエージェントの種類です: {self.kind}")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError(f"不明な特徴量の種類です: {self.feature_kind}")

    @property
    def actor_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LEARNING_RATES[self.kind]
