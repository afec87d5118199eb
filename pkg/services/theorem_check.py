"""
単段報酬分解の検証オラクル

遷移確率が行動に依存せず、報酬が (状態, 行動) のみで決まる有限MDPでは、
T ステップ平均報酬を最大化する方策が各ステップの即時報酬を最大化する貪欲方策と
一致することを、小さな MDP の全方策列挙で確認します。
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from utils.errors import TheoremHypothesisError

logger = logging.getLogger(__name__)

MAX_STATES = 4
MAX_ACTIONS = 3
MAX_HORIZON = 4
ENUMERATION_LIMIT = 4096
VALUE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class ToyMdp:
    """
    有限ホライズンの小さな MDP

    transitions[a, s, s'] は遷移確率、rewards は (S, A) または (S, A, S')。
    """

    transitions: np.ndarray
    rewards: np.ndarray
    horizon: int
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise ValueError(f"遷移確率の形状が不正です: {p.shape}")
        n_actions, n_states = p.shape[0], p.shape[1]
        if n_states > MAX_STATES or n_actions > MAX_ACTIONS or not 1 <= self.horizon <= MAX_HORIZON:
            raise ValueError(
                f"MDP が大きすぎます: |S|={n_states}, |A|={n_actions}, T={self.horizon}"
            )
        if np.any(p < 0.0) or not np.allclose(p.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("遷移確率の各行は確率分布である必要があります")
        if r.shape not in ((n_states, n_actions), (n_states, n_actions, n_states)):
            raise ValueError(f"報酬の形状が不正です: {r.shape}")
        initial = self.initial
        if initial is None:
            initial = np.zeros(n_states)
            initial[0] = 1.0
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (n_states,) or not math.isclose(initial.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("初期分布が不正です")
        object.__setattr__(self, "transitions", p)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "initial", initial)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    def expected_rewards(self) -> np.ndarray:
        """r(s, a) = Σ_s' P[a, s, s'] R[s, a, s']"""
        if self.rewards.ndim == 2:
            return self.rewards
        return np.einsum("ast,sat->sa", self.transitions, self.rewards)

    def hypothesis_violations(self) -> list:
        """遷移の行動非依存性と報酬の (s, a) 依存性を検査する"""
        violations = []
        if not all(np.array_equal(self.transitions[0], p) for p in self.transitions[1:]):
            violations.append("遷移確率が行動に依存しています")
        if self.rewards.ndim == 3:
            spread = self.rewards.max(axis=2) - self.rewards.min(axis=2)
            if np.any(spread > 0.0):
                violations.append("報酬が次状態に依存しています")
        return violations


@dataclass(frozen=True)
class TheoremCheckResult:
    hypothesis_holds: bool
    greedy_value: float
    optimal_value: float
    greedy_is_optimal: bool
    method: str
    n_policies: int

    @property
    def holds(self) -> bool:
        return self.hypothesis_holds and self.greedy_is_optimal


def policy_value(mdp: ToyMdp, policy: np.ndarray) -> float:
    """決定的マルコフ方策 policy[t, s] の T ステップ平均報酬"""
    r = mdp.expected_rewards()
    states = np.arange(mdp.n_states)
    distribution = mdp.initial.copy()
    total = 0.0
    for t in range(mdp.horizon):
        actions = policy[t]
        total += float(np.dot(distribution, r[states, actions]))
        distribution = np.einsum("s,st->t", distribution, mdp.transitions[actions, states])
    return total / mdp.horizon


def greedy_policy(mdp: ToyMdp) -> np.ndarray:
    """各時刻・各状態で即時報酬を最大化する方策"""
    best = np.argmax(mdp.expected_rewards(), axis=1)
    return np.tile(best, (mdp.horizon, 1))


def _enumerated_optimum(mdp: ToyMdp) -> float:
    n_slots = mdp.horizon * mdp.n_states
    best = -math.inf
    for flat in itertools.product(range(mdp.n_actions), repeat=n_slots):
        policy = np.array(flat).reshape(mdp.horizon, mdp.n_states)
        best = max(best, policy_value(mdp, policy))
    return best


def _backward_optimum(mdp: ToyMdp) -> float:
    r = mdp.expected_rewards()
    future = np.zeros(mdp.n_states)
    for _ in range(mdp.horizon):
        # q[s, a] = r(s, a) + Σ_s' P[a, s, s'] W(s')
        q = r + np.einsum("ast,t->sa", mdp.transitions, future)
        future = q.max(axis=1)
    return float(np.dot(mdp.initial, future)) / mdp.horizon


def verify_greedy_optimality(mdp: ToyMdp, strict: bool = False) -> TheoremCheckResult:
    """
    貪欲方策の価値が全決定的マルコフ方策の最適値と一致するかを調べる

    方策数 |A|^(|S|T) が 4096 以下なら全列挙、それを超える場合は後ろ向き帰納で最適値を求める。

    Args:
        mdp: 検証対象の MDP
        strict: True なら前提条件違反で例外を送出する

    Returns:
        TheoremCheckResult: 検証結果

    Raises:
        TheoremHypothesisError: strict=True で前提条件を満たさない場合
    """
    violations = mdp.hypothesis_violations()
    if violations and strict:
        raise TheoremHypothesisError("; ".join(violations))

    n_policies = mdp.n_actions ** (mdp.n_states * mdp.horizon)
    if n_policies <= ENUMERATION_LIMIT:
        optimum, method = _enumerated_optimum(mdp), "enumeration"
    else:
        optimum, method = _backward_optimum(mdp), "backward_induction"
    greedy = policy_value(mdp, greedy_policy(mdp))
    is_optimal = math.isclose(greedy, optimum, rel_tol=VALUE_TOLERANCE, abs_tol=VALUE_TOLERANCE)
    if violations:
        logger.info(f"前提条件を満たさない MDP です: {', '.join(violations)}")
    return TheoremCheckResult(
        hypothesis_holds=not violations,
        greedy_value=greedy,
        optimal_value=optimum,
        greedy_is_optimal=is_optimal,
        method=method,
        n_policies=n_policies,
    )


def random_toy_mdp(
    rng: np.random.Generator,
    n_states: Optional[int] = None,
    n_actions: Optional[int] = None,
    horizon: Optional[int] = None,
    action_independent: bool = True,
) -> ToyMdp:
    """ランダムな小規模 MDP を生成する（既定は行動非依存の遷移）"""
    n_states = n_states or int(rng.integers(1, MAX_STATES + 1))
    n_actions = n_actions or int(rng.integers(1, MAX_ACTIONS + 1))
    horizon = horizon or int(rng.integers(1, MAX_HORIZON + 1))
    if action_independent:
        base = rng.dirichlet(np.ones(n_states), size=n_states)
        transitions = np.repeat(base[None, :, :], n_actions, axis=0)
    else:
        transitions = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    rewards = rng.normal(size=(n_states, n_actions))
    initial = rng.dirichlet(np.ones(n_states))
    return ToyMdp(transitions, rewards, horizon, initial)


def trap_counterexample(horizon: int = 3) -> ToyMdp:
    """
    行動依存の遷移を持つ反例

    状態0で行動0は報酬1で状態0に留まり、行動1は報酬0で状態1へ移る。
    状態1はどの行動でも報酬10で状態1に留まる。
    """
    transitions = np.array(
        [
            [[1.0, 0.0], [0.0, 1.0]],
            [[0.0, 1.0], [0.0, 1.0]],
        ]
    )
    rewards = np.array([[1.0, 0.0], [10.0, 10.0]])
    return ToyMdp(transitions, rewards, horizon, np.array([1.0, 0.0]))


def single_action_mdp(rng: np.random.Generator, n_states: int = 3, horizon: int = 3) -> ToyMdp:
    return random_toy_mdp(rng, n_states=n_states, n_actions=1, horizon=horizon)


def check_many(rng: np.random.Generator, count: int = 100) -> Sequence[TheoremCheckResult]:
    """ランダムな行動非依存 MDP を count 個検証する"""
    return [verify_greedy_optimality(random_toy_mdp(rng)) for _ in range(count)]
