"""
検証サービス

勾配の有限差分チェック、DDPG 連鎖勾配、Jakes 相関、単段報酬分解オラクル、
局所報酬の比例関係、特徴量次元・行動レベル・ε スケジュールを検査し、
測定値付きの合否レポートを作ります。
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from core.channel import init_channel, j0_series, step_channel
from core.metrics import evaluate_allocation, local_rewards, reward_multiplicity
from core.neural import GradientTape, MlpNetwork, numerical_gradients, relative_error
from core.topology import build_scenario
from models.network_models import ChannelState, NetworkScenario, PowerAllocation, RadioConfig
from services.agents.codec import discrete_codec, level_spacing_db
from services.agents.ddpg import chained_action_gradient, critic_state
from services.agents.dql import EPSILON_FIRST, EPSILON_LAST, epsilon_schedule
from services.agents.features import feature_dim
from services.theorem_check import check_many, trap_counterexample, verify_greedy_optimality
from utils.seeding import make_rng

GRADIENT_TOLERANCE = 1e-4
CHAIN_TOLERANCE = 1e-3
JAKES_TOLERANCE = 0.01
POWER_TOLERANCE = 0.02
PROPORTIONALITY_TOLERANCE = 1e-9
JAKES_REFERENCE = 0.6425
JAKES_SCENARIO_SEED = 17

# (net, x, output_weights) -> 解析的勾配。負の対照で差し替える
BackwardFn = Callable[[MlpNetwork, np.ndarray, np.ndarray], GradientTape]


def analytic_backward(net: MlpNetwork, x: np.ndarray, output_weights: np.ndarray) -> GradientTape:
    net.forward(x)
    return net.backward(output_weights)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: Dict[str, Any] = field(default_factory=dict)
    elapsed_sec: float = 0.0


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2, default=float)
        return path


def _tape_error(analytic: GradientTape, numeric: GradientTape) -> float:
    """パラメータ勾配と入力勾配をまとめたベクトルのノルム相対誤差"""
    a = np.concatenate([analytic.flat(), np.ravel(analytic.input_grad)])
    n = np.concatenate([numeric.flat(), np.ravel(numeric.input_grad)])
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12))


def check_gradients(
    rng: np.random.Generator,
    n_nets: int = 12,
    backward_fn: BackwardFn = analytic_backward,
) -> CheckResult:
    """ランダムな小規模ネットワーク（3層以下、16ユニット以下）の勾配を中心差分と比較する"""
    heads = ("linear", "softmax", "scaled_sigmoid")
    worst = 0.0
    for i in range(n_nets):
        n_layers = int(rng.integers(1, 4))
        sizes = [int(s) for s in rng.integers(1, 17, size=n_layers + 1)]
        head = heads[i % len(heads)]
        if head == "softmax":
            sizes[-1] = max(sizes[-1], 2)
        scale = 10.0 if head == "scaled_sigmoid" else 1.0
        net = MlpNetwork.build(sizes, head=head, rng=rng, output_scale=scale)
        for layer in net.layers:
            layer.bias[:] = rng.normal(0.0, 0.1, size=layer.bias.shape)
        x = rng.normal(size=(int(rng.integers(1, 4)), sizes[0]))
        u = rng.normal(size=(len(x), sizes[-1]))
        analytic = backward_fn(net, x, u)
        numeric = numerical_gradients(net, x, u)
        worst = max(worst, _tape_error(analytic, numeric))
    return CheckResult(
        "gradient_finite_difference",
        worst <= GRADIENT_TOLERANCE,
        {"max_relative_error": worst, "tolerance": GRADIENT_TOLERANCE, "networks": n_nets},
    )


def _stable_link(scenario, channel, alloc):
    """局所リンクの SINR がすべて上限より十分小さいリンクを探す"""
    report = evaluate_allocation(scenario, channel, alloc)
    cap = scenario.radio.sinr_cap
    for cell in range(scenario.n_cells):
        local = scenario.extended[cell]
        if cap is None or np.all(report.sinr[local] < 0.5 * cap):
            return cell, 0
    return 0, 0


def check_ddpg_chain(rng: np.random.Generator, i_c: int = 16) -> CheckResult:
    """
    アクター → 解析レートモデル → 降順クリティック状態 → クリティック の合成勾配を中心差分と比較する

    並べ替えの順序が変わらない摂動幅でのみ比較する。
    """
    radio = RadioConfig()
    scenario = build_scenario(25, 4, 0.01, 1.0, 8.0, int(rng.integers(2**31)), radio=radio)
    channel = init_channel(scenario, 10.0, 0.02, rng)
    p = rng.uniform(0.2, 0.8, size=(25, 4)) * radio.p_max_mw
    cell, user = _stable_link(scenario, channel, PowerAllocation(p, radio.p_max_mw))

    critic = MlpNetwork.build([i_c, 64, 1], head="linear", rng=rng)
    actor = MlpNetwork.build([8, 16, 1], head="scaled_sigmoid", rng=rng, output_scale=radio.p_max_mw)
    state = rng.normal(size=(1, 8))

    def critic_input(power: float):
        q = p.copy()
        q[cell, user] = power
        return critic_state(scenario, channel, PowerAllocation(q, radio.p_max_mw), cell, user, i_c)

    def composite(power: float) -> float:
        cs, _ = critic_input(power)
        return float(critic.predict(cs.rates[None, :])[0, 0])

    base_power = float(actor.predict(state)[0, 0])
    base_state, base_jac = critic_input(base_power)
    dq_dp = float(chained_action_gradient(critic, base_state.rates[None, :], base_jac[None, :])[0])

    # dQ/dp の中心差分（順序が変わらない幅まで縮める）
    h = 1e-4 * min(base_power, radio.p_max_mw - base_power)
    order_stable = False
    for _ in range(8):
        plus_state, _ = critic_input(base_power + h)
        minus_state, _ = critic_input(base_power - h)
        if np.array_equal(plus_state.permutation, base_state.permutation) and np.array_equal(
            minus_state.permutation, base_state.permutation
        ):
            order_stable = True
            break
        h /= 10.0
    numeric_dq_dp = (composite(base_power + h) - composite(base_power - h)) / (2.0 * h)
    action_error = relative_error(dq_dp, numeric_dq_dp)

    # アクターのパラメータまで連鎖させた勾配
    actor.forward(state)
    analytic = actor.backward(np.array([[dq_dp]])).flat()
    numeric = []
    step = 1e-5
    for layer in actor.layers:
        for param in (layer.weight, layer.bias):
            for idx in np.ndindex(param.shape):
                original = param[idx]
                param[idx] = original + step
                plus = composite(float(actor.predict(state)[0, 0]))
                param[idx] = original - step
                minus = composite(float(actor.predict(state)[0, 0]))
                param[idx] = original
                numeric.append((plus - minus) / (2.0 * step))
    actor_error = relative_error(analytic, np.array(numeric))
    worst = max(action_error, actor_error)
    return CheckResult(
        "ddpg_chain_finite_difference",
        order_stable and worst <= CHAIN_TOLERANCE,
        {
            "link": [cell, user],
            "action_relative_error": action_error,
            "actor_relative_error": actor_error,
            "order_stable": order_stable,
            "tolerance": CHAIN_TOLERANCE,
        },
    )


def jakes_scenario(seed: int = JAKES_SCENARIO_SEED) -> NetworkScenario:
    """自己相関の測定に使う 25 セル × 1 AP のシナリオ（β は h の統計に影響しない）"""
    return build_scenario(25, 1, 0.01, 1.0, 8.0, seed)


def simulate_autocorrelation(
    scenario: NetworkScenario,
    channel: ChannelState,
    n_samples: int,
    rng: np.random.Generator,
):
    """
    step_channel でチャネルを進め、全リンクを合わせた Re(h) のラグ1自己相関と E|h|^2 を返す

    ラグ1の組が n_samples 個以上になるまでスロットを進める。
    """
    n_steps = max(1, math.ceil(n_samples / channel.h.size))
    history = [np.ravel(channel.h)]
    for _ in range(n_steps):
        channel = step_channel(channel, rng, scenario)
        history.append(np.ravel(channel.h))
    h = np.stack(history)
    x = h.real
    lag1 = float(np.mean(x[1:] * x[:-1]) / np.mean(x * x))
    return lag1, float(np.mean(np.abs(h) ** 2))


def check_jakes(rng: np.random.Generator, n_samples: int = 100_000) -> CheckResult:
    """f_d = 10 Hz, T_s = 20 ms の相関係数と、チャネルモデルで測ったラグ1自己相関を比較する"""
    x = 2.0 * math.pi * 10.0 * 0.02
    scenario = jakes_scenario()
    channel = init_channel(scenario, 10.0, 0.02, rng)
    rho = channel.rho
    oracle = j0_series(x)
    lag1, power = simulate_autocorrelation(scenario, channel, n_samples, rng)
    passed = (
        abs(rho - oracle) <= 1e-4
        and abs(lag1 - oracle) <= JAKES_TOLERANCE
        and abs(power - 1.0) <= POWER_TOLERANCE
    )
    return CheckResult(
        "jakes_correlation",
        passed,
        {
            "rho": rho,
            "rho_series": oracle,
            "rho_reference": JAKES_REFERENCE,
            "rho_hat": lag1,
            "mean_power": power,
            "samples": n_samples,
        },
    )


def check_theorem(rng: np.random.Generator, count: int = 100) -> CheckResult:
    """行動非依存の遷移を持つランダム MDP で貪欲方策が最適であること、反例が棄却されることを確認する"""
    results = check_many(rng, count)
    n_holds = sum(1 for r in results if r.holds)
    trap = verify_greedy_optimality(trap_counterexample())
    trap_rejected = (not trap.hypothesis_holds) and (not trap.greedy_is_optimal)
    return CheckResult(
        "single_step_decomposition",
        n_holds == count and trap_rejected,
        {
            "random_mdps": count,
            "greedy_optimal": n_holds,
            "counterexample_rejected": trap_rejected,
            "counterexample_greedy": trap.greedy_value,
            "counterexample_optimum": trap.optimal_value,
        },
    )


def check_reward_proportionality(rng: np.random.Generator, alpha: float = 1.0) -> CheckResult:
    """対称トーラス上で Σ r = c·C（c は重複回数の数え上げ）が成り立つことを確認する"""
    radio = RadioConfig()
    scenario = build_scenario(25, 4, 0.01, 1.0, 8.0, int(rng.integers(2**31)), radio=radio)
    channel = init_channel(scenario, 10.0, 0.02, rng)
    alloc = PowerAllocation(rng.uniform(0.0, radio.p_max_mw, size=(25, 4)), radio.p_max_mw)
    rates = evaluate_allocation(scenario, channel, alloc)
    total_reward = float(local_rewards(scenario, rates, alpha).sum())
    weights = reward_multiplicity(scenario, alpha)
    c = float(weights[0, 0])
    uniform = bool(np.allclose(weights, c, rtol=1e-12, atol=0.0))
    expected = c * rates.sum_rate
    error = abs(total_reward - expected) / abs(expected)
    return CheckResult(
        "reward_proportionality",
        uniform and error <= PROPORTIONALITY_TOLERANCE,
        {"multiplicity": c, "uniform": uniform, "relative_error": error},
    )


def check_exact_constants() -> CheckResult:
    """特徴量次元・行動レベル・ε スケジュールの端点"""
    radio = RadioConfig()
    codec = discrete_codec(radio, 10)
    levels_dbm = 10.0 * np.log10(codec.levels[1:])
    spacing = level_spacing_db(codec)
    measured = {
        "f1_dim": feature_dim(16, "f1"),
        "f2_dim": feature_dim(16, "f2"),
        "zero_level_mw": float(codec.levels[0]),
        "min_level_dbm": float(levels_dbm[0]),
        "max_level_dbm": float(levels_dbm[-1]),
        "level_spacing_db": spacing,
        "epsilon_first": epsilon_schedule(1, 5000),
        "epsilon_last": epsilon_schedule(5000, 5000),
    }
    passed = (
        measured["f1_dim"] == 32
        and measured["f2_dim"] == 48
        and measured["zero_level_mw"] == 0.0
        and abs(measured["min_level_dbm"] - 5.0) <= 1e-9
        and abs(measured["max_level_dbm"] - 38.0) <= 1e-9
        and abs(spacing - 33.0 / 8.0) <= 1e-12
        and np.allclose(np.diff(levels_dbm), spacing, rtol=0.0, atol=1e-9)
        and math.isclose(measured["epsilon_first"], EPSILON_FIRST)
        and math.isclose(measured["epsilon_last"], EPSILON_LAST)
    )
    return CheckResult("feature_and_codec_constants", bool(passed), measured)


class VerificationService:
    """全検査を実行してレポートを作るクラス"""

    def __init__(
        self,
        seed: int = 0,
        logger: Optional[logging.Logger] = None,
        backward_fn: BackwardFn = analytic_backward,
    ):
        self.seed = seed
        self.logger = logger or logging.getLogger(__name__)
        self.backward_fn = backward_fn

    def run(self) -> VerificationReport:
        checks = [
            ("gradient", lambda rng: check_gradients(rng, backward_fn=self.backward_fn)),
            ("ddpg_chain", check_ddpg_chain),
            ("jakes", check_jakes),
            ("theorem", check_theorem),
            ("proportionality", check_reward_proportionality),
            ("constants", lambda rng: check_exact_constants()),
        ]
        report = VerificationReport()
        for index, (label, check) in enumerate(checks):
            started = time.perf_counter()
            result = check(make_rng([self.seed, index]))
            result.elapsed_sec = time.perf_counter() - started
            level = logging.INFO if result.passed else logging.ERROR
            self.logger.log(
                level,
                f"検証 {result.name}: {'OK' if result.passed else 'NG'} {result.measured}",
            )
            report.checks.append(result)
        return report


def run_verification(
    seed: int = 0,
    logger: Optional[logging.Logger] = None,
    backward_fn: BackwardFn = analytic_backward,
) -> VerificationReport:
    return VerificationService(seed, logger, backward_fn).run()
