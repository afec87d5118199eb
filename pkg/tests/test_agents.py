"""
REINFORCE / DQL / DDPG エージェントのテスト
"""

import math

import numpy as np
import pytest

from core.neural import DenseLayer, MlpNetwork
from models.agent_models import AgentSettings, TransitionBatch
from models.network_models import PowerAllocation, RadioConfig
from services.agents import create_agent, load_agent
from services.agents.base import read_checkpoint
from services.agents.ddpg import (
    chained_action_gradient,
    critic_state,
    critic_state_matrix,
    ddpg_act,
    ddpg_update,
    exploration_bound,
)
from services.agents.dql import dql_select, dql_update, epsilon_schedule
from services.agents.factory import parameter_fingerprint
from services.agents.reinforce import reinforce_select, reinforce_update, whiten_rewards
from utils.errors import CheckpointError

SMALL = dict(i_c=4, hidden=(8,), critic_hidden=(6,), n_episodes=10)


def _settings(kind, feature_kind="f2", **kwargs):
    return AgentSettings(kind=kind, feature_kind=feature_kind, **{**SMALL, **kwargs})


def _batch(rng, agent, n=16):
    states = rng.normal(size=(n, agent.input_dim))
    powers, actions = agent.act(states, rng, explore=True)
    return TransitionBatch(states=states, actions=np.asarray(actions), rewards=rng.normal(size=n))


# --- 共通 ---


@pytest.mark.parametrize("kind", ["reinforce", "dql", "ddpg"])
def test_act_returns_powers_in_range(rng, kind):
    agent = create_agent(_settings(kind), RadioConfig(), seed=0)
    powers, _ = agent.act(rng.normal(size=(20, agent.input_dim)), rng, explore=True)
    assert powers.shape == (20,)
    assert np.all(powers >= 0.0) and np.all(powers <= RadioConfig().p_max_mw)


@pytest.mark.parametrize("kind", ["reinforce", "dql", "ddpg"])
def test_checkpoint_round_trip(tmp_path, rng, kind):
    agent = create_agent(_settings(kind, feature_kind="f1"), RadioConfig(), seed=4)
    agent.start_episode(7)
    loaded = load_agent(agent.save(tmp_path / "agent.json"))
    states = rng.normal(size=(5, agent.input_dim))
    np.testing.assert_array_equal(loaded.act(states)[0], agent.act(states)[0])
    assert loaded.episode == 7
    assert loaded.feature_kind == "f1"
    assert parameter_fingerprint(loaded) == parameter_fingerprint(agent)


def test_checkpoint_version_checked(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 42}', encoding="utf-8")
    with pytest.raises(CheckpointError):
        read_checkpoint(path)


def test_same_seed_same_initial_parameters():
    a = create_agent(_settings("ddpg"), RadioConfig(), seed=9)
    b = create_agent(_settings("ddpg"), RadioConfig(), seed=9)
    assert parameter_fingerprint(a) == parameter_fingerprint(b)


def test_frozen_copy_is_independent(rng):
    agent = create_agent(_settings("dql"), RadioConfig(), seed=1)
    frozen = agent.frozen_copy()
    agent.update(_batch(rng, agent))
    assert parameter_fingerprint(frozen) != parameter_fingerprint(agent)


def test_decide_single_link(rng):
    agent = create_agent(_settings("ddpg"), RadioConfig(), seed=1)
    state = rng.normal(size=agent.input_dim)
    assert agent.decide(state) == pytest.approx(agent.act(state[None, :])[0][0])


# --- REINFORCE ---


def test_whiten_rewards():
    w = whiten_rewards([1.0, 2.0, 3.0])
    assert w.mean() == pytest.approx(0.0)
    assert w.std() == pytest.approx(1.0)
    np.testing.assert_array_equal(whiten_rewards([2.0, 2.0]), [0.0, 0.0])


def test_reinforce_increases_probability_of_rewarded_action(rng):
    net = MlpNetwork.build([3, 8, 4], head="softmax", rng=rng)
    states = np.tile(rng.normal(size=3), (8, 1))
    actions = np.array([0, 1, 2, 3, 0, 1, 2, 3])
    rewards = np.array([1.0, 0, 0, 0, 1.0, 0, 0, 0])
    before = net.predict(states[:1])[0, 0]
    for _ in range(20):
        reinforce_update(net, TransitionBatch(states, actions, rewards), 1e-2)
    assert net.predict(states[:1])[0, 0] > before


def test_reinforce_bandit_converges_to_rewarded_action():
    # 1層 softmax、固定状態、報酬 (1, 0)
    net = MlpNetwork([DenseLayer(np.zeros((2, 1)), np.zeros(2), "softmax")])
    batch = TransitionBatch(np.ones((2, 1)), np.array([0, 1]), np.array([1.0, 0.0]))
    for _ in range(300):
        reinforce_update(net, batch, 5e-2)
    assert net.predict(np.ones((1, 1)))[0, 0] > 0.999


def test_reinforce_skips_constant_rewards(rng):
    net = MlpNetwork.build([3, 4], head="softmax", rng=rng)
    result = reinforce_update(net, TransitionBatch(np.ones((3, 3)), np.zeros(3, int), np.ones(3)), 1e-2)
    assert result.skipped


def test_reinforce_sampling_follows_policy(rng):
    net = MlpNetwork([DenseLayer(np.zeros((3, 1)), np.log([0.7, 0.2, 0.1]), "softmax")])
    actions = reinforce_select(net, np.zeros((20_000, 1)), rng)
    freq = np.bincount(actions, minlength=3) / len(actions)
    np.testing.assert_allclose(freq, [0.7, 0.2, 0.1], atol=0.02)
    assert np.all(reinforce_select(net, np.zeros((3, 1)), greedy=True) == 0)


def test_reinforce_sequential_whitens_whole_slot(rng):
    agent = create_agent(_settings("reinforce"), RadioConfig(), seed=2)
    results = agent.sequential_updates(_batch(rng, agent, n=6))
    assert len(results) == 6
    assert any(not r.skipped for r in results)


# --- DQL ---


def test_epsilon_schedule_endpoints():
    assert epsilon_schedule(1, 5000) == pytest.approx(0.2)
    assert epsilon_schedule(5000, 5000) == pytest.approx(1e-4)
    assert epsilon_schedule(2500, 5000) == pytest.approx(0.2 + 2499 / 4999 * (1e-4 - 0.2))
    assert epsilon_schedule(1, 1) == pytest.approx(0.2)


def test_epsilon_greedy_exploration_rate(rng):
    net = MlpNetwork([DenseLayer(np.zeros((5, 1)), np.array([0, 0, 9.0, 0, 0]), "linear")])
    actions = dql_select(net, np.zeros((20_000, 1)), 0.5, rng)
    # 探索 50% のうち 1/5 は argmax と一致する
    assert np.mean(actions == 2) == pytest.approx(0.5 + 0.5 / 5, abs=0.02)
    assert np.all(dql_select(net, np.zeros((5, 1)), 0.0, rng) == 2)
    with pytest.raises(ValueError):
        dql_select(net, np.zeros((1, 1)), 1.5, rng)


def test_dql_sgd_step_closed_form():
    # 線形1ユニット Q(s) = w s、1サンプル: w' = w - η (Q - r) s
    net = MlpNetwork([DenseLayer(np.array([[0.5]]), np.array([0.0]), "linear")])
    batch = TransitionBatch(np.array([[2.0]]), np.array([0]), np.array([3.0]))
    result = dql_update(net, batch, 0.1, optimizer="sgd")
    assert result.loss == pytest.approx(0.5 * (1.0 - 3.0) ** 2)
    assert net.layers[0].weight[0, 0] == pytest.approx(0.5 - 0.1 * (1.0 - 3.0) * 2.0)


def test_dql_regresses_to_reward_table(rng):
    # one-hot 状態 4 個 × 行動 3 個の表をすべて学習させる
    n_states, n_actions = 4, 3
    table = rng.uniform(-1.0, 2.0, size=(n_states, n_actions))
    states = np.repeat(np.eye(n_states), n_actions, axis=0)
    actions = np.tile(np.arange(n_actions), n_states)
    rewards = table.reshape(-1)
    net = MlpNetwork([DenseLayer(np.zeros((n_actions, n_states)), np.zeros(n_actions), "linear")])
    batch = TransitionBatch(states, actions, rewards)
    for _ in range(300):
        dql_update(net, batch, 0.1, optimizer="sgd")
    q = net.predict(np.eye(n_states))
    assert np.max(np.abs(q - table)) < 1e-3
    assert dql_update(net, batch, 0.1, optimizer="sgd").loss < 1e-6


def test_dql_only_updates_taken_action():
    net = MlpNetwork([DenseLayer(np.zeros((3, 1)), np.zeros(3), "linear")])
    dql_update(net, TransitionBatch(np.ones((1, 1)), np.array([1]), np.array([1.0])), 0.1, "sgd")
    q = net.predict(np.ones((1, 1)))[0]
    assert q[1] > 0.0
    assert q[0] == 0.0 and q[2] == 0.0


def test_dql_aborts_on_non_finite(rng):
    net = MlpNetwork.build([2, 3], rng=rng)
    before = net.copy()
    result = dql_update(net, TransitionBatch(np.ones((1, 2)), np.array([0]), np.array([np.inf])), 0.1)
    assert result.aborted
    np.testing.assert_array_equal(net.layers[0].weight, before.layers[0].weight)


# --- DDPG ---


def test_exploration_bound_shrinks():
    assert exploration_bound(100.0, 1) == 100.0
    assert exploration_bound(100.0, 4) == 25.0
    with pytest.raises(ValueError):
        exploration_bound(100.0, 0)


def test_ddpg_noise_is_clipped(rng):
    actor = MlpNetwork.build([2, 4, 1], head="scaled_sigmoid", rng=rng, output_scale=10.0)
    states = rng.normal(size=(500, 2))
    clean = ddpg_act(actor, states, 1, rng, explore=False)
    noisy = ddpg_act(actor, states, 1, rng, explore=True)
    assert np.all((noisy >= 0.0) & (noisy <= 10.0))
    assert not np.allclose(clean, noisy)
    later = ddpg_act(actor, states, 100, rng, explore=True)
    assert np.max(np.abs(later - clean)) <= 0.1 + 1e-12


def test_critic_state_sorted_with_frozen_jacobian(torus_scenario, torus_channel, rng):
    p_max = torus_scenario.radio.p_max_mw
    alloc = PowerAllocation(rng.uniform(0, p_max, (25, 4)), p_max)
    state, jac = critic_state(torus_scenario, torus_channel, alloc, 3, 1, 16)
    assert state.rates.shape == (16,) and jac.shape == (16,)
    assert np.all(np.diff(state.rates) <= 0.0)
    own = [i for i, (c, u) in enumerate(state.links) if (c, u) == (3, 1)]
    for i, (c, u) in enumerate(state.links):
        if i not in own:
            assert jac[i] <= 0.0


def test_critic_state_pads_at_end(toy_scenario, toy_channel):
    alloc = PowerAllocation(np.ones((2, 1)), toy_scenario.radio.p_max_mw)
    state, jac = critic_state(toy_scenario, toy_channel, alloc, 0, 0, 4)
    np.testing.assert_array_equal(state.rates[2:], [0.0, 0.0])
    np.testing.assert_array_equal(jac[2:], [0.0, 0.0])
    np.testing.assert_array_equal(state.permutation[2:], [-1, -1])


def test_critic_matrix_rows(torus_scenario, torus_channel):
    alloc = PowerAllocation.full(torus_scenario, 100.0)
    inputs, jacobians = critic_state_matrix(torus_scenario, torus_channel, alloc, 16)
    state, jac = critic_state(torus_scenario, torus_channel, alloc, 2, 3, 16)
    np.testing.assert_allclose(inputs[2 * 4 + 3], state.rates)
    np.testing.assert_allclose(jacobians[2 * 4 + 3], jac)


def test_chained_gradient_of_linear_critic(rng):
    critic = MlpNetwork([DenseLayer(np.array([[1.0, 2.0, 3.0]]), np.zeros(1), "linear")])
    jac = np.array([[0.5, -1.0, 0.0]])
    grad = chained_action_gradient(critic, rng.normal(size=(1, 3)), jac)
    assert grad[0] == pytest.approx(0.5 - 2.0)


def test_ddpg_update_moves_critic_toward_reward(rng):
    agent = create_agent(_settings("ddpg"), RadioConfig(), seed=5)
    critic_inputs = rng.uniform(0, 3, size=(32, 4))
    batch = TransitionBatch(
        states=rng.normal(size=(32, agent.input_dim)),
        actions=np.zeros(32),
        rewards=critic_inputs.sum(axis=1),
        critic_states=critic_inputs,
        jacobians=rng.normal(scale=1e-4, size=(32, 4)),
    )
    first = agent.update(batch).critic_loss
    for _ in range(200):
        last = agent.update(batch).critic_loss
    assert last < first


def test_ddpg_requires_critic_inputs(rng):
    agent = create_agent(_settings("ddpg"), RadioConfig(), seed=5)
    with pytest.raises(ValueError):
        agent.update(_batch(rng, agent))


def test_ddpg_aborts_on_non_finite_reward(rng):
    actor = MlpNetwork.build([2, 3, 1], head="scaled_sigmoid", rng=rng, output_scale=10.0)
    critic = MlpNetwork.build([2, 3, 1], rng=rng)
    batch = TransitionBatch(
        states=np.ones((1, 2)),
        actions=np.zeros(1),
        rewards=np.array([math.nan]),
        critic_states=np.ones((1, 2)),
        jacobians=np.ones((1, 2)),
    )
    result = ddpg_update(actor, critic, batch, 1e-4, 1e-3)
    assert result.aborted
    assert critic.adam_state.step == 0 and actor.adam_state.step == 0


def test_ddpg_exact_critic_keeps_critic_and_moves_actor(rng):
    critic = MlpNetwork([DenseLayer(np.array([[1.0, 2.0]]), np.array([0.5]), "linear")])
    actor = MlpNetwork.build([2, 3, 1], head="scaled_sigmoid", rng=rng, output_scale=10.0)
    actor_before = actor.copy()
    inputs = np.array([[1.0, 2.0], [3.0, 1.0]])
    batch = TransitionBatch(
        states=rng.normal(size=(2, 2)),
        actions=np.zeros(2),
        rewards=np.array([5.5, 5.5]),
        critic_states=inputs,
        jacobians=np.ones((2, 2)),
    )
    result = ddpg_update(actor, critic, batch, 1e-2, 1e-2)
    assert result.critic_loss == 0.0
    np.testing.assert_array_equal(critic.layers[0].weight, [[1.0, 2.0]])
    np.testing.assert_array_equal(critic.layers[0].bias, [0.5])
    assert actor.adam_state.step == 1
    assert not np.allclose(actor.layers[-1].weight, actor_before.layers[-1].weight)


def test_ddpg_actor_step_evaluated_at_noise_free_point(rng):
    actor = MlpNetwork.build([3, 4, 1], head="scaled_sigmoid", rng=rng, output_scale=10.0)
    critic = MlpNetwork.build([2, 5, 1], rng=rng)
    n = 8
    states = rng.normal(size=(n, 3))
    executed = rng.uniform(0.0, 3.0, size=(n, 2))
    noise_free = rng.uniform(0.0, 3.0, size=(n, 2))
    jac_executed = rng.normal(size=(n, 2))
    jac_noise_free = rng.normal(size=(n, 2))
    rewards = rng.normal(size=n)

    def run(batch):
        a, c = actor.copy(), critic.copy()
        ddpg_update(a, c, batch, 1e-2, 1e-2)
        return a, c

    both, critic_a = run(
        TransitionBatch(
            states, np.zeros(n), rewards, executed, jac_executed, noise_free, jac_noise_free
        )
    )
    other_jac, critic_b = run(
        TransitionBatch(
            states, np.zeros(n), rewards, executed, np.zeros((n, 2)), noise_free, jac_noise_free
        )
    )
    executed_only, _ = run(TransitionBatch(states, np.zeros(n), rewards, executed, jac_executed))

    # クリティックの回帰は実行した電力の入力だけで決まる
    for la, lb in zip(critic_a.layers, critic_b.layers):
        np.testing.assert_array_equal(la.weight, lb.weight)
    # アクターの更新は雑音なしの評価点だけで決まる
    for la, lb in zip(both.layers, other_jac.layers):
        np.testing.assert_array_equal(la.weight, lb.weight)
    assert not all(
        np.allclose(la.weight, lb.weight) for la, lb in zip(both.layers, executed_only.layers)
    )


def test_actor_point_falls_back_to_executed_inputs():
    batch = TransitionBatch(np.ones((1, 2)), np.zeros(1), np.ones(1), np.ones((1, 2)), np.zeros((1, 2)))
    inputs, jacobians = batch.actor_point()
    assert inputs is batch.critic_states and jacobians is batch.jacobians
    full = TransitionBatch(
        states=np.ones((2, 2)),
        actions=np.zeros(2),
        rewards=np.ones(2),
        critic_states=np.ones((2, 2)),
        jacobians=np.ones((2, 2)),
        actor_critic_states=np.full((2, 2), 3.0),
        actor_jacobians=np.full((2, 2), 4.0),
    )
    sub = full.subset([1])
    np.testing.assert_array_equal(sub.actor_point()[0], [[3.0, 3.0]])
    np.testing.assert_array_equal(sub.with_rewards([7.0]).actor_point()[1], [[4.0, 4.0]])
