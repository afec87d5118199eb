"""
経験再生バッファのテスト
"""

import numpy as np
import pytest

from models.agent_models import Transition, TransitionBatch
from services.agents.replay import ReplayBuffer
from utils.errors import ReplayError


def _t(i):
    return Transition(state=np.array([float(i)]), action=i % 3, reward=float(i))


def test_ring_overwrites_oldest():
    buffer = ReplayBuffer(capacity=3)
    buffer.extend(_t(i) for i in range(5))
    assert len(buffer) == 3
    assert buffer.cursor == 2
    assert [t.reward for t in buffer.contents()] == [2.0, 3.0, 4.0]


def test_sample_without_replacement(rng):
    buffer = ReplayBuffer(capacity=10)
    buffer.extend(_t(i) for i in range(10))
    sample = buffer.sample(10, rng)
    assert sorted(t.reward for t in sample) == [float(i) for i in range(10)]


def test_sample_errors(rng):
    buffer = ReplayBuffer(capacity=4)
    buffer.push(_t(0))
    with pytest.raises(ReplayError):
        buffer.sample(2, rng)
    with pytest.raises(ReplayError):
        buffer.sample(0, rng)
    with pytest.raises(ReplayError):
        ReplayBuffer(capacity=0)


def test_batch_conversion():
    batch = TransitionBatch.from_transitions([_t(1), _t(2)])
    assert batch.states.shape == (2, 1)
    np.testing.assert_array_equal(batch.rewards, [1.0, 2.0])
    assert batch.critic_states is None
    assert [t.reward for t in batch.to_transitions()] == [1.0, 2.0]
