"""
環境追従機構のテスト
"""

import pytest

from services.tracking import TrackingController, TrackingDecision, tracking_step
from utils.errors import TrackingError


def test_zero_prediction_gives_half():
    # Q ≡ 0, r ≡ 1 なら l_c = 1/2
    controller = TrackingController(window=10, threshold=0.05)
    controller.observe([0.0] * 10, [1.0] * 10)
    assert controller.loss() == pytest.approx(0.5)
    assert controller.decide() is TrackingDecision.TRAIN


def test_perfect_prediction_skips():
    controller = TrackingController(window=5, threshold=0.05)
    assert tracking_step(controller, [2.0, 3.0], [2.0, 3.0]) is TrackingDecision.SKIP
    assert controller.last_loss == pytest.approx(0.0)


def test_threshold_is_strict():
    controller = TrackingController(window=1, threshold=0.5)
    controller.observe([0.0], [1.0])
    assert controller.decide() is TrackingDecision.SKIP


def test_window_keeps_latest_pairs():
    controller = TrackingController(window=2, threshold=0.05)
    controller.observe([0.0, 0.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0])
    assert len(controller) == 2
    assert controller.loss() == pytest.approx(0.0)


def test_tiny_rewards_are_excluded():
    controller = TrackingController(window=5)
    assert controller.observe([1.0, 1.0], [0.0, 1e-9]) == 0
    with pytest.raises(TrackingError):
        controller.loss()


def test_reset_and_invalid_arguments():
    controller = TrackingController(window=3)
    controller.observe([1.0], [2.0])
    controller.decide()
    controller.reset()
    assert len(controller) == 0 and controller.last_loss is None
    with pytest.raises(TrackingError):
        TrackingController(window=0)
    with pytest.raises(TrackingError):
        TrackingController(threshold=-1.0)
