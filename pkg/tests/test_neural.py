"""
多層パーセプトロン・最適化のテスト
"""

import numpy as np
import pytest

from core.neural import (
    DenseLayer,
    MlpNetwork,
    adam_step,
    log_softmax,
    numerical_gradients,
    relative_error,
    sgd_step,
    softmax,
)
from utils.errors import CheckpointError, ShapeError


@pytest.mark.parametrize("head,scale", [("linear", 1.0), ("softmax", 1.0), ("scaled_sigmoid", 10.0)])
def test_backward_matches_finite_difference(rng, head, scale):
    net = MlpNetwork.build([5, 7, 6, 3], head=head, rng=rng, output_scale=scale)
    for layer in net.layers:
        layer.bias[:] = rng.normal(0.0, 0.1, layer.bias.shape)
    x = rng.normal(size=(4, 5))
    u = rng.normal(size=(4, 3))
    net.forward(x)
    analytic = net.backward(u)
    numeric = numerical_gradients(net, x, u)
    np.testing.assert_allclose(analytic.flat(), numeric.flat(), rtol=1e-4, atol=1e-8)
    np.testing.assert_allclose(analytic.input_grad, numeric.input_grad, rtol=1e-4, atol=1e-8)


def test_single_vector_input_shapes(rng):
    net = MlpNetwork.build([3, 4, 2], rng=rng)
    out = net.forward(np.ones(3))
    assert out.shape == (2,)
    tape = net.backward(np.ones(2))
    assert tape.input_grad.shape == (3,)


def test_softmax_output_is_distribution(rng):
    net = MlpNetwork.build([4, 8, 5], head="softmax", rng=rng)
    probs = net.predict(rng.normal(size=(10, 4)))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert np.all(probs > 0.0)


def test_log_softmax_is_stable():
    z = np.array([[1000.0, 0.0, -1000.0]])
    assert np.all(np.isfinite(log_softmax(z)))
    np.testing.assert_allclose(np.exp(log_softmax(z)), softmax(z))


def test_scaled_sigmoid_bounds(rng):
    net = MlpNetwork.build([2, 4, 1], head="scaled_sigmoid", rng=rng, output_scale=6309.6)
    out = net.predict(rng.normal(scale=100.0, size=(50, 2)))
    assert np.all(out >= 0.0) and np.all(out <= 6309.6)


def test_input_dimension_checked(rng):
    net = MlpNetwork.build([3, 2], rng=rng)
    with pytest.raises(ShapeError):
        net.predict(np.ones(4))


def test_softmax_only_allowed_at_head():
    hidden = DenseLayer(np.ones((2, 2)), np.zeros(2), "softmax")
    head = DenseLayer(np.ones((1, 2)), np.zeros(1), "linear")
    with pytest.raises(ShapeError):
        MlpNetwork([hidden, head])


def test_backward_before_forward(rng):
    net = MlpNetwork.build([2, 1], rng=rng)
    with pytest.raises(ShapeError):
        net.backward(np.ones(1))


def test_predict_does_not_touch_forward_cache(rng):
    net = MlpNetwork.build([3, 4, 1], rng=rng)
    x = rng.normal(size=(2, 3))
    net.forward(x)
    before = net.backward(np.ones((2, 1))).flat()
    net.predict(rng.normal(size=(5, 3)))
    after = net.backward(np.ones((2, 1))).flat()
    np.testing.assert_array_equal(before, after)


def test_sgd_step_on_linear_unit():
    # Q(x) = w x + b, L = ½ (Q - r)^2
    net = MlpNetwork([DenseLayer(np.array([[0.5]]), np.array([0.0]), "linear")])
    x, r, lr = 2.0, 3.0, 0.1
    q = net.forward(np.array([x]))[0]
    tape = net.backward(np.array([q - r]))
    sgd_step(net, tape, lr)
    assert net.layers[0].weight[0, 0] == pytest.approx(0.5 - lr * (q - r) * x)
    assert net.layers[0].bias[0] == pytest.approx(-lr * (q - r))


def test_adam_first_step_moves_by_learning_rate():
    net = MlpNetwork([DenseLayer(np.array([[1.0, -1.0]]), np.array([0.0]), "linear")])
    net.forward(np.array([1.0, 2.0]))
    tape = net.backward(np.array([1.0]))
    adam_step(net, tape, 1e-3)
    # バイアス補正後の最初の更新量は lr * sign(grad)
    np.testing.assert_allclose(net.layers[0].weight, [[1.0 - 1e-3, -1.0 - 1e-3]], rtol=1e-6)
    assert net.adam_state.step == 1


def test_adam_reduces_loss(rng):
    net = MlpNetwork.build([2, 8, 1], rng=rng)
    x = rng.normal(size=(32, 2))
    y = (x[:, 0] - 2 * x[:, 1])[:, None]
    first = float(np.mean((net.predict(x) - y) ** 2))
    for _ in range(300):
        out = net.forward(x)
        adam_step(net, net.backward(out - y), 1e-2)
    assert float(np.mean((net.predict(x) - y) ** 2)) < 0.5 * first


def test_checkpoint_round_trip(tmp_path, rng):
    net = MlpNetwork.build([3, 5, 2], head="softmax", rng=rng)
    net.forward(np.ones(3))
    adam_step(net, net.backward(np.ones(2)), 1e-3)
    loaded = MlpNetwork.load(net.save(tmp_path / "net.json"))
    x = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(loaded.predict(x), net.predict(x))
    assert loaded.adam_state.step == 1


def test_checkpoint_version_checked():
    with pytest.raises(CheckpointError):
        MlpNetwork.from_dict({"format_version": 99, "layers": []})


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        MlpNetwork.load(tmp_path / "none.json")


def test_copy_is_independent(rng):
    net = MlpNetwork.build([2, 3, 1], rng=rng)
    clone = net.copy()
    clone.layers[0].weight += 1.0
    assert not np.array_equal(clone.layers[0].weight, net.layers[0].weight)


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([1e-9])) < 1e-2
    assert relative_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 2.1)
