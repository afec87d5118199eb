"""
ニューラルネットワークモジュール

numpy による小規模な全結合ネットワーク（順伝播・誤差逆伝播・Adam/SGD）と
JSON チェックポイントを提供します。すべて float64 で計算します。
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from utils.errors import CheckpointError, ShapeError

logger = logging.getLogger(__name__)

NETWORK_FORMAT_VERSION = 1
ACTIVATIONS = ("relu", "linear", "softmax", "scaled_sigmoid")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def sigmoid(x):
    """数値的に安定なシグモイド"""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def log_softmax(z: np.ndarray) -> np.ndarray:
    """最大値シフト付き log-sum-exp による ln softmax（最終軸）"""
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


@dataclass
class DenseLayer:
    """全結合層 y = act(W x + b)。W は (出力次元, 入力次元)"""

    weight: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=float)
        self.bias = np.array(self.bias, dtype=float)
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"未対応の活性化関数です: {self.activation}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"重みとバイアスの形状が一致しません: {self.weight.shape}, {self.bias.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class AdamState:
    """Adam の1次・2次モーメントとステップ数"""

    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0


@dataclass
class GradientTape:
    """
    パラメータ勾配と入力勾配

    weight_grads[i], bias_grads[i] は layers[i] の形状と一致する。
    input_grad はバッチ入力の場合 (B, 入力次元)。
    """

    weight_grads: List[np.ndarray]
    bias_grads: List[np.ndarray]
    input_grad: np.ndarray

    def scaled(self, factor: float) -> "GradientTape":
        return GradientTape(
            weight_grads=[g * factor for g in self.weight_grads],
            bias_grads=[g * factor for g in self.bias_grads],
            input_grad=self.input_grad * factor,
        )

    def add(self, other: "GradientTape") -> "GradientTape":
        """パラメータ勾配の和（入力勾配は自身のものを保持）"""
        return GradientTape(
            weight_grads=[a + b for a, b in zip(self.weight_grads, other.weight_grads)],
            bias_grads=[a + b for a, b in zip(self.bias_grads, other.bias_grads)],
            input_grad=self.input_grad,
        )

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())) and np.all(np.isfinite(self.input_grad)))


@dataclass
class _ForwardCache:
    inputs: List[np.ndarray] = field(default_factory=list)
    preactivations: List[np.ndarray] = field(default_factory=list)
    outputs: List[np.ndarray] = field(default_factory=list)
    batched: bool = False


class MlpNetwork:
    """
    全結合ネットワーク

    forward は逆伝播用に中間値を保持する。predict は状態を持たないため
    複数スレッドからの同時推論に使用できる。
    """

    def __init__(self, layers: Sequence[DenseLayer], output_scale: float = 1.0):
        layers = list(layers)
        if not layers:
            raise ShapeError("ネットワークには少なくとも1層が必要です")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"層の次元が連結しません: {prev.out_dim} -> {nxt.in_dim}")
        for layer in layers[:-1]:
            if layer.activation in ("softmax", "scaled_sigmoid"):
                raise ShapeError(f"{layer.activation} は出力層でのみ使用できます")
        if output_scale <= 0.0:
            raise ShapeError(f"出力スケールは正の値である必要があります: {output_scale}")
        self.layers = layers
        self.output_scale = float(output_scale)
        self.adam_state = AdamState(
            m=[np.zeros_like(p) for p in self._parameters()],
            v=[np.zeros_like(p) for p in self._parameters()],
        )
        self._cache: Optional[_ForwardCache] = None

    # --- 構築 ---

    @classmethod
    def build(
        cls,
        sizes: Sequence[int],
        head: str = "linear",
        rng: Optional[np.random.Generator] = None,
        hidden_activation: str = "relu",
        output_scale: float = 1.0,
    ) -> "MlpNetwork":
        """
        層サイズ列からネットワークを生成する

        ReLU 層は He-uniform、出力層は Xavier-uniform で初期化し、バイアスは 0 とする。

        Args:
            sizes: [入力次元, 隠れ層..., 出力次元]
            head: 出力層の活性化関数
            rng: 乱数生成器
            hidden_activation: 隠れ層の活性化関数
            output_scale: scaled_sigmoid の上限値

        Returns:
            MlpNetwork: 生成したネットワーク
        """
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ShapeError(f"層サイズが不正です: {list(sizes)}")
        rng = rng or np.random.default_rng()
        layers = []
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            fan_in, fan_out = int(sizes[i]), int(sizes[i + 1])
            is_head = i == n_layers - 1
            activation = head if is_head else hidden_activation
            if activation == "relu":
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            layers.append(DenseLayer(weight, np.zeros(fan_out), activation))
        return cls(layers, output_scale=output_scale)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def head(self) -> str:
        return self.layers[-1].activation

    def _parameters(self) -> List[np.ndarray]:
        params = []
        for layer in self.layers:
            params.append(layer.weight)
            params.append(layer.bias)
        return params

    def parameter_count(self) -> int:
        return sum(p.size for p in self._parameters())

    def copy(self) -> "MlpNetwork":
        """重みと Adam 状態を複製する"""
        clone = MlpNetwork(
            [DenseLayer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
            output_scale=self.output_scale,
        )
        clone.adam_state = AdamState(
            m=[m.copy() for m in self.adam_state.m],
            v=[v.copy() for v in self.adam_state.v],
            step=self.adam_state.step,
        )
        return clone

    # --- 順伝播 ---

    def _activate(self, activation: str, z: np.ndarray) -> np.ndarray:
        if activation == "relu":
            return np.maximum(z, 0.0)
        if activation == "linear":
            return z
        if activation == "softmax":
            return softmax(z)
        return self.output_scale * sigmoid(z)

    def _as_batch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        batch = x[None, :] if x.ndim == 1 else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise ShapeError(f"入力次元が一致しません: {x.shape} (期待値 {self.input_dim})")
        return batch

    def _run(self, x, cache: Optional[_ForwardCache]) -> np.ndarray:
        a = self._as_batch(x)
        for layer in self.layers:
            z = a @ layer.weight.T + layer.bias
            out = self._activate(layer.activation, z)
            if cache is not None:
                cache.inputs.append(a)
                cache.preactivations.append(z)
                cache.outputs.append(out)
            a = out
        return a

    def forward(self, x) -> np.ndarray:
        """
        順伝播を行い、逆伝播用の中間値を保持する

        Args:
            x: 入力ベクトル (入力次元,) またはバッチ (B, 入力次元)

        Returns:
            np.ndarray: 出力（入力と同じバッチ形式）
        """
        x_arr = np.asarray(x, dtype=float)
        cache = _ForwardCache(batched=x_arr.ndim == 2)
        out = self._run(x_arr, cache)
        self._cache = cache
        return out if cache.batched else out[0]

    def predict(self, x) -> np.ndarray:
        """中間値を保持しない推論"""
        x_arr = np.asarray(x, dtype=float)
        out = self._run(x_arr, None)
        return out if x_arr.ndim == 2 else out[0]

    def predict_preactivation(self, x) -> np.ndarray:
        """出力層の活性化前の値（softmax のロジットなど）を返す"""
        a = self._as_batch(x)
        for layer in self.layers[:-1]:
            a = self._activate(layer.activation, a @ layer.weight.T + layer.bias)
        head = self.layers[-1]
        z = a @ head.weight.T + head.bias
        return z if np.asarray(x).ndim == 2 else z[0]

    @property
    def last_preactivation(self) -> np.ndarray:
        if self._cache is None:
            raise ShapeError("forward が呼ばれていません")
        z = self._cache.preactivations[-1]
        return z if self._cache.batched else z[0]

    # --- 逆伝播 ---

    def _head_backward(self, grad: np.ndarray, z: np.ndarray, out: np.ndarray) -> np.ndarray:
        activation = self.layers[-1].activation
        if activation == "linear":
            return grad
        if activation == "relu":
            return grad * (z > 0.0)
        if activation == "softmax":
            return out * (grad - (grad * out).sum(axis=1, keepdims=True))
        return grad * out * (1.0 - out / self.output_scale)

    def backward(self, output_grad, through_head: bool = True) -> GradientTape:
        """
        直前の forward に対する逆伝播

        Args:
            output_grad: 出力に関する勾配（through_head=False の場合は出力層の活性化前の値に関する勾配）
            through_head: 出力層の活性化関数を通して逆伝播するか

        Returns:
            GradientTape: パラメータ勾配（バッチ和）と入力勾配
        """
        cache = self._cache
        if cache is None:
            raise ShapeError("forward が呼ばれる前に backward が呼ばれました")
        grad = np.asarray(output_grad, dtype=float)
        if grad.ndim == 1:
            grad = grad[None, :]
        expected = cache.outputs[-1].shape
        if grad.shape != expected:
            raise ShapeError(f"出力勾配の形状が一致しません: {grad.shape} (期待値 {expected})")

        n_layers = len(self.layers)
        weight_grads: List[np.ndarray] = [np.zeros(0)] * n_layers
        bias_grads: List[np.ndarray] = [np.zeros(0)] * n_layers
        if through_head:
            grad = self._head_backward(grad, cache.preactivations[-1], cache.outputs[-1])
        for i in range(n_layers - 1, -1, -1):
            layer = self.layers[i]
            if i < n_layers - 1:
                if layer.activation == "relu":
                    grad = grad * (cache.preactivations[i] > 0.0)
            weight_grads[i] = grad.T @ cache.inputs[i]
            bias_grads[i] = grad.sum(axis=0)
            grad = grad @ layer.weight
        input_grad = grad if cache.batched else grad[0]
        return GradientTape(weight_grads, bias_grads, input_grad)

    def zero_tape(self) -> GradientTape:
        return GradientTape(
            [np.zeros_like(l.weight) for l in self.layers],
            [np.zeros_like(l.bias) for l in self.layers],
            np.zeros(self.input_dim),
        )

    def _check_tape(self, tape: GradientTape) -> None:
        for layer, gw, gb in zip(self.layers, tape.weight_grads, tape.bias_grads):
            if gw.shape != layer.weight.shape or gb.shape != layer.bias.shape:
                raise ShapeError("勾配の形状がネットワークと一致しません")
        if len(tape.weight_grads) != len(self.layers):
            raise ShapeError("勾配の層数がネットワークと一致しません")

    # --- 直列化 ---

    def to_dict(self, include_optimizer: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "format_version": NETWORK_FORMAT_VERSION,
            "output_scale": self.output_scale,
            "layers": [
                {
                    "activation": l.activation,
                    "weight": l.weight.tolist(),
                    "bias": l.bias.tolist(),
                }
                for l in self.layers
            ],
        }
        if include_optimizer:
            data["adam"] = {
                "step": self.adam_state.step,
                "m": [m.tolist() for m in self.adam_state.m],
                "v": [v.tolist() for v in self.adam_state.v],
            }
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MlpNetwork":
        version = data.get("format_version")
        if version != NETWORK_FORMAT_VERSION:
            raise CheckpointError(f"未対応のネットワーク形式バージョンです: {version}")
        try:
            layers = [
                DenseLayer(np.array(l["weight"]), np.array(l["bias"]), l["activation"])
                for l in data["layers"]
            ]
            net = cls(layers, output_scale=data.get("output_scale", 1.0))
            adam = data.get("adam")
            if adam is not None:
                net.adam_state = AdamState(
                    m=[np.array(m, dtype=float) for m in adam["m"]],
                    v=[np.array(v, dtype=float) for v in adam["v"]],
                    step=int(adam["step"]),
                )
        except (KeyError, TypeError, ShapeError) as e:
            raise CheckpointError(f"ネットワークチェックポイントが不正です: {e}") from e
        return net

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)
        logger.debug(f"ネットワークを保存しました: {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MlpNetwork":
        path = Path(path)
        if not path.exists():
            raise CheckpointError(f"チェックポイントが見つかりません: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"チェックポイントの JSON が不正です: {path}") from e
        return cls.from_dict(data)


def adam_step(net: MlpNetwork, tape: GradientTape, learning_rate: float) -> MlpNetwork:
    """
    Adam による勾配降下を1ステップ行う（バイアス補正付き）

    上昇方向に更新する場合は tape.scaled(-1.0) を渡す。
    """
    net._check_tape(tape)
    state = net.adam_state
    state.step += 1
    t = state.step
    grads = []
    for gw, gb in zip(tape.weight_grads, tape.bias_grads):
        grads.append(gw)
        grads.append(gb)
    for i, (param, grad) in enumerate(zip(net._parameters(), grads)):
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad * grad
        m_hat = state.m[i] / (1.0 - ADAM_BETA1**t)
        v_hat = state.v[i] / (1.0 - ADAM_BETA2**t)
        param -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
    return net


def sgd_step(net: MlpNetwork, tape: GradientTape, learning_rate: float) -> MlpNetwork:
    """素の勾配降下を1ステップ行う"""
    net._check_tape(tape)
    for layer, gw, gb in zip(net.layers, tape.weight_grads, tape.bias_grads):
        layer.weight -= learning_rate * gw
        layer.bias -= learning_rate * gb
    return net


def numerical_gradients(
    net: MlpNetwork, x: np.ndarray, output_weights: np.ndarray, h: float = 1e-5
) -> GradientTape:
    """
    L = Σ output_weights * net(x) の中心差分勾配

    パラメータは一時的に書き換えて元に戻す。
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(output_weights, dtype=float)

    def loss(inputs) -> float:
        return float(np.sum(u * net.predict(inputs)))

    weight_grads, bias_grads = [], []
    for layer in net.layers:
        for param, sink in ((layer.weight, weight_grads), (layer.bias, bias_grads)):
            grad = np.zeros_like(param)
            for idx in np.ndindex(param.shape):
                original = param[idx]
                param[idx] = original + h
                plus = loss(x)
                param[idx] = original - h
                minus = loss(x)
                param[idx] = original
                grad[idx] = (plus - minus) / (2.0 * h)
            sink.append(grad)

    input_grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        shifted = x.copy()
        shifted[idx] += h
        plus = loss(shifted)
        shifted[idx] -= 2.0 * h
        minus = loss(shifted)
        input_grad[idx] = (plus - minus) / (2.0 * h)
    return GradientTape(weight_grads, bias_grads, input_grad)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """max |a - n| / max(|a| + |n|, floor) の要素最大値"""
    a = np.asarray(analytic, dtype=float).ravel()
    n = np.asarray(numeric, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.abs(a) + np.abs(n), floor)
    return float(np.max(np.abs(a - n) / denom))
