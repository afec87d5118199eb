"""
行動コーデック

離散行動インデックス／連続ネットワーク出力と送信電力 [mW] の相互変換を行います。
"""

import math

import numpy as np

from core.neural import sigmoid
from models.agent_models import ActionCodec
from models.network_models import RadioConfig
from utils.errors import CodecError


def discrete_codec(radio: RadioConfig, n_levels: int) -> ActionCodec:
    try:
        return ActionCodec("discrete", radio.p_min_mw, radio.p_max_mw, n_levels)
    except ValueError as e:
        raise CodecError(str(e)) from e


def continuous_codec(radio: RadioConfig) -> ActionCodec:
    return ActionCodec("continuous", radio.p_min_mw, radio.p_max_mw)


def decode_action(codec: ActionCodec, value):
    """
    行動を送信電力に変換する

    Args:
        codec: コーデック
        value: 離散ならインデックス、連続なら scaled sigmoid の活性化前の値

    Returns:
        送信電力 [mW]（入力が配列なら配列）
    """
    if codec.mode == "discrete":
        index = np.asarray(value)
        if not np.issubdtype(index.dtype, np.integer):
            if not np.all(np.equal(np.mod(index, 1), 0)):
                raise CodecError(f"離散行動インデックスが整数ではありません: {value}")
            index = index.astype(int)
        if np.any(index < 0) or np.any(index >= codec.n_levels):
            raise CodecError(f"行動インデックスが範囲外です: {value} (|A| = {codec.n_levels})")
        power = codec.levels[index]
    else:
        x = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(x)):
            raise CodecError("連続行動の入力が有限値ではありません")
        power = codec.p_max_mw * sigmoid(x)
    return float(power) if np.ndim(power) == 0 else power


def encode_action(codec: ActionCodec, power):
    """
    送信電力を行動に変換する（decode_action の逆）

    離散では最も近い（dB 上で）レベルのインデックス、連続では logit(p/P_max) を返す。
    """
    p = np.asarray(power, dtype=float)
    if np.any(p < 0.0) or np.any(p > codec.p_max_mw * (1.0 + 1e-9)):
        raise CodecError(f"送信電力が [0, P_max] の範囲外です: {power}")
    if codec.mode == "discrete":
        levels = codec.levels
        with np.errstate(divide="ignore"):
            distance = np.abs(np.log(p[..., None] + 1e-300) - np.log(levels + 1e-300))
        index = np.argmin(distance, axis=-1)
        return int(index) if np.ndim(index) == 0 else index
    ratio = p / codec.p_max_mw
    if np.any(ratio <= 0.0) or np.any(ratio >= 1.0):
        raise CodecError("連続行動で表現できるのは (0, P_max) の電力のみです")
    logit = np.log(ratio) - np.log1p(-ratio)
    return float(logit) if np.ndim(logit) == 0 else logit


def level_spacing_db(codec: ActionCodec) -> float:
    """隣接する非ゼロレベルの dB 間隔"""
    return 10.0 * math.log10(codec.p_max_mw / codec.p_min_mw) / (codec.n_levels - 2)
