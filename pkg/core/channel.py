"""
チャネルモデルモジュール

Jakes モデルに基づく一次複素ガウス・マルコフ過程で小規模フェージングを
スロットごとに更新し、チャネル利得 g = |h|^2 β を計算します。
"""

import logging
import math
from pathlib import Path
from typing import Iterable, Union

import numpy as np
import pandas as pd
from scipy import special

from models.network_models import ChannelState, NetworkScenario, linear_to_db
from utils.errors import ScenarioError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

RngLike = Union[int, np.random.Generator]


def bessel_j0(x: float) -> float:
    """第一種0次ベッセル関数 J0(x)"""
    return float(special.j0(float(x)))


def j0_series(x: float, terms: int = 30) -> float:
    """
    J0 のべき級数 Σ(-1)^m (x^2/4)^m / (m!)^2 を terms 項で打ち切って評価する

    |x| が大きいと桁落ちするため、検証用の独立オラクルとして |x| <= 8 程度で使用する。
    """
    quarter = (x * x) / 4.0
    term = 1.0
    total = 1.0
    for m in range(1, terms):
        term *= -quarter / (m * m)
        total += term
    return total


def correlation_coefficient(f_d_hz: float, t_s_sec: float) -> float:
    """ρ = J0(2π f_d T_s)"""
    return bessel_j0(2.0 * math.pi * f_d_hz * t_s_sec)


def _as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """円対称複素正規乱数 CN(0, variance)（実部・虚部の分散は variance/2）"""
    scale = math.sqrt(variance / 2.0)
    return rng.normal(0.0, scale, size=shape) + 1j * rng.normal(0.0, scale, size=shape)


def init_channel(
    scenario: NetworkScenario, f_d_hz: float, t_s_sec: float, rng_seed: RngLike
) -> ChannelState:
    """
    チャネルを初期化する（スロット1、h ~ CN(0, 1)）

    Args:
        scenario: シナリオ
        f_d_hz: 最大ドップラー周波数 [Hz]
        t_s_sec: スロット間隔 [s]
        rng_seed: シード、または Generator

    Returns:
        ChannelState: 初期チャネル状態
    """
    if t_s_sec <= 0.0:
        raise ScenarioError(f"スロット間隔は正の値である必要があります: {t_s_sec}")
    if f_d_hz < 0.0:
        raise ScenarioError(f"ドップラー周波数は非負である必要があります: {f_d_hz}")
    rng = _as_rng(rng_seed)
    rho = correlation_coefficient(f_d_hz, t_s_sec)
    h = complex_normal(rng, scenario.beta.shape)
    return ChannelState(h=h, g=np.abs(h) ** 2 * scenario.beta, slot=1, rho=rho)


def step_channel(
    state: ChannelState, rng: np.random.Generator, scenario: NetworkScenario
) -> ChannelState:
    """
    チャネルを1スロット進める: h^t = ρ h^{t-1} + n^t, n^t ~ CN(0, 1-ρ^2)
    """
    rho = state.rho
    innovation = complex_normal(rng, state.h.shape, variance=max(0.0, 1.0 - rho * rho))
    h = rho * state.h + innovation
    return ChannelState(h=h, g=np.abs(h) ** 2 * scenario.beta, slot=state.slot + 1, rho=rho)


def channel_from_gains(gains: np.ndarray, slot: int = 1, rho: float = 1.0) -> ChannelState:
    """利得を直接指定したチャネル状態を作る（|h| = 1 とみなす）"""
    gains = np.asarray(gains, dtype=float)
    return ChannelState(h=np.ones(gains.shape, dtype=complex), g=gains, slot=slot, rho=rho)


def channel_trace_frame(state: ChannelState, scenario: NetworkScenario) -> pd.DataFrame:
    """チャネル状態をリンク単位の DataFrame に展開する"""
    n, m, k = state.g.shape
    rx, slot_pos, user = np.meshgrid(np.arange(n), np.arange(m), np.arange(k), indexing="ij")
    return pd.DataFrame(
        {
            "slot": state.slot,
            "tx_cell": scenario.extended[rx, slot_pos].ravel(),
            "rx_cell": rx.ravel(),
            "user": user.ravel(),
            "h_abs2": (np.abs(state.h) ** 2).ravel(),
            "g_db": linear_to_db(state.g).ravel(),
        }
    )


def write_channel_trace(
    states: Iterable[ChannelState], scenario: NetworkScenario, path: Union[str, Path]
) -> Path:
    """エピソード分のチャネル状態を CSV に書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.concat([channel_trace_frame(s, scenario) for s in states], ignore_index=True)
    frame.to_csv(path, index=False)
    logger.info(f"チャネルトレースを書き出しました: {path} ({len(frame)}行)")
    return path
