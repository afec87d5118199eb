"""
性能指標モジュール

チャネル利得と送信電力から SINR・リンクレート・合計レート・局所報酬を計算します。
DDPG のクリティック連鎖で用いる解析的なレート感度もここで提供します。
"""

import math
from typing import Optional, Tuple

import numpy as np

from core.topology import local_links
from models.network_models import (
    ChannelState,
    NetworkScenario,
    PowerAllocation,
    RateReport,
)

DEFAULT_SINR_CAP = 1000.0  # 30 dB
LN2 = math.log(2.0)


def signal_and_interference(
    scenario: NetworkScenario, channel: ChannelState, alloc: PowerAllocation
) -> Tuple[np.ndarray, np.ndarray]:
    """希望信号電力と干渉+雑音電力を (N, K) で返す"""
    p = alloc.p
    g = channel.g
    cell_power = p.sum(axis=1)
    own_gain = g[:, 0, :]
    signal = own_gain * p
    intra = own_gain * np.maximum(cell_power[:, None] - p, 0.0)
    inter = np.einsum("nmk,nm->nk", g[:, 1:, :], cell_power[scenario.extended[:, 1:]])
    return signal, intra + inter + scenario.radio.noise_mw


def cap_sinr(sinr: np.ndarray, sinr_cap: Optional[float] = DEFAULT_SINR_CAP) -> np.ndarray:
    """SINR を上限値で制限する"""
    sinr = np.asarray(sinr, dtype=float)
    if sinr_cap is None:
        return sinr
    return np.minimum(sinr, sinr_cap)


def compute_sinr(
    scenario: NetworkScenario,
    channel: ChannelState,
    alloc: PowerAllocation,
    apply_cap: bool = True,
) -> np.ndarray:
    """
    リンクごとの SINR（線形値）を計算する

    セル内干渉は同一セルの他ユーザ宛て電力、セル間干渉は D_n の基地局の総電力のみを対象とする。

    Args:
        scenario: シナリオ
        channel: チャネル状態
        alloc: 電力割当
        apply_cap: 無線設定の SINR 上限を適用するか

    Returns:
        np.ndarray: (N, K) の SINR
    """
    signal, interference = signal_and_interference(scenario, channel, alloc)
    sinr = signal / interference
    if apply_cap:
        sinr = cap_sinr(sinr, scenario.radio.sinr_cap)
    return sinr


def compute_rates(sinr: np.ndarray, sinr_cap: Optional[float] = DEFAULT_SINR_CAP) -> RateReport:
    """
    SINR からリンクレート log2(1 + SINR) と合計レートを計算する

    Args:
        sinr: SINR（非負）
        sinr_cap: SINR 上限（線形値、None で無効）

    Returns:
        RateReport: レート結果
    """
    capped = cap_sinr(sinr, sinr_cap)
    if np.any(capped < 0.0):
        raise ValueError("SINR は非負である必要があります")
    rate = np.log2(1.0 + capped)
    return RateReport(sinr=capped, rate=rate, sum_rate=float(rate.sum()))


def evaluate_allocation(
    scenario: NetworkScenario, channel: ChannelState, alloc: PowerAllocation
) -> RateReport:
    """SINR とレートをまとめて計算する"""
    sinr = compute_sinr(scenario, channel, alloc)
    return compute_rates(sinr, scenario.radio.sinr_cap)


def local_rewards(scenario: NetworkScenario, rates: RateReport, alpha: float) -> np.ndarray:
    """全リンクの局所報酬 (N, K) を計算する"""
    if alpha < 0.0:
        raise ValueError(f"alpha は非負である必要があります: {alpha}")
    rate = rates.rate
    cell_sum = rate.sum(axis=1)
    neighbor_sum = cell_sum[scenario.extended[:, 1:]].sum(axis=1)
    others = (cell_sum[:, None] - rate) + neighbor_sum[:, None]
    return rate + alpha * others


def local_reward(
    scenario: NetworkScenario, rates: RateReport, cell: int, user: int, alpha: float
) -> float:
    """
    リンク (cell, user) の局所報酬

    r = C_{n,k} + α (Σ_{k'≠k} C_{n,k'} + Σ_{n'∈D_n, j} C_{n',j})
    """
    if alpha < 0.0:
        raise ValueError(f"alpha は非負である必要があります: {alpha}")
    rate = rates.rate
    own = rate[cell, user]
    co_cell = rate[cell].sum() - own
    neighbors = sum(rate[m].sum() for m in scenario.neighborhoods[cell])
    return float(own + alpha * (co_cell + neighbors))


def reward_multiplicity(scenario: NetworkScenario, alpha: float) -> np.ndarray:
    """
    局所報酬の総和において各リンクのレートが何回（重み付きで）数えられるかを数え上げる

    Returns:
        np.ndarray: (N, K) の重み。Σ_{n,k} r_{n,k} = Σ weight * C となる
    """
    n_cells, k_users = scenario.n_cells, scenario.users_per_cell
    weight = np.zeros((n_cells, k_users))
    for cell in range(n_cells):
        for user in range(k_users):
            weight[cell, user] += 1.0
            for other in range(k_users):
                if other != user:
                    weight[cell, other] += alpha
            for neighbor in scenario.neighborhoods[cell]:
                weight[neighbor, :] += alpha
    return weight


def rate_sensitivity(
    scenario: NetworkScenario,
    channel: ChannelState,
    alloc: PowerAllocation,
    cell: int,
    user: int,
    terms: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    局所リンク集合の各レートの、送信電力 p_{cell,user} に関する偏微分を解析的に求める

    自リンク: ∂C/∂p = g / ((I + g p) ln 2)
    他リンク: ∂C/∂p = -S c / (I (I + S) ln 2)（c は基地局 cell から当該受信機への利得）
    SINR が上限に張り付いているリンクの偏微分は 0 とする。

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]:
            (局所リンク (L, 2), レート (L,), 偏微分 (L,))
    """
    if terms is None:
        terms = signal_and_interference(scenario, channel, alloc)
    signal, interference = terms
    sinr = signal / interference
    capped = cap_sinr(sinr, scenario.radio.sinr_cap)
    rate = np.log2(1.0 + capped)
    links = local_links(scenario, cell)
    cells, users = links[:, 0], links[:, 1]

    s = signal[cells, users]
    i = interference[cells, users]
    coupling = np.zeros(len(links))
    co_cell = (cells == cell) & (users != user)
    coupling[co_cell] = channel.g[cell, 0, users[co_cell]]
    remote = cells != cell
    slots = scenario.slot_index[cells[remote], cell]
    remote_gain = channel.g[cells[remote], np.maximum(slots, 0), users[remote]]
    coupling[remote] = np.where(slots >= 0, remote_gain, 0.0)

    derivative = -s * coupling / (i * (i + s) * LN2)
    own = (cells == cell) & (users == user)
    own_gain = channel.g[cell, 0, user]
    derivative[own] = own_gain / ((i[own] + s[own]) * LN2)

    sinr_cap = scenario.radio.sinr_cap
    if sinr_cap is not None:
        derivative[sinr[cells, users] > sinr_cap] = 0.0
    return links, rate[cells, users], derivative
