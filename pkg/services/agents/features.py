"""
特徴量抽出

リンク (n, k) の観測として、{n} ∪ D_n の基地局からの干渉利得を自リンク利得で正規化し、
dB に変換して降順に並べた上位 I_c 個と、その前スロットの電力・レートを集めます。
"""

import logging
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from core.metrics import evaluate_allocation
from core.topology import local_links
from models.agent_models import FEATURE_KINDS, GAMMA_DB_CEIL, GAMMA_DB_FLOOR, AgentObservation
from models.network_models import ChannelState, NetworkScenario, PowerAllocation, RateReport
from utils.errors import ShapeError

logger = logging.getLogger(__name__)


def sort_top(values, i_c: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    値を降順に安定ソートして上位 i_c 個とその元インデックスを返す

    同値は元の並び（インデックス昇順）を保つ。
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(-values, kind="stable")[:i_c]
    return values[order], order


def feature_dim(i_c: int, feature_kind: str) -> int:
    """ネットワーク入力次元（f1: 2I_c, f2: 3I_c）"""
    if feature_kind not in FEATURE_KINDS:
        raise ShapeError(f"不明な特徴量の種類です: {feature_kind}")
    return (2 if feature_kind == "f1" else 3) * i_c


def _gain_ratio_db(gains: np.ndarray, own: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_db = 10.0 * np.log10(gains / own)
    ratio_db = np.where(np.isnan(ratio_db), GAMMA_DB_FLOOR, ratio_db)
    return np.clip(ratio_db, GAMMA_DB_FLOOR, GAMMA_DB_CEIL)


def _check_i_c(scenario: NetworkScenario, i_c: int) -> None:
    if i_c < 1:
        raise ShapeError(f"I_c は1以上である必要があります: {i_c}")
    if i_c > scenario.candidate_count:
        logger.debug(f"候補リンク数 {scenario.candidate_count} < I_c {i_c}: 末尾をパディングします")


def cold_start(
    scenario: NetworkScenario, channel: ChannelState
) -> Tuple[PowerAllocation, RateReport]:
    """スロット1の前スロット値: 全リンク P_max とその割当でのレート"""
    alloc = PowerAllocation.full(scenario, scenario.radio.p_max_mw)
    return alloc, evaluate_allocation(scenario, channel, alloc)


def extract_features(
    scenario: NetworkScenario,
    channel: ChannelState,
    prev_alloc: PowerAllocation,
    prev_rates: RateReport,
    cell: int,
    user: int,
    i_c: int,
    feature_kind: str,
) -> AgentObservation:
    """
    リンク (cell, user) の観測を作る

    参照するのは受信機 (cell, user) の利得と、局所リンクの前スロット電力・レートのみ。

    Args:
        scenario: シナリオ
        channel: 現在スロットのチャネル
        prev_alloc: 前スロットの電力割当
        prev_rates: 前スロットのレート
        cell: セル番号
        user: ユーザ番号
        i_c: 残す干渉リンク数
        feature_kind: "f1" または "f2"

    Returns:
        AgentObservation: 観測
    """
    feature_dim(i_c, feature_kind)
    _check_i_c(scenario, i_c)
    links = local_links(scenario, cell)
    keep = ~((links[:, 0] == cell) & (links[:, 1] == user))
    candidates = links[keep]

    slots = scenario.slot_index[cell, candidates[:, 0]]
    gains = channel.g[cell, slots, user]
    gamma_db = _gain_ratio_db(gains, channel.g[cell, 0, user])
    values, order = sort_top(gamma_db, i_c)
    chosen = candidates[order]
    return _pad_observation(
        values,
        prev_alloc.p[chosen[:, 0], chosen[:, 1]] / prev_alloc.p_max_mw,
        prev_rates.rate[chosen[:, 0], chosen[:, 1]] if feature_kind == "f2" else None,
        chosen,
        i_c,
    )


def _pad_observation(
    gamma_db: np.ndarray,
    power: np.ndarray,
    rate: Optional[np.ndarray],
    index_set: np.ndarray,
    i_c: int,
) -> AgentObservation:
    n_padded = i_c - len(gamma_db)
    if n_padded > 0:
        gamma_db = np.concatenate([gamma_db, np.full(n_padded, GAMMA_DB_FLOOR)])
        power = np.concatenate([power, np.zeros(n_padded)])
        if rate is not None:
            rate = np.concatenate([rate, np.zeros(n_padded)])
        index_set = np.concatenate([index_set, np.full((n_padded, 2), -1)])
    return AgentObservation(
        gamma_db=gamma_db,
        prev_power=power,
        prev_rate=rate,
        index_set=index_set.astype(int),
        n_padded=max(0, n_padded),
    )


@lru_cache(maxsize=16)
def _candidate_table(scenario: NetworkScenario) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """全セル分の候補 (セル, ユーザ) と局所スロット位置 (N, M*K)"""
    k_users = scenario.users_per_cell
    sorted_cells = np.sort(scenario.extended, axis=1)
    cand_cells = np.repeat(sorted_cells, k_users, axis=1)
    cand_users = np.tile(np.arange(k_users), (scenario.n_cells, sorted_cells.shape[1]))
    rows = np.arange(scenario.n_cells)[:, None]
    cand_slots = scenario.slot_index[rows, cand_cells]
    return cand_cells, cand_users, cand_slots


def observation_matrix(
    scenario: NetworkScenario,
    channel: ChannelState,
    prev_alloc: PowerAllocation,
    prev_rates: RateReport,
    i_c: int,
    feature_kind: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    全リンクの観測ベクトルをまとめて作る（extract_features と同一の結果）

    Returns:
        Tuple[np.ndarray, np.ndarray]:
            (観測 (N*K, 入力次元)、index_set (N*K, I_c, 2))。行はリンク n*K + k の順
    """
    dim = feature_dim(i_c, feature_kind)
    _check_i_c(scenario, i_c)
    n_cells, k_users = scenario.n_cells, scenario.users_per_cell
    cand_cells, cand_users, cand_slots = _candidate_table(scenario)
    rows = np.arange(n_cells)[:, None]

    # gains[n, k, c] = g[n, slot(c), k]
    gains = np.transpose(channel.g[rows, cand_slots, :], (0, 2, 1))
    gamma_db = _gain_ratio_db(gains, channel.g[:, 0, :][:, :, None])
    own = (cand_cells[:, None, :] == rows[:, :, None]) & (
        cand_users[:, None, :] == np.arange(k_users)[None, :, None]
    )
    sort_key = np.where(own, -np.inf, gamma_db)
    n_keep = min(i_c, scenario.candidate_count)
    order = np.argsort(-sort_key, axis=2, kind="stable")[:, :, :n_keep]

    top_db = np.take_along_axis(gamma_db, order, axis=2)
    chosen_cells = np.take_along_axis(np.broadcast_to(cand_cells[:, None, :], own.shape), order, axis=2)
    chosen_users = np.take_along_axis(np.broadcast_to(cand_users[:, None, :], own.shape), order, axis=2)

    features = np.zeros((n_cells, k_users, dim))
    features[:, :, :i_c] = GAMMA_DB_FLOOR / 10.0
    features[:, :, :n_keep] = top_db / 10.0
    features[:, :, i_c : i_c + n_keep] = prev_alloc.p[chosen_cells, chosen_users] / prev_alloc.p_max_mw
    if feature_kind == "f2":
        features[:, :, 2 * i_c : 2 * i_c + n_keep] = prev_rates.rate[chosen_cells, chosen_users]

    index_set = np.full((n_cells, k_users, i_c, 2), -1, dtype=int)
    index_set[:, :, :n_keep, 0] = chosen_cells
    index_set[:, :, :n_keep, 1] = chosen_users
    return features.reshape(n_cells * k_users, dim), index_set.reshape(n_cells * k_users, i_c, 2)
