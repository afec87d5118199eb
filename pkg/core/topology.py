"""
セル配置（トポロジー）生成モジュール

トーラス状に折り返した六角格子上に基地局を配置し、各セルにアクセスポイント(AP)を
一様に配置して、干渉近傍 D_n と大規模フェージング β を計算します。
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from models.network_models import NetworkScenario, RadioConfig, linear_to_db
from utils.errors import ScenarioError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

SCENARIO_FORMAT_VERSION = 1
DEFAULT_RINGS = 2  # 2リング = 6 + 12 = 18 セル
PLACEMENTS = ("area", "radius")

# β[dB] = -120.9 - 37.6 log10(d[km]) + 10 log10(z)
PATHLOSS_INTERCEPT_DB = -120.9
PATHLOSS_SLOPE_DB = 37.6


def large_scale_gain_db(distance_km, shadow_db=0.0):
    """距離減衰とシャドウイングから大規模フェージング利得 [dB] を計算する"""
    distance_km = np.asarray(distance_km, dtype=float)
    return PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * np.log10(distance_km) + shadow_db


def lattice_side(n_cells: int, rings: int = DEFAULT_RINGS) -> int:
    """
    セル数からトーラス格子の一辺を求める

    Raises:
        ScenarioError: セル数が平方数でない、または格子が小さすぎる場合
    """
    side = math.isqrt(n_cells) if n_cells > 0 else 0
    if side * side != n_cells:
        raise ScenarioError(f"セル数 {n_cells} は平方数ではありません（六角トーラス格子）")
    if side < 2 * rings + 1:
        raise ScenarioError(
            f"セル数 {n_cells} では {rings} リングの近傍が重複します（一辺 {2 * rings + 1} 以上が必要）"
        )
    return side


def lattice_distance(a: int, b: int, side: int) -> int:
    """折り返し六角格子上のセル間ホップ距離"""
    dq = (b % side) - (a % side)
    dr = (b // side) - (a // side)
    best = None
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            q = dq + i * side
            r = dr + j * side
            d = (abs(q) + abs(r) + abs(q + r)) // 2
            best = d if best is None else min(best, d)
    return int(best)


def build_neighborhoods(n_cells: int, rings: int = DEFAULT_RINGS) -> List[List[int]]:
    """各セルの干渉近傍 D_n（距離昇順、同距離はインデックス昇順）を求める"""
    side = lattice_side(n_cells, rings)
    neighborhoods = []
    for cell in range(n_cells):
        members = []
        for other in range(n_cells):
            if other == cell:
                continue
            distance = lattice_distance(cell, other, side)
            if distance <= rings:
                members.append((distance, other))
        members.sort()
        neighborhoods.append([other for _, other in members])
    return neighborhoods


def _base_station_positions(side: int, spacing_km: float) -> np.ndarray:
    cells = np.arange(side * side)
    q = cells % side
    r = cells // side
    x = spacing_km * (q + 0.5 * r)
    y = spacing_km * (math.sqrt(3.0) / 2.0) * r
    return np.stack([x, y], axis=1)


def _torus_images(side: int, spacing_km: float) -> np.ndarray:
    t1 = side * spacing_km * np.array([1.0, 0.0])
    t2 = side * spacing_km * np.array([0.5, math.sqrt(3.0) / 2.0])
    return np.array([i * t1 + j * t2 for i in (-1, 0, 1) for j in (-1, 0, 1)])


def _sample_radii(rng, size, r_min_km, r_max_km, placement):
    u = rng.random(size)
    if placement == "area":
        return np.sqrt(u * (r_max_km**2 - r_min_km**2) + r_min_km**2)
    return r_min_km + u * (r_max_km - r_min_km)


def link_distances(
    bs_positions: np.ndarray,
    ap_positions: np.ndarray,
    extended: np.ndarray,
    side: int,
    spacing_km: float,
) -> np.ndarray:
    """
    局所レイアウト (N, M, K) で基地局-AP 間距離を求める（トーラスの最近接像）
    """
    # diff[n, m, k] = AP(n, k) - BS(extended[n, m])
    diff = ap_positions[:, None, :, :] - bs_positions[extended][:, :, None, :]
    images = _torus_images(side, spacing_km)
    shifted = diff[..., None, :] + images
    return np.min(np.linalg.norm(shifted, axis=-1), axis=-1)


def build_scenario(
    n_cells: int,
    users_per_cell: int,
    r_min_km: float,
    r_max_km: float,
    shadow_sigma_db: float,
    rng_seed: int,
    placement: str = "area",
    rings: int = DEFAULT_RINGS,
    radio: RadioConfig = RadioConfig(),
) -> NetworkScenario:
    """
    シナリオを構築する

    Args:
        n_cells: セル数 N（平方数、一辺 2*rings+1 以上）
        users_per_cell: セルあたりのAP数 K
        r_min_km: 基地局周辺の除外半径 [km]
        r_max_km: セル間距離の半分 [km]
        shadow_sigma_db: シャドウイングの標準偏差 [dB]
        rng_seed: 乱数シード
        placement: "area"（円環面積で一様）または "radius"（半径で一様）
        rings: 干渉近傍のリング数
        radio: 無線パラメータ

    Returns:
        NetworkScenario: 構築したシナリオ
    """
    if users_per_cell < 1:
        raise ScenarioError(f"セルあたりのユーザ数が不正です: {users_per_cell}")
    if r_min_km <= 0.0 or r_max_km <= 0.0:
        raise ScenarioError("半径は正の値である必要があります")
    if r_min_km >= r_max_km:
        raise ScenarioError(f"r_min ({r_min_km}) は r_max ({r_max_km}) より小さい必要があります")
    if shadow_sigma_db < 0.0:
        raise ScenarioError("シャドウイングの標準偏差は非負である必要があります")
    if placement not in PLACEMENTS:
        raise ScenarioError(f"不明な配置方式: {placement}")

    side = lattice_side(n_cells, rings)
    neighborhoods = build_neighborhoods(n_cells, rings)
    spacing_km = 2.0 * r_max_km
    rng = make_rng(rng_seed)

    bs_positions = _base_station_positions(side, spacing_km)
    shape = (n_cells, users_per_cell)
    radii = _sample_radii(rng, shape, r_min_km, r_max_km, placement)
    angles = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    offsets = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
    ap_positions = bs_positions[:, None, :] + offsets

    extended = np.array([[c, *d] for c, d in enumerate(neighborhoods)], dtype=int)
    distances = link_distances(bs_positions, ap_positions, extended, side, spacing_km)
    shadow_db = rng.normal(0.0, shadow_sigma_db, size=distances.shape)
    beta = np.power(10.0, large_scale_gain_db(distances, shadow_db) / 10.0)

    logger.debug(
        f"シナリオを構築しました: N={n_cells}, K={users_per_cell}, R=[{r_min_km}, {r_max_km}] km"
    )
    return NetworkScenario(
        n_cells=n_cells,
        users_per_cell=users_per_cell,
        r_min_km=r_min_km,
        r_max_km=r_max_km,
        bs_positions=bs_positions,
        ap_positions=ap_positions,
        neighborhoods=tuple(tuple(d) for d in neighborhoods),
        beta=beta,
        radio=radio,
        lattice_side=side,
        shadow_sigma_db=shadow_sigma_db,
    )


def reshadow(scenario: NetworkScenario, shadow_sigma_db: float, rng_seed: int) -> NetworkScenario:
    """AP位置を保ったままシャドウイングだけを引き直したシナリオを返す"""
    if scenario.lattice_side is None:
        raise ScenarioError("格子情報のないシナリオは再シャドウイングできません")
    rng = make_rng(rng_seed)
    distances = link_distances(
        scenario.bs_positions,
        scenario.ap_positions,
        scenario.extended,
        scenario.lattice_side,
        2.0 * scenario.r_max_km,
    )
    shadow_db = rng.normal(0.0, shadow_sigma_db, size=distances.shape)
    beta = np.power(10.0, large_scale_gain_db(distances, shadow_db) / 10.0)
    return NetworkScenario(
        n_cells=scenario.n_cells,
        users_per_cell=scenario.users_per_cell,
        r_min_km=scenario.r_min_km,
        r_max_km=scenario.r_max_km,
        bs_positions=scenario.bs_positions,
        ap_positions=scenario.ap_positions,
        neighborhoods=scenario.neighborhoods,
        beta=beta,
        radio=scenario.radio,
        lattice_side=scenario.lattice_side,
        shadow_sigma_db=shadow_sigma_db,
    )


def neighborhood(scenario: NetworkScenario, cell: int) -> List[int]:
    """セル cell の干渉近傍 D_cell を返す"""
    if not 0 <= cell < scenario.n_cells:
        raise ScenarioError(f"セルインデックスが範囲外です: {cell}")
    return list(scenario.neighborhoods[cell])


def serving_distances(scenario: NetworkScenario) -> np.ndarray:
    """各APとサービング基地局の距離 (N, K) [km]"""
    offsets = scenario.ap_positions - scenario.bs_positions[:, None, :]
    return np.linalg.norm(offsets, axis=-1)


# --- JSON シリアライズ ---


def scenario_to_dict(scenario: NetworkScenario) -> Dict[str, Any]:
    """シナリオを JSON 化可能な辞書に変換する（β は dB）"""
    return {
        "format_version": SCENARIO_FORMAT_VERSION,
        "n_cells": scenario.n_cells,
        "users_per_cell": scenario.users_per_cell,
        "r_min_km": scenario.r_min_km,
        "r_max_km": scenario.r_max_km,
        "lattice_side": scenario.lattice_side,
        "shadow_sigma_db": scenario.shadow_sigma_db,
        "radio": {
            "noise_dbm": scenario.radio.noise_dbm,
            "sinr_cap_db": scenario.radio.sinr_cap_db,
            "p_min_dbm": scenario.radio.p_min_dbm,
            "p_max_dbm": scenario.radio.p_max_dbm,
        },
        "bs_positions": scenario.bs_positions.tolist(),
        "ap_positions": scenario.ap_positions.tolist(),
        "neighborhoods": [list(d) for d in scenario.neighborhoods],
        "beta_db": linear_to_db(scenario.beta).tolist(),
    }


def scenario_from_dict(data: Dict[str, Any]) -> NetworkScenario:
    """辞書からシナリオを復元する"""
    version = data.get("format_version")
    if version != SCENARIO_FORMAT_VERSION:
        raise ScenarioError(f"未対応のシナリオ形式バージョンです: {version}")
    return NetworkScenario(
        n_cells=int(data["n_cells"]),
        users_per_cell=int(data["users_per_cell"]),
        r_min_km=float(data["r_min_km"]),
        r_max_km=float(data["r_max_km"]),
        bs_positions=np.asarray(data["bs_positions"], dtype=float),
        ap_positions=np.asarray(data["ap_positions"], dtype=float),
        neighborhoods=tuple(tuple(d) for d in data["neighborhoods"]),
        beta=np.power(10.0, np.asarray(data["beta_db"], dtype=float) / 10.0),
        radio=RadioConfig(**data["radio"]),
        lattice_side=data.get("lattice_side"),
        shadow_sigma_db=float(data.get("shadow_sigma_db", 0.0)),
    )


def save_scenario_json(scenario: NetworkScenario, path: Union[str, Path]) -> Path:
    """シナリオを JSON ファイルに保存する"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(scenario), f, ensure_ascii=False)
    logger.info(f"シナリオを保存しました: {path}")
    return path


def load_scenario_json(path: Union[str, Path]) -> NetworkScenario:
    """JSON ファイルからシナリオを読み込む"""
    with open(path, "r", encoding="utf-8") as f:
        return scenario_from_dict(json.load(f))


def local_links(scenario: NetworkScenario, cell: int) -> np.ndarray:
    """
    セル cell の局所リンク集合 ({cell} ∪ D_cell) × K を (セル, ユーザ) 昇順で返す

    Returns:
        np.ndarray: 形状 (L, 2) の (セル, ユーザ) 配列
    """
    cells = np.sort(scenario.extended[cell])
    users = np.arange(scenario.users_per_cell)
    return np.stack(
        [np.repeat(cells, scenario.users_per_cell), np.tile(users, len(cells))], axis=1
    )
