"""
無線セルラーネットワークのモデルクラス

このモジュールには、セル配置・チャネル状態・電力割当・レート結果に関する
データモデルクラスが含まれています。内部単位は位置が km、利得が線形値、
電力が mW です。dB 表現は特徴量とレポートの境界でのみ使用します。
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from utils.errors import ScenarioError


def db_to_linear(value_db):
    """dB 値を線形値に変換する"""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """線形値を dB 値に変換する"""
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def dbm_to_mw(value_dbm: float) -> float:
    """dBm を mW に変換する"""
    return float(10.0 ** (value_dbm / 10.0))


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RadioConfig:
    """無線パラメータ（雑音電力・SINR上限・送信電力範囲）"""

    noise_dbm: float = -114.0
    sinr_cap_db: Optional[float] = 30.0
    p_min_dbm: float = 5.0
    p_max_dbm: float = 38.0

    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_dbm)

    @property
    def sinr_cap(self) -> Optional[float]:
        if self.sinr_cap_db is None:
            return None
        return float(10.0 ** (self.sinr_cap_db / 10.0))

    @property
    def p_min_mw(self) -> float:
        return dbm_to_mw(self.p_min_dbm)

    @property
    def p_max_mw(self) -> float:
        return dbm_to_mw(self.p_max_dbm)


@dataclass(frozen=True, eq=False)
class NetworkScenario:
    """
    静的なセル配置データ

    beta と以降のチャネル配列は局所化されたレイアウト (N, M, K) で保持する。
    extended[n] = [n] + D_n であり、beta[n, m, k] は基地局 extended[n, m] から
    セル n のユーザ k への大規模フェージング利得（線形）を表す。
    """

    n_cells: int
    users_per_cell: int
    r_min_km: float
    r_max_km: float
    bs_positions: np.ndarray
    ap_positions: np.ndarray
    neighborhoods: Tuple[Tuple[int, ...], ...]
    beta: np.ndarray
    radio: RadioConfig = field(default_factory=RadioConfig)
    lattice_side: Optional[int] = None
    shadow_sigma_db: float = 0.0
    extended: np.ndarray = field(init=False, repr=False, default=None)
    slot_index: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        n, k = self.n_cells, self.users_per_cell
        if n < 1 or k < 1:
            raise ScenarioError("セル数とユーザ数は正の整数である必要があります")
        if len(self.neighborhoods) != n:
            raise ScenarioError("近傍リストの数がセル数と一致しません")
        sizes = {len(d) for d in self.neighborhoods}
        if len(sizes) != 1:
            raise ScenarioError(f"近傍セル数がセルごとに異なります: {sorted(sizes)}")
        for cell, members in enumerate(self.neighborhoods):
            if cell in members:
                raise ScenarioError(f"セル {cell} が自身の近傍に含まれています")
            if len(set(members)) != len(members):
                raise ScenarioError(f"セル {cell} の近傍に重複があります")
            if any(m < 0 or m >= n for m in members):
                raise ScenarioError(f"セル {cell} の近傍に範囲外のインデックスがあります")

        neighborhoods = tuple(tuple(int(m) for m in d) for d in self.neighborhoods)
        extended = np.array([[c, *d] for c, d in enumerate(neighborhoods)], dtype=int)
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (n, extended.shape[1], k):
            raise ScenarioError(
                f"beta の形状が不正です: {beta.shape} (期待値 {(n, extended.shape[1], k)})"
            )
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0.0):
            raise ScenarioError("beta は正の有限値である必要があります")

        # slot_index[rx, tx] は extended[rx] 内での tx の位置（なければ -1）
        slot_index = np.full((n, n), -1, dtype=int)
        for rx in range(n):
            slot_index[rx, extended[rx]] = np.arange(extended.shape[1])

        object.__setattr__(self, "neighborhoods", neighborhoods)
        object.__setattr__(self, "beta", _freeze(beta))
        object.__setattr__(self, "bs_positions", _freeze(np.asarray(self.bs_positions, float)))
        object.__setattr__(self, "ap_positions", _freeze(np.asarray(self.ap_positions, float)))
        object.__setattr__(self, "extended", _freeze(extended))
        object.__setattr__(self, "slot_index", _freeze(slot_index))

    @property
    def neighborhood_size(self) -> int:
        return len(self.neighborhoods[0])

    @property
    def n_links(self) -> int:
        return self.n_cells * self.users_per_cell

    @property
    def candidate_count(self) -> int:
        """特徴量の候補リンク数 (|D_n|+1)K - 1"""
        return (self.neighborhood_size + 1) * self.users_per_cell - 1


@dataclass(frozen=True, eq=False)
class ChannelState:
    """スロット t における小規模フェージング係数と利得"""

    h: np.ndarray
    g: np.ndarray
    slot: int
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "h", _freeze(self.h))
        object.__setattr__(self, "g", _freeze(self.g))


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """リンクごとの送信電力 (N, K) [mW]"""

    p: np.ndarray
    p_max_mw: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise ScenarioError(f"電力配列は (N, K) である必要があります: {p.shape}")
        tolerance = 1e-9 * self.p_max_mw
        if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > self.p_max_mw + tolerance):
            raise ScenarioError("送信電力が [0, P_max] の範囲外です")
        object.__setattr__(self, "p", _freeze(np.clip(p, 0.0, self.p_max_mw)))

    @classmethod
    def full(cls, scenario: NetworkScenario, value_mw: float) -> "PowerAllocation":
        shape = (scenario.n_cells, scenario.users_per_cell)
        return cls(np.full(shape, value_mw), scenario.radio.p_max_mw)


@dataclass(frozen=True, eq=False)
class RateReport:
    """SINR・リンクレート・合計レート"""

    sinr: np.ndarray
    rate: np.ndarray
    sum_rate: float

    @property
    def sum_rate_per_ap(self) -> float:
        """AP あたりの平均合計レート C / (N K)"""
        return float(self.sum_rate / self.rate.size)
