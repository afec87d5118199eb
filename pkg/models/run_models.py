"""
実行記録のモデルクラス

学習ログ（スロット単位の記録）と、出力物を束ねる実行マニフェストを定義します。
"""

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

CSV_SCHEMA_VERSION = 1

EPISODE_LOG_COLUMNS = [
    "schema_version",
    "episode",
    "slot",
    "sum_rate",
    "sum_rate_per_ap",
    "mean_power_mw",
    "mean_reward",
    "loss",
    "critic_loss",
    "n_transitions",
    "aborted_updates",
    "decision_time_sec",
]


@dataclass
class SlotRecord:
    """1スロット分の記録"""

    episode: int
    slot: int
    sum_rate: float
    sum_rate_per_ap: float
    mean_power_mw: float
    mean_reward: float
    loss: Optional[float]
    critic_loss: Optional[float]
    n_transitions: int
    aborted_updates: int
    decision_time_sec: float

    def as_row(self) -> Dict[str, Any]:
        row = {"schema_version": CSV_SCHEMA_VERSION}
        row.update(self.__dict__)
        return row


@dataclass
class EpisodeLog:
    """
    学習・評価ループのスロット単位ログ

    keep_arrays=True のときはスロットごとの電力・レート・報酬配列 (N, K) も保持する。
    """

    n_cells: int
    users_per_cell: int
    keep_arrays: bool = False
    records: List[SlotRecord] = field(default_factory=list)
    aborted_episodes: List[int] = field(default_factory=list)
    powers: List[np.ndarray] = field(default_factory=list, repr=False)
    rates: List[np.ndarray] = field(default_factory=list, repr=False)
    rewards: List[np.ndarray] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    def record_slot(
        self,
        episode: int,
        slot: int,
        powers: np.ndarray,
        rates: np.ndarray,
        rewards: np.ndarray,
        loss: Optional[float] = None,
        critic_loss: Optional[float] = None,
        n_transitions: int = 0,
        aborted_updates: int = 0,
        decision_time_sec: float = 0.0,
    ) -> SlotRecord:
        shape = (self.n_cells, self.users_per_cell)
        if np.shape(powers) != shape or np.shape(rates) != shape or np.shape(rewards) != shape:
            raise ValueError(f"スロット記録の形状が (N, K) = {shape} と一致しません")
        sum_rate = float(np.sum(rates))
        record = SlotRecord(
            episode=int(episode),
            slot=int(slot),
            sum_rate=sum_rate,
            sum_rate_per_ap=sum_rate / (self.n_cells * self.users_per_cell),
            mean_power_mw=float(np.mean(powers)),
            mean_reward=float(np.mean(rewards)),
            loss=loss,
            critic_loss=critic_loss,
            n_transitions=int(n_transitions),
            aborted_updates=int(aborted_updates),
            decision_time_sec=float(decision_time_sec),
        )
        self.records.append(record)
        if self.keep_arrays:
            self.powers.append(np.array(powers, dtype=float))
            self.rates.append(np.array(rates, dtype=float))
            self.rewards.append(np.array(rewards, dtype=float))
        return record

    def mark_aborted(self, episode: int) -> None:
        self.aborted_episodes.append(int(episode))

    @property
    def n_transitions(self) -> int:
        return sum(r.n_transitions for r in self.records)

    @property
    def aborted_updates(self) -> int:
        return sum(r.aborted_updates for r in self.records)

    def to_frame(self) -> pd.DataFrame:
        """1行1スロットの DataFrame（CSV 出力形式）"""
        return pd.DataFrame([r.as_row() for r in self.records], columns=EPISODE_LOG_COLUMNS)

    def episode_frame(self) -> pd.DataFrame:
        """エピソードごとの平均"""
        frame = self.to_frame()
        if frame.empty:
            return frame
        return (
            frame.groupby("episode")
            .agg(
                sum_rate_per_ap=("sum_rate_per_ap", "mean"),
                mean_reward=("mean_reward", "mean"),
                loss=("loss", "mean"),
                critic_loss=("critic_loss", "mean"),
                aborted_updates=("aborted_updates", "sum"),
            )
            .reset_index()
        )

    def final_mean(self, last_episodes: int) -> float:
        """最後の last_episodes エピソードの AP あたり平均合計レート"""
        frame = self.to_frame()
        if frame.empty:
            raise ValueError("ログが空です")
        episodes = sorted(frame["episode"].unique())[-last_episodes:]
        return float(frame.loc[frame["episode"].isin(episodes), "sum_rate_per_ap"].mean())


def make_run_id(config: Dict[str, Any], seed: int, created_at: str) -> str:
    """設定・シード・作成時刻から12桁の実行IDを作る"""
    payload = json.dumps({"config": config, "seed": seed, "at": created_at}, sort_keys=True)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


@dataclass
class RunManifest:
    """1回の実行で出力されたファイル群を束ねる記録"""

    command: str
    seed: int
    config: Dict[str, Any]
    run_id: str = ""
    created_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    paths: Dict[str, str] = field(default_factory=dict)
    timing: Dict[str, float] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.run_id:
            self.run_id = make_run_id(self.config, self.seed, self.created_at)

    def add_path(self, name: str, path) -> None:
        self.paths[name] = str(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": CSV_SCHEMA_VERSION,
            "run_id": self.run_id,
            "command": self.command,
            "created_at": self.created_at,
            "seed": self.seed,
            "config": self.config,
            "paths": dict(self.paths),
            "timing": dict(self.timing),
            "summary": dict(self.summary),
        }
