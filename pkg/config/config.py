"""
電力制御シミュレータの設定を管理するモジュール

config.ini の各セクションを TrainConfig にまとめ、値の検証を行います。
優先順位は CLI フラグ > --set による上書き > 設定ファイル > 既定値 です。
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from core.topology import lattice_side
from models.agent_models import AGENT_KINDS, BASELINE_KINDS, FEATURE_KINDS, AgentSettings
from models.network_models import RadioConfig
from utils.config_manager import ConfigManager
from utils.errors import ConfigError, ScenarioError

OUTPUT_DIR_ENV = "DRLPA_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "output"
UPDATE_MODES = ("slot", "sequential")


def _opt(section: str, **kwargs) -> Any:
    """設定ファイル上のセクションを metadata に持つフィールド"""
    return field(metadata={"section": section}, **kwargs)


def _parse_sizes(text: str, key: str) -> Tuple[int, ...]:
    try:
        sizes = tuple(int(s) for s in str(text).replace(" ", "").split(",") if s)
    except ValueError:
        raise ConfigError(key, f"整数のカンマ区切りで指定してください: {text}")
    if not sizes or any(s < 1 for s in sizes):
        raise ConfigError(key, f"隠れ層のユニット数は正の整数である必要があります: {text}")
    return sizes


@dataclass(frozen=True)
class TrainConfig:
    """
    学習・評価の設定

    既定値はセル数 25、セルあたり AP 4、5000 エピソード × 10 スロット、α = 1、
    I_c = 16、|A| = 10 です。
    """

    # [scenario]
    n_cells: int = _opt("scenario", default=25)
    users_per_cell: int = _opt("scenario", default=4)
    r_min_km: float = _opt("scenario", default=0.01)
    r_max_km: float = _opt("scenario", default=1.0)
    shadow_sigma_db: float = _opt("scenario", default=8.0)
    placement: str = _opt("scenario", default="area")
    redraw_placement: bool = _opt("scenario", default=True)
    # [channel]
    doppler_hz: float = _opt("channel", default=10.0)
    slot_sec: float = _opt("channel", default=0.02)
    # [radio]
    noise_dbm: float = _opt("radio", default=-114.0)
    sinr_cap_db: float = _opt("radio", default=30.0)
    p_min_dbm: float = _opt("radio", default=5.0)
    p_max_dbm: float = _opt("radio", default=38.0)
    # [training]
    n_episodes: int = _opt("training", default=5000)
    slots_per_episode: int = _opt("training", default=10)
    alpha: float = _opt("training", default=1.0)
    seed: int = _opt("training", default=0)
    update_mode: str = _opt("training", default="slot")
    replay: bool = _opt("training", default=False)
    replay_capacity: int = _opt("training", default=10000)
    batch_size: int = _opt("training", default=32)
    log_every: int = _opt("training", default=100)
    checkpoint_every: int = _opt("training", default=0)
    # [agent]
    agent: str = _opt("agent", default="ddpg")
    feature_kind: str = _opt("agent", default="f2")
    i_c: int = _opt("agent", default=16)
    n_levels: int = _opt("agent", default=10)
    hidden: str = _opt("agent", default="64,128")
    critic_hidden: str = _opt("agent", default="64")
    learning_rate: Optional[float] = _opt("agent", default=None)
    critic_learning_rate: float = _opt("agent", default=1e-3)
    eps_first: float = _opt("agent", default=0.2)
    eps_last: float = _opt("agent", default=1e-4)
    # [tracking]
    tracking_window: int = _opt("tracking", default=100)
    tracking_threshold: float = _opt("tracking", default=0.05)
    tracking_slots: int = _opt("tracking", default=1000)
    # [evaluation]
    eval_scenarios: int = _opt("evaluation", default=500)
    eval_workers: int = _opt("evaluation", default=4)
    bench_repeats: int = _opt("evaluation", default=10000)
    # [output]
    output_dir: str = _opt("output", default="")

    def __post_init__(self):
        self.validate()

    # --- 検証 ---

    def validate(self) -> None:
        """最初に見つかった不正値のキーを ConfigError で報告する"""
        positive = {
            "scenario.n_cells": self.n_cells,
            "scenario.users_per_cell": self.users_per_cell,
            "scenario.r_min_km": self.r_min_km,
            "scenario.r_max_km": self.r_max_km,
            "channel.slot_sec": self.slot_sec,
            "training.n_episodes": self.n_episodes,
            "training.slots_per_episode": self.slots_per_episode,
            "training.replay_capacity": self.replay_capacity,
            "training.batch_size": self.batch_size,
            "training.log_every": self.log_every,
            "agent.i_c": self.i_c,
            "agent.critic_learning_rate": self.critic_learning_rate,
            "tracking.window": self.tracking_window,
            "tracking.slots": self.tracking_slots,
            "evaluation.scenarios": self.eval_scenarios,
            "evaluation.workers": self.eval_workers,
            "evaluation.bench_repeats": self.bench_repeats,
        }
        for key, value in positive.items():
            if not value > 0:
                raise ConfigError(key, f"正の値である必要があります: {value}")

        try:
            lattice_side(self.n_cells)
        except ScenarioError as e:
            raise ConfigError("scenario.n_cells", str(e))
        if self.r_min_km >= self.r_max_km:
            raise ConfigError("scenario.r_min_km", "r_min_km は r_max_km より小さい必要があります")
        non_negative = {
            "scenario.shadow_sigma_db": self.shadow_sigma_db,
            "channel.doppler_hz": self.doppler_hz,
            "training.alpha": self.alpha,
            "training.checkpoint_every": self.checkpoint_every,
            "tracking.threshold": self.tracking_threshold,
        }
        for key, value in non_negative.items():
            if value < 0:
                raise ConfigError(key, f"非負の値である必要があります: {value}")

        if self.placement not in ("area", "radius"):
            raise ConfigError("scenario.placement", f"area または radius を指定してください: {self.placement}")
        if self.update_mode not in UPDATE_MODES:
            raise ConfigError("training.update_mode", f"slot または sequential を指定してください: {self.update_mode}")
        if self.agent not in AGENT_KINDS + BASELINE_KINDS + ("random_power",):
            raise ConfigError("agent.kind", f"不明なエージェントの種類です: {self.agent}")
        if self.feature_kind not in FEATURE_KINDS:
            raise ConfigError("agent.feature", f"f1 または f2 を指定してください: {self.feature_kind}")
        if self.n_levels < 3:
            raise ConfigError("agent.levels", f"段階数は3以上である必要があります: {self.n_levels}")
        if self.p_min_dbm >= self.p_max_dbm:
            raise ConfigError("radio.p_min_dbm", "P_min は P_max より小さい必要があります")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError("agent.learning_rate", f"正の値である必要があります: {self.learning_rate}")
        for key, value in (("agent.eps_first", self.eps_first), ("agent.eps_last", self.eps_last)):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(key, f"[0, 1] の範囲で指定してください: {value}")
        if self.replay and self.agent == "ddpg":
            raise ConfigError("training.replay", "DDPG は経験再生に対応していません")
        _parse_sizes(self.hidden, "agent.hidden")
        _parse_sizes(self.critic_hidden, "agent.critic_hidden")

    # --- 派生値 ---

    @property
    def is_baseline(self) -> bool:
        return self.agent in BASELINE_KINDS + ("random_power",)

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(
            noise_dbm=self.noise_dbm,
            sinr_cap_db=self.sinr_cap_db,
            p_min_dbm=self.p_min_dbm,
            p_max_dbm=self.p_max_dbm,
        )

    @property
    def resolved_output_dir(self) -> str:
        """出力先: 設定値 > 環境変数 DRLPA_OUTPUT_DIR > output/"""
        return self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR

    def to_agent_settings(self) -> AgentSettings:
        if self.is_baseline:
            raise ConfigError("agent.kind", f"ベースライン {self.agent} は学習エージェントではありません")
        return AgentSettings(
            kind=self.agent,
            feature_kind=self.feature_kind,
            i_c=self.i_c,
            n_levels=self.n_levels,
            hidden=_parse_sizes(self.hidden, "agent.hidden"),
            critic_hidden=_parse_sizes(self.critic_hidden, "agent.critic_hidden"),
            learning_rate=self.learning_rate,
            critic_learning_rate=self.critic_learning_rate,
            n_episodes=self.n_episodes,
            eps_first=self.eps_first,
            eps_last=self.eps_last,
        )

    def with_overrides(self, **changes) -> "TrainConfig":
        """一部の値を差し替えた設定（検証込み）"""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        """to_dict の出力（マニフェストの config など）から復元する。未知のキーは ConfigError"""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "不明な設定項目です")
        return cls(**data)

    # --- 読み込み ---

    @classmethod
    def from_config_manager(
        cls, cm: ConfigManager, logger: Optional[logging.Logger] = None
    ) -> "TrainConfig":
        """
        ConfigManager から設定を読み込む

        ファイルにないキーは既定値を使用する。

        Raises:
            ConfigError: 型変換または検証に失敗した場合（section.key を含む）
        """
        logger = logger or logging.getLogger(__name__)
        values: Dict[str, Any] = {}
        for f in fields(cls):
            section = f.metadata["section"]
            key = config_key(f.name)
            if not cm.has_value(section, key):
                continue
            if f.type in (int, "int"):
                values[f.name] = cm.get_int(section, key)
            elif f.type in (float, "float"):
                values[f.name] = cm.get_float(section, key)
            elif f.type in (bool, "bool"):
                values[f.name] = cm.get_boolean(section, key)
            elif f.name == "learning_rate":
                raw = cm.get_value(section, key)
                if raw and raw.strip().lower() not in ("", "none", "default"):
                    values[f.name] = cm.get_float(section, key)
            else:
                values[f.name] = cm.get_value(section, key)
        logger.debug(f"設定ファイルから {len(values)} 件の値を読み込みました")
        return cls(**values)

    def write_to(self, cm: ConfigManager) -> None:
        """現在の値を ConfigManager に書き戻す（config --show / 保存用）"""
        for f in fields(self):
            value = getattr(self, f.name)
            cm.set_value(f.metadata["section"], config_key(f.name), "" if value is None else value)


# フィールド名と config.ini のキー名が異なるもの
_KEY_ALIASES = {
    "agent": "kind",
    "feature_kind": "feature",
    "n_levels": "levels",
    "tracking_window": "window",
    "tracking_threshold": "threshold",
    "tracking_slots": "slots",
    "eval_scenarios": "scenarios",
    "eval_workers": "workers",
    "output_dir": "dir",
}


def config_key(field_name: str) -> str:
    return _KEY_ALIASES.get(field_name, field_name)


def load_train_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    logger: Optional[logging.Logger] = None,
) -> TrainConfig:
    """
    設定ファイルを読み込み、section.key 形式の上書きを適用して TrainConfig を作る

    Raises:
        FileNotFoundError: path を指定したがファイルが存在しない場合
        ConfigError: 値が不正な場合
    """
    cm = ConfigManager(path, required=path is not None)
    if overrides:
        cm.apply_overrides(overrides)
    return TrainConfig.from_config_manager(cm, logger)
