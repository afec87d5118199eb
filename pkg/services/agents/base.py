"""
エージェント基底クラス

全リンクで1組のパラメータを共有するエージェントの共通インターフェースと、
チェックポイントの保存・復元を提供します。
"""

import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from core.neural import MlpNetwork
from models.agent_models import ActionCodec, AgentSettings, TransitionBatch, UpdateResult
from services.agents.features import feature_dim
from utils.errors import CheckpointError

AGENT_FORMAT_VERSION = 1


class PowerAgent(ABC):
    """
    電力制御エージェントの基底クラス

    act は観測行列 (B, 入力次元) を受け取り、各行に対する送信電力 [mW] と
    学習に用いる行動表現（離散インデックスまたは電力）を返す。
    """

    kind = ""
    uses_critic = False
    supports_replay = True

    def __init__(
        self,
        settings: AgentSettings,
        codec: ActionCodec,
        logger: Optional[logging.Logger] = None,
    ):
        self.settings = settings
        self.codec = codec
        self.logger = logger or logging.getLogger(__name__)
        self.episode = 1

    @property
    def feature_kind(self) -> str:
        return self.settings.feature_kind

    @property
    def i_c(self) -> int:
        return self.settings.i_c

    @property
    def input_dim(self) -> int:
        return feature_dim(self.settings.i_c, self.settings.feature_kind)

    @abstractmethod
    def act(
        self,
        states: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        explore: bool = False,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """観測から (送信電力, 行動表現) を求める"""

    @abstractmethod
    def update(self, batch: TransitionBatch) -> UpdateResult:
        """共有パラメータを1回更新する"""

    def sequential_updates(self, batch: TransitionBatch) -> List[UpdateResult]:
        """遷移を1つずつ順に更新する"""
        return [self.update(batch.subset(i)) for i in range(len(batch))]

    @abstractmethod
    def networks(self) -> Dict[str, MlpNetwork]:
        """名前付きネットワーク"""

    def decide(self, state: np.ndarray) -> float:
        """1リンク分の分散実行（探索なし）"""
        powers, _ = self.act(np.asarray(state, dtype=float)[None, :])
        return float(powers[0])

    def start_episode(self, episode: int) -> None:
        self.episode = int(episode)

    def frozen_copy(self) -> "PowerAgent":
        """推論専用の複製"""
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        clone._set_networks({name: net.copy() for name, net in self.networks().items()})
        return clone

    @abstractmethod
    def _set_networks(self, networks: Dict[str, MlpNetwork]) -> None:
        pass

    # --- チェックポイント ---

    def to_checkpoint(self) -> Dict[str, Any]:
        s = self.settings
        return {
            "format_version": AGENT_FORMAT_VERSION,
            "kind": self.kind,
            "settings": {
                "feature_kind": s.feature_kind,
                "i_c": s.i_c,
                "n_levels": s.n_levels,
                "hidden": list(s.hidden),
                "critic_hidden": list(s.critic_hidden),
                "learning_rate": s.learning_rate,
                "critic_learning_rate": s.critic_learning_rate,
                "n_episodes": s.n_episodes,
                "eps_first": s.eps_first,
                "eps_last": s.eps_last,
            },
            "codec": {
                "mode": self.codec.mode,
                "p_min_mw": self.codec.p_min_mw,
                "p_max_mw": self.codec.p_max_mw,
                "n_levels": self.codec.n_levels,
            },
            "schedule": {"episode": self.episode},
            "networks": {name: net.to_dict() for name, net in self.networks().items()},
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_checkpoint(), f)
        self.logger.info(f"エージェントのチェックポイントを保存しました: {path}")
        return path


def read_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    """チェックポイント JSON を読み込み、形式バージョンを検証する"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"チェックポイントが見つかりません: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"チェックポイントの JSON が不正です: {path}") from e
    if data.get("format_version") != AGENT_FORMAT_VERSION:
        raise CheckpointError(
            f"未対応のチェックポイント形式バージョンです: {data.get('format_version')}"
        )
    return data
