"""
オンライン追従（トラッキング）機構

直近 T_l 個の (クリティック出力 Q, 報酬 r) から正規化クリティック損失
l_c = (1/2T_l) Σ (1 - Q/r)^2 を計算し、l_c > l_max のときだけ再学習を行います。
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Deque, Iterable, Optional, Tuple

import numpy as np

from utils.errors import TrackingError

DEFAULT_WINDOW = 100
DEFAULT_THRESHOLD = 0.05
REWARD_GUARD = 1e-8


class TrackingDecision(str, Enum):
    TRAIN = "train"
    SKIP = "skip"


class TrackingController:
    """正規化クリティック損失による学習ゲート"""

    def __init__(
        self,
        window: int = DEFAULT_WINDOW,
        threshold: float = DEFAULT_THRESHOLD,
        logger: Optional[logging.Logger] = None,
    ):
        if window < 1:
            raise TrackingError(f"窓長は1以上である必要があります: {window}")
        if threshold < 0.0:
            raise TrackingError(f"閾値は非負である必要があります: {threshold}")
        self.window = int(window)
        self.threshold = float(threshold)
        self.logger = logger or logging.getLogger(__name__)
        self._pairs: Deque[Tuple[float, float]] = deque(maxlen=self.window)
        self.last_loss: Optional[float] = None

    def __len__(self) -> int:
        return len(self._pairs)

    def observe(self, q_values: Iterable[float], rewards: Iterable[float]) -> int:
        """
        (Q, r) の組を窓に追加する。|r| < 1e-8 の組は除外する

        Returns:
            int: 追加した組の数
        """
        added = 0
        for q, r in zip(np.ravel(list(q_values)), np.ravel(list(rewards))):
            if abs(r) < REWARD_GUARD:
                continue
            self._pairs.append((float(q), float(r)))
            added += 1
        return added

    def loss(self) -> float:
        if not self._pairs:
            raise TrackingError("トラッキング窓が空です")
        pairs = np.array(self._pairs)
        ratio = pairs[:, 0] / pairs[:, 1]
        return float(np.sum((1.0 - ratio) ** 2) / (2.0 * len(pairs)))

    def decide(self) -> TrackingDecision:
        self.last_loss = self.loss()
        if self.last_loss > self.threshold:
            return TrackingDecision.TRAIN
        return TrackingDecision.SKIP

    def reset(self) -> None:
        self._pairs.clear()
        self.last_loss = None


def tracking_step(controller: TrackingController, q_values, rewards) -> TrackingDecision:
    """
    窓を更新して学習/スキップを判定する

    Raises:
        TrackingError: 有効な組が1つもない場合
    """
    controller.observe(q_values, rewards)
    return controller.decide()


@dataclass
class TrackingReport:
    """オンライン追従ループの結果"""

    slots: int = 0
    trained_slots: int = 0
    losses: list = field(default_factory=list)
    sum_rates: list = field(default_factory=list)


# (scenario, channel, 実行した割当) -> リンクごとの報酬 (N, K)
RewardSource = Callable[[Any, Any, Any], np.ndarray]
