"""
経験再生バッファ
"""

import logging
from typing import List, Optional

import numpy as np

from models.agent_models import Transition
from utils.errors import ReplayError

DEFAULT_CAPACITY = 10_000
DEFAULT_BATCH_SIZE = 32


class ReplayBuffer:
    """
    固定長のリングバッファ

    容量に達すると最も古い遷移を上書きする。サンプリングはバッチ内で非復元の一様抽出。
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, logger: Optional[logging.Logger] = None):
        if capacity < 1:
            raise ReplayError(f"容量は1以上である必要があります: {capacity}")
        self.capacity = int(capacity)
        self.logger = logger or logging.getLogger(__name__)
        self._items: List[Optional[Transition]] = [None] * self.capacity
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def cursor(self) -> int:
        return self._cursor

    def push(self, transition: Transition) -> None:
        self._items[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def extend(self, transitions) -> None:
        for t in transitions:
            self.push(t)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """
        一様ミニバッチを抽出する

        Raises:
            ReplayError: 格納数がバッチサイズ未満の場合
        """
        if batch_size < 1:
            raise ReplayError(f"バッチサイズは1以上である必要があります: {batch_size}")
        if self._size < batch_size:
            raise ReplayError(f"バッファの格納数 {self._size} がバッチサイズ {batch_size} 未満です")
        indices = rng.choice(self._size, size=batch_size, replace=False)
        return [self._items[i] for i in indices]

    def contents(self) -> List[Transition]:
        """古い順の格納内容"""
        if self._size < self.capacity:
            return list(self._items[: self._size])
        return list(self._items[self._cursor :] + self._items[: self._cursor])


def replay_push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push(transition)


def replay_sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> List[Transition]:
    return buffer.sample(batch_size, rng)
