"""
乱数シード管理ユーティリティ

エピソードごと・用途ごとに独立した乱数ストリームを生成します。
同じシードからは常に同じストリームが得られます。
"""

from typing import Sequence, Union

import numpy as np

# 用途ごとのストリーム識別子
STREAM_SCENARIO = 0
STREAM_CHANNEL = 1
STREAM_AGENT = 2
STREAM_INIT = 3


def make_rng(seed: Union[int, Sequence[int]]) -> np.random.Generator:
    """
    シード（整数または整数列）から Generator を生成する

    Args:
        seed: シード値、または [基底シード, エピソード番号, 用途] のような整数列

    Returns:
        np.random.Generator: 乱数生成器
    """
    return np.random.default_rng(np.random.SeedSequence(seed))


def child_seed(seed: int, *keys: int) -> int:
    """基底シードとキー列から派生シード（32bit整数）を得る"""
    seq = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(seq.generate_state(1)[0])
