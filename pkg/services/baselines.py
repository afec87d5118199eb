"""
ベースライン電力割当（最大電力・ランダム電力）
"""

from enum import Enum
from typing import Optional, Union

import numpy as np

from models.network_models import NetworkScenario, PowerAllocation
from utils.errors import ConfigError


class BaselineKind(str, Enum):
    MAX_POWER = "max_power"
    RANDOM = "random"

    @classmethod
    def parse(cls, value: Union[str, "BaselineKind"]) -> "BaselineKind":
        if isinstance(value, cls):
            return value
        if value == "random_power":
            return cls.RANDOM
        try:
            return cls(value)
        except ValueError:
            raise ConfigError("agent.kind", f"不明なベースラインです: {value}")


def allocate(
    kind: Union[str, BaselineKind],
    scenario: NetworkScenario,
    rng: Optional[np.random.Generator] = None,
) -> PowerAllocation:
    """
    ベースライン方式で全リンクの送信電力を決める

    max_power は全リンク P_max、random は各リンク独立に U(0, P_max)。
    """
    kind = BaselineKind.parse(kind)
    p_max = scenario.radio.p_max_mw
    if kind is BaselineKind.MAX_POWER:
        return PowerAllocation.full(scenario, p_max)
    if rng is None:
        raise ValueError("random ベースラインには乱数生成器が必要です")
    shape = (scenario.n_cells, scenario.users_per_cell)
    return PowerAllocation(rng.uniform(0.0, p_max, size=shape), p_max)
