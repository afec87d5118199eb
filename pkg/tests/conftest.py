"""
pytest 共通設定とフィクスチャ
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# リポジトリルートを import パスに追加
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from config.config import TrainConfig  # noqa: E402
from core.channel import channel_from_gains, init_channel  # noqa: E402
from core.topology import build_scenario  # noqa: E402
from models.network_models import NetworkScenario, RadioConfig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_radio():
    """雑音 0.1 mW、SINR 上限なしの無線設定"""
    return RadioConfig(noise_dbm=10.0 * math.log10(0.1), sinr_cap_db=None)


@pytest.fixture
def toy_scenario(toy_radio):
    """
    2セル・セルあたり1ユーザの手計算用シナリオ

    セル0の受信機: 自基地局利得 1、セル1の基地局から 0.5
    セル1の受信機: 自基地局利得 1、セル0の基地局から 0.25
    """
    return NetworkScenario(
        n_cells=2,
        users_per_cell=1,
        r_min_km=0.01,
        r_max_km=1.0,
        bs_positions=np.zeros((2, 2)),
        ap_positions=np.zeros((2, 1, 2)),
        neighborhoods=((1,), (0,)),
        beta=np.array([[[1.0], [0.5]], [[1.0], [0.25]]]),
        radio=toy_radio,
    )


@pytest.fixture
def toy_channel(toy_scenario):
    return channel_from_gains(toy_scenario.beta)


@pytest.fixture(scope="session")
def torus_scenario():
    """既定パラメータの25セル・K=4 シナリオ"""
    return build_scenario(25, 4, 0.01, 1.0, 8.0, rng_seed=7)


@pytest.fixture
def torus_channel(torus_scenario):
    return init_channel(torus_scenario, 10.0, 0.02, 11)


@pytest.fixture
def small_config():
    """短時間で終わる学習設定"""
    return TrainConfig(
        n_episodes=3,
        slots_per_episode=2,
        log_every=1,
        eval_scenarios=2,
        eval_workers=1,
        hidden="8,8",
        critic_hidden="8",
        seed=3,
    )
