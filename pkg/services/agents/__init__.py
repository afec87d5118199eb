"""
エージェントパッケージ

特徴量抽出・行動コーデック・経験再生と、REINFORCE / DQL / DDPG の各エージェントを提供します。
"""

from .base import PowerAgent
from .ddpg import DdpgAgent
from .dql import DqlAgent
from .factory import create_agent, load_agent
from .reinforce import ReinforceAgent
from .replay import ReplayBuffer

__all__ = [
    "PowerAgent",
    "ReinforceAgent",
    "DqlAgent",
    "DdpgAgent",
    "ReplayBuffer",
    "create_agent",
    "load_agent",
]
