"""
エージェントの生成と復元
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from core.neural import MlpNetwork
from models.agent_models import ActionCodec, AgentSettings
from models.network_models import RadioConfig
from services.agents.base import PowerAgent, read_checkpoint
from services.agents.codec import continuous_codec, discrete_codec
from services.agents.ddpg import DdpgAgent
from services.agents.dql import DqlAgent
from services.agents.features import feature_dim
from services.agents.reinforce import ReinforceAgent
from utils.errors import CheckpointError
from utils.seeding import STREAM_INIT, make_rng


def create_agent(
    settings: AgentSettings,
    radio: RadioConfig,
    seed: int,
    logger: Optional[logging.Logger] = None,
) -> PowerAgent:
    """
    設定に従って初期化済みのエージェントを生成する

    Args:
        settings: エージェント構成
        radio: 無線パラメータ（P_min, P_max）
        seed: 初期化用シード
        logger: ロガー

    Returns:
        PowerAgent: 生成したエージェント
    """
    rng = make_rng([seed, STREAM_INIT])
    in_dim = feature_dim(settings.i_c, settings.feature_kind)
    hidden = list(settings.hidden)
    if settings.kind == "reinforce":
        codec = discrete_codec(radio, settings.n_levels)
        net = MlpNetwork.build([in_dim, *hidden, settings.n_levels], head="softmax", rng=rng)
        return ReinforceAgent(settings, codec, net, logger)
    if settings.kind == "dql":
        codec = discrete_codec(radio, settings.n_levels)
        net = MlpNetwork.build([in_dim, *hidden, settings.n_levels], head="linear", rng=rng)
        return DqlAgent(settings, codec, net, logger)
    codec = continuous_codec(radio)
    actor = MlpNetwork.build(
        [in_dim, *hidden, 1], head="scaled_sigmoid", rng=rng, output_scale=radio.p_max_mw
    )
    critic = MlpNetwork.build([settings.i_c, *settings.critic_hidden, 1], head="linear", rng=rng)
    return DdpgAgent(settings, codec, actor, critic, logger)


def load_agent(path: Union[str, Path], logger: Optional[logging.Logger] = None) -> PowerAgent:
    """チェックポイントからエージェントを復元する"""
    data = read_checkpoint(path)
    try:
        s = data["settings"]
        settings = AgentSettings(
            kind=data["kind"],
            feature_kind=s["feature_kind"],
            i_c=int(s["i_c"]),
            n_levels=int(s["n_levels"]),
            hidden=tuple(s["hidden"]),
            critic_hidden=tuple(s["critic_hidden"]),
            learning_rate=s.get("learning_rate"),
            critic_learning_rate=float(s["critic_learning_rate"]),
            n_episodes=int(s["n_episodes"]),
            eps_first=float(s["eps_first"]),
            eps_last=float(s["eps_last"]),
        )
        c = data["codec"]
        codec = ActionCodec(
            c["mode"], float(c["p_min_mw"]), float(c["p_max_mw"]), int(c.get("n_levels", 0))
        )
        networks = {name: MlpNetwork.from_dict(d) for name, d in data["networks"].items()}
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"チェックポイントの内容が不正です: {e}") from e

    if settings.kind == "reinforce":
        agent: PowerAgent = ReinforceAgent(settings, codec, networks["policy"], logger)
    elif settings.kind == "dql":
        agent = DqlAgent(settings, codec, networks["q"], logger)
    else:
        agent = DdpgAgent(settings, codec, networks["actor"], networks["critic"], logger)
    if agent.input_dim != next(iter(networks.values())).input_dim:
        raise CheckpointError("ネットワーク入力次元が特徴量設定と一致しません")
    agent.start_episode(int(data.get("schedule", {}).get("episode", 1)))
    return agent


def parameter_fingerprint(agent: PowerAgent) -> float:
    """全パラメータの和（再現性確認用）"""
    total = 0.0
    for net in agent.networks().values():
        for layer in net.layers:
            total += float(np.sum(layer.weight)) + float(np.sum(layer.bias))
    return total
