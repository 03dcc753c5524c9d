from vdb_lab.rl.expert import (
    DemoSet,
    ExpertConfig,
    ExpertResult,
    collect_demos,
    load_demos,
    replay_demos,
    save_demos,
    train_expert,
)
from vdb_lab.rl.gae import gae_advantages, normalize_advantages
from vdb_lab.rl.policy import GaussianPolicy, ValueNet
from vdb_lab.rl.ppo import PpoConfig, PpoStats, ppo_surrogate_loss, ppo_update, value_loss
from vdb_lab.rl.rollout import REWARD_SOURCES, TransitionBatch, collect

__all__ = [
    "DemoSet",
    "ExpertConfig",
    "ExpertResult",
    "GaussianPolicy",
    "PpoConfig",
    "PpoStats",
    "REWARD_SOURCES",
    "TransitionBatch",
    "ValueNet",
    "collect",
    "collect_demos",
    "gae_advantages",
    "load_demos",
    "normalize_advantages",
    "ppo_surrogate_loss",
    "ppo_update",
    "replay_demos",
    "save_demos",
    "train_expert",
    "value_loss",
]
