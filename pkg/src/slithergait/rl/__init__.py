"""PPO-based gait learning: environment adapter, policy network, training."""

from .checkpoint import load_checkpoint, save_checkpoint
from .env import (
    ACTION_BOUND,
    RewardParams,
    RunningNorm,
    SnakeEnv,
    combined_reward,
    decode_action,
    observation_dim,
    observe,
    power_reward,
    velocity_reward,
)
from .nets import Adam, Mlp, PolicyNet, gaussian_log_prob, policy_forward, sample_action
from .ppo import RolloutBatch, TrainConfig, compute_gae, ppo_update
from .train import default_eval_targets, evaluate_policy, train, velocity_for_episode

__all__ = [
    "ACTION_BOUND",
    "RewardParams",
    "RunningNorm",
    "SnakeEnv",
    "combined_reward",
    "decode_action",
    "observation_dim",
    "observe",
    "power_reward",
    "velocity_reward",
    "Adam",
    "Mlp",
    "PolicyNet",
    "gaussian_log_prob",
    "policy_forward",
    "sample_action",
    "RolloutBatch",
    "TrainConfig",
    "compute_gae",
    "ppo_update",
    "default_eval_targets",
    "evaluate_policy",
    "train",
    "velocity_for_episode",
    "load_checkpoint",
    "save_checkpoint",
]
