"""RL view of the simulator: observations, action decoding, reward.

The observation is the concatenation (joint angles, joint velocities, head
speed, actuator torques, target velocity): 26 numbers for the 8-joint robot.
Actions are 8 values in [-1.5, 1.5] mapping linearly onto the +/-90 degree
joint range.

The reward multiplies a velocity-tracking term by a power-economy term:

    r = max(0, 1 - |v_t - v_1| / a1)^(1/a2) * (1 - p_hat)^(b1^-2)

Both factors live in [0, 1]. The base of the velocity term is clamped at
zero: beyond the a1 band the raw expression goes negative and a fractional
power of it would leave the reals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import RobotConfig, RobotModel, SimState, StepInfo, build_robot, reset, step
from ..errors import ValidationError
from ..metrics import normalized_power

ACTION_BOUND = 1.5


@dataclass(frozen=True)
class RewardParams:
    """Shape constants of the reward: band width, steepness, power-curve slope."""

    a1: float = 0.2  # velocity band half-width, m/s
    a2: float = 0.2  # inverse exponent of the velocity term
    b1: float = 0.6  # power-curve slope; exponent is b1**-2

    def __post_init__(self):
        for name in ("a1", "a2", "b1"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"RewardParams.{name} must be positive, got {getattr(self, name)}")


def velocity_reward(target_velocity: float, head_velocity: float, params: RewardParams = RewardParams()) -> float:
    base = max(0.0, 1.0 - abs(target_velocity - head_velocity) / params.a1)
    return base ** (1.0 / params.a2)


def power_reward(p_hat: float, r_max: float, params: RewardParams = RewardParams()) -> float:
    p_hat = min(max(p_hat, 0.0), 1.0)
    return r_max * (1.0 - p_hat) ** (params.b1**-2)


def combined_reward(
    target_velocity: float, head_velocity: float, p_hat: float, params: RewardParams = RewardParams()
) -> float:
    """Velocity term times power term; the velocity term caps the power term."""
    return power_reward(p_hat, velocity_reward(target_velocity, head_velocity, params), params)


def observation_dim(num_joints: int = 8) -> int:
    return 3 * num_joints + 2


def observe(state: SimState, step_info: StepInfo | None, target_velocity: float) -> np.ndarray:
    """Assemble the observation vector in its fixed field order.

    Right after a reset there is no StepInfo yet; torques and head speed fall
    back to the state's stored values (zeros at rest).
    """
    if step_info is not None:
        torques = step_info.torques
        head_speed = step_info.head_velocity
    else:
        torques = state.applied_torques
        head_speed = float(np.hypot(state.link_velocities[0, 0], state.link_velocities[0, 1]))
    return np.concatenate(
        [
            state.joint_angles,
            state.joint_velocities,
            [head_speed],
            torques,
            [target_velocity],
        ]
    )


def decode_action(values) -> np.ndarray:
    """Map action values in [-1.5, 1.5] linearly to joint targets in [-pi/2, pi/2]."""
    values = np.clip(np.asarray(values, dtype=float), -ACTION_BOUND, ACTION_BOUND)
    return values / ACTION_BOUND * (math.pi / 2)


class SnakeEnv:
    """Episode wrapper around the simulator for the PPO trainer.

    Deterministic: all stochasticity lives in the policy. Rewards follow the
    combined velocity/power formula; per-step power bookkeeping is exposed via
    the info dict.
    """

    def __init__(self, config: RobotConfig = RobotConfig(), reward_params: RewardParams = RewardParams()):
        self.config = config
        self.reward_params = reward_params
        self.model: RobotModel = build_robot(config)
        self.state: SimState | None = None
        self.target_velocity = 0.0

    @property
    def num_joints(self) -> int:
        return self.model.num_joints

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.model.num_joints)

    def reset(self, target_velocity: float) -> np.ndarray:
        self.state = reset(self.model)
        self.target_velocity = target_velocity
        return observe(self.state, None, target_velocity)

    def head_position(self) -> np.ndarray:
        return self.state.link_positions[0].copy()

    def step(self, action_values) -> tuple[np.ndarray, float, dict]:
        """Apply one action for one control step; returns (obs, reward, info)."""
        targets = decode_action(action_values)
        self.state, info = step(self.model, self.state, targets)
        forces = info.torques / self.config.gear
        p_hat = normalized_power(forces, info.joint_velocities, self.config)
        reward = combined_reward(self.target_velocity, info.head_velocity, p_hat, self.reward_params)
        extras = {
            "head_velocity": info.head_velocity,
            "power": info.instantaneous_power,
            "p_hat": p_hat,
            "torques": info.torques,
            "joint_velocities": info.joint_velocities,
            "sim_time": self.state.sim_time,
        }
        return observe(self.state, info, self.target_velocity), reward, extras


class RunningNorm:
    """Running per-dimension mean/variance standardization of observations.

    Welford-style batched updates during training; freeze by simply not
    calling update anymore (evaluation and checkpoints use the stored stats).
    """

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = eps
        self.clip = clip
        self.eps = eps

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        b_count = batch.shape[0]
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * (b_count / total)
        m_a = self.var * self.count
        m_b = b_var * b_count
        self.var = (m_a + m_b + delta**2 * self.count * b_count / total) / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var + self.eps)
        return np.clip(z, -self.clip, self.clip)
