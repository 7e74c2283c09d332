"""Clipped-surrogate PPO with generalized advantage estimation.

One update consumes a rollout batch: advantages are normalized within the
batch, then for a fixed number of epochs the shuffled minibatches ascend

    L = E[min(rho * A, clip(rho, 1 +/- eps) * A)] - c_v * value_loss + c_e * entropy

where rho is the probability ratio against the stored log-probs. Gradients
are computed analytically (see nets.py) and clipped by global norm. A
non-finite loss aborts the update and restores the pre-update parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .nets import Adam, PolicyNet, clip_grad_norm, gaussian_log_prob

LOG_2PI_E = float(np.log(2.0 * np.pi * np.e))


def compute_gae(rewards, values, bootstrap_value: float, gamma: float, lam: float):
    """GAE over one contiguous segment; returns (advantages, returns).

    ``values`` are V(s_t) for the segment's states; ``bootstrap_value`` is
    V(s_T) of the state after the last step (0 at a terminal).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape:
        raise ValidationError(f"rewards and values must align, got {rewards.shape} vs {values.shape}")
    n = len(rewards)
    advantages = np.empty(n)
    gae = 0.0
    next_value = bootstrap_value
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        gae = delta + gamma * lam * gae
        advantages[t] = gae
        next_value = values[t]
    return advantages, advantages + values


@dataclass
class RolloutBatch:
    """Aligned trajectory arrays for one update; episode starts are marked."""

    observations: np.ndarray  # (T, obs_dim), already normalized
    actions: np.ndarray  # (T, act_dim) raw Gaussian samples (pre-clip)
    log_probs: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)
    values: np.ndarray  # (T,)
    advantages: np.ndarray  # (T,)
    returns: np.ndarray  # (T,)
    episode_starts: np.ndarray  # (T,) bool

    def __post_init__(self):
        n = len(self.observations)
        for name in ("actions", "log_probs", "rewards", "values", "advantages", "returns", "episode_starts"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"RolloutBatch.{name} length != {n}")

    def __len__(self) -> int:
        return len(self.observations)


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults match the full-scale protocol."""

    total_steps: int = 3_000_000
    steps_per_update: int = 2048
    epochs_per_update: int = 10
    minibatch_size: int = 256
    clip_epsilon: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    episode_length: int = 1000  # control steps
    # velocity schedule: warmup episodes at a fixed target, then cycling
    warmup_episodes: int = 100
    initial_velocity: float = 0.1
    velocity_cycle: tuple = (0.05, 0.10, 0.15, 0.20, 0.25)
    fixed_velocity: float | None = None  # overrides the schedule entirely
    # optimization details not pinned by the protocol
    vf_coef: float = 0.5
    ent_coef: float = 0.0015
    grad_clip: float = 0.5
    log_std_init: float = -0.5
    checkpoint_every: int = 50  # updates

    def __post_init__(self):
        if self.steps_per_update % self.minibatch_size != 0:
            raise ValidationError(
                f"steps_per_update ({self.steps_per_update}) must be divisible by "
                f"minibatch_size ({self.minibatch_size})"
            )


def ppo_loss_and_grads(net: PolicyNet, obs, actions, old_log_probs, advantages, returns, cfg: TrainConfig):
    """Total loss and analytic gradients for one minibatch.

    Returns (loss, grads aligned with net.parameters(), stats dict).
    """
    batch = len(obs)
    mean, pcache = net.policy.forward(obs)
    value, vcache = net.value.forward(obs)
    value = value[:, 0]
    std = np.exp(net.log_std)

    z = (actions - mean) / std
    log_probs = gaussian_log_prob(mean, net.log_std, actions)
    ratio = np.exp(log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * advantages
    surrogate = np.minimum(unclipped, clipped)
    value_err = value - returns
    entropy = float(np.sum(net.log_std + 0.5 * LOG_2PI_E))
    loss = float(-surrogate.mean() + cfg.vf_coef * 0.5 * np.mean(value_err**2) - cfg.ent_coef * entropy)

    # d(-surrogate)/d(log_prob): only where the unclipped branch is selected
    active = unclipped <= clipped
    g_logp = np.where(active, ratio * advantages, 0.0) / batch
    d_mean = -(g_logp[:, None] * z / std)
    d_log_std = -np.sum(g_logp[:, None] * (z * z - 1.0), axis=0) - cfg.ent_coef
    d_value = (cfg.vf_coef * value_err / batch)[:, None]

    pol_grads, _ = net.policy.backward(pcache, d_mean)
    val_grads, _ = net.value.backward(vcache, d_value)

    grads = []
    for dw, db in pol_grads:
        grads.extend((dw, db))
    for dw, db in val_grads:
        grads.extend((dw, db))
    grads.append(d_log_std)

    stats = {
        "clip_fraction": float(np.mean(~active)),
        "approx_kl": float(np.mean(old_log_probs - log_probs)),
        "entropy": entropy,
    }
    return loss, grads, stats


def ppo_update(
    net: PolicyNet,
    batch: RolloutBatch,
    cfg: TrainConfig,
    optimizer: Adam,
    rng: np.random.Generator,
) -> dict:
    """Run the epoch/minibatch loop for one collected batch.

    Advantages are normalized to zero mean / unit variance within the batch
    before use. On a non-finite loss the whole update is rolled back and the
    batch is discarded with a warning.
    """
    n = len(batch)
    adv = batch.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    snapshot = net.copy_parameters()
    opt_state = (optimizer.t, None if optimizer.m is None else [m.copy() for m in optimizer.m],
                 None if optimizer.v is None else [v.copy() for v in optimizer.v])

    last_stats: dict = {}
    losses = []
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start : start + cfg.minibatch_size]
            loss, grads, stats = ppo_loss_and_grads(
                net,
                batch.observations[idx],
                batch.actions[idx],
                batch.log_probs[idx],
                adv[idx],
                batch.returns[idx],
                cfg,
            )
            if not np.isfinite(loss):
                net.set_parameters(snapshot)
                optimizer.t = opt_state[0]
                optimizer.m = opt_state[1]
                optimizer.v = opt_state[2]
                warnings.warn(f"non-finite PPO loss ({loss}); update aborted, batch discarded")
                return {"aborted": True, "loss": loss}
            clip_grad_norm(grads, cfg.grad_clip)
            optimizer.step(net.parameters(), grads)
            losses.append(loss)
            last_stats = stats

    last_stats["aborted"] = False
    last_stats["loss"] = float(np.mean(losses))
    return last_stats
