"""PPO training loop and deterministic policy evaluation.

Episodes last a fixed number of control steps from a straight-line start.
The target velocity follows the schedule: a block of warmup episodes at a
fixed target, then cycling through the target list, one value per episode
(unless ``fixed_velocity`` pins it). Rollouts of ``steps_per_update``
transitions are collected across episode boundaries; GAE runs per contiguous
segment, bootstrapping with the value estimate only when a segment was cut
mid-episode by the rollout window.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..csvio import IncrementalCsvWriter
from ..dynamics import RobotConfig
from ..errors import SimulationDiverged
from ..metrics import EvalResult, PowerTrace, summarize_run
from .checkpoint import save_checkpoint
from .env import RunningNorm, SnakeEnv, decode_action, observe
from .nets import Adam, PolicyNet, sample_action
from .ppo import RolloutBatch, TrainConfig, compute_gae, ppo_update

TRAIN_LOG_SCHEMA = "train-log"
TRAIN_LOG_HEADER = ("update", "episode", "target_velocity", "episode_return", "mean_velocity", "mean_power")


def velocity_for_episode(episode_index: int, cfg: TrainConfig) -> float:
    """Target velocity for a 0-based episode index."""
    if cfg.fixed_velocity is not None:
        return cfg.fixed_velocity
    if episode_index < cfg.warmup_episodes:
        return cfg.initial_velocity
    return cfg.velocity_cycle[(episode_index - cfg.warmup_episodes) % len(cfg.velocity_cycle)]


def default_eval_targets() -> np.ndarray:
    """45 evaluation targets: 0.005-spaced grid over (0.025, 0.25].

    The inclusive range would hold 46 points; the lower endpoint is dropped
    to match the 45-point protocol (recorded in run manifests).
    """
    return np.round(0.025 + 0.005 * np.arange(1, 46), 10)


def train(
    robot_config: RobotConfig = RobotConfig(),
    cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    out_dir=None,
    log_path=None,
    verbose: bool = False,
):
    """Train a policy; returns (net, obs_norm, log_rows).

    Log rows (one per completed episode) hold: update index, episode index,
    target velocity, episode return, displacement-based mean velocity, and
    mean actuation power. Checkpoints are written every
    ``cfg.checkpoint_every`` updates when ``out_dir`` is given. Fully
    deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    net_rng, act_rng, shuffle_rng = rng.spawn(3)

    env = SnakeEnv(robot_config)
    obs_dim, act_dim = env.obs_dim, env.num_joints
    net = PolicyNet(obs_dim, act_dim, rng=net_rng, log_std_init=cfg.log_std_init)
    norm = RunningNorm(obs_dim)
    optimizer = Adam(lr=cfg.learning_rate)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    log_writer = (
        IncrementalCsvWriter(log_path, TRAIN_LOG_SCHEMA, TRAIN_LOG_HEADER) if log_path is not None else None
    )

    log_rows: list[tuple] = []
    episode_index = 0
    update_index = 0
    steps_done = 0

    # live episode bookkeeping
    target_v = velocity_for_episode(episode_index, cfg)
    raw_obs = env.reset(target_v)
    episode_steps = 0
    episode_return = 0.0
    episode_power = 0.0
    episode_start_pos = env.head_position()

    def finish_episode(diverged: bool):
        nonlocal episode_index, raw_obs, episode_steps, episode_return, episode_power, episode_start_pos, target_v
        duration = max(episode_steps, 1) * robot_config.control_dt
        displacement = float(np.hypot(*(env.head_position() - episode_start_pos))) if not diverged else 0.0
        row = (
            update_index,
            episode_index,
            target_v,
            episode_return,
            displacement / duration,
            episode_power / max(episode_steps, 1),
        )
        log_rows.append(row)
        if log_writer is not None:
            log_writer.write_row([repr(float(v)) if isinstance(v, float) else str(v) for v in row])
        episode_index += 1
        target_v = velocity_for_episode(episode_index, cfg)
        raw_obs = env.reset(target_v)
        episode_steps = 0
        episode_return = 0.0
        episode_power = 0.0
        episode_start_pos = env.head_position()

    while steps_done < cfg.total_steps:
        horizon = min(cfg.steps_per_update, cfg.total_steps - steps_done)
        obs_buf = np.empty((horizon, obs_dim))
        act_buf = np.empty((horizon, act_dim))
        logp_buf = np.empty(horizon)
        rew_buf = np.empty(horizon)
        val_buf = np.empty(horizon)
        start_buf = np.zeros(horizon, dtype=bool)
        seg_bounds: list[int] = [0]  # segment start indices within the buffer
        seg_terminal: list[bool] = []

        t = 0
        while t < horizon:
            if episode_steps == 0:
                start_buf[t] = True
            norm.update(raw_obs)
            n_obs = norm.normalize(raw_obs)
            mean, value = net.forward(n_obs[None, :])
            action, raw_sample, logp = sample_action(mean[0], net.log_std, act_rng)

            obs_buf[t] = n_obs
            act_buf[t] = raw_sample
            logp_buf[t] = logp
            val_buf[t] = value[0]

            try:
                raw_obs, reward, extras = env.step(action)
                diverged = False
            except SimulationDiverged:
                reward = 0.0
                extras = {"power": 0.0}
                diverged = True
            rew_buf[t] = reward
            episode_return += reward
            episode_power += extras["power"]
            episode_steps += 1
            t += 1
            steps_done += 1

            if diverged or episode_steps >= cfg.episode_length:
                seg_bounds.append(t)
                seg_terminal.append(True)
                finish_episode(diverged)
            elif t == horizon:
                seg_bounds.append(t)
                seg_terminal.append(False)

        # GAE per contiguous segment
        adv_buf = np.empty(horizon)
        ret_buf = np.empty(horizon)
        for k in range(len(seg_terminal)):
            lo, hi = seg_bounds[k], seg_bounds[k + 1]
            if lo == hi:
                continue
            if seg_terminal[k]:
                bootstrap = 0.0
            else:
                _, next_value = net.forward(norm.normalize(raw_obs)[None, :])
                bootstrap = float(next_value[0])
            adv, ret = compute_gae(rew_buf[lo:hi], val_buf[lo:hi], bootstrap, cfg.gamma, cfg.gae_lambda)
            adv_buf[lo:hi] = adv
            ret_buf[lo:hi] = ret

        batch = RolloutBatch(
            observations=obs_buf,
            actions=act_buf,
            log_probs=logp_buf,
            rewards=rew_buf,
            values=val_buf,
            advantages=adv_buf,
            returns=ret_buf,
            episode_starts=start_buf,
        )
        stats = ppo_update(net, batch, cfg, optimizer, shuffle_rng)
        update_index += 1

        if verbose:
            recent = log_rows[-5:]
            mean_ret = np.mean([r[3] for r in recent]) if recent else float("nan")
            print(
                f"update {update_index}: steps {steps_done}, episodes {episode_index}, "
                f"recent return {mean_ret:.2f}, loss {stats.get('loss', float('nan')):.4f}"
            )
        if out_dir is not None and (update_index % cfg.checkpoint_every == 0):
            save_checkpoint(out_dir / f"checkpoint_{update_index:05d}.sgl", net, norm)

    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint_final.sgl", net, norm)
    if log_writer is not None:
        log_writer.close()
    return net, norm, log_rows


def rollout_policy(
    net: PolicyNet,
    config: RobotConfig,
    target_velocity: float,
    obs_norm: RunningNorm | None = None,
    steps: int = 1000,
) -> tuple[PowerTrace, np.ndarray]:
    """Deterministic rollout (action = clipped mean, no sampling)."""
    env = SnakeEnv(config)
    raw_obs = env.reset(target_velocity)
    nj = env.num_joints
    torques = np.empty((steps, nj))
    joint_vel = np.empty((steps, nj))
    head_speed = np.empty(steps)
    head_pos = np.empty((steps + 1, 2))
    head_pos[0] = env.head_position()
    for i in range(steps):
        n_obs = obs_norm.normalize(raw_obs) if obs_norm is not None else raw_obs
        mean, _ = net.forward(n_obs[None, :])
        action = np.clip(mean[0], -1.5, 1.5)
        raw_obs, _, extras = env.step(action)
        torques[i] = extras["torques"]
        joint_vel[i] = extras["joint_velocities"]
        head_speed[i] = extras["head_velocity"]
        head_pos[i + 1] = env.head_position()
    return PowerTrace.from_torques(torques, joint_vel, head_speed, config.gear), head_pos


def evaluate_policy(
    net: PolicyNet,
    config: RobotConfig = RobotConfig(),
    targets=None,
    obs_norm: RunningNorm | None = None,
    steps: int = 1000,
    warmup: int = 200,
) -> list[EvalResult]:
    """Score the policy at each target velocity with the run protocol.

    1000-step deterministic rollouts, first 200 steps ignored; one EvalResult
    per target, replay-identical for the same inputs.
    """
    if targets is None:
        targets = default_eval_targets()
    results = []
    for v_t in targets:
        trace, head_pos = rollout_policy(net, config, float(v_t), obs_norm, steps)
        window = head_pos[steps] - head_pos[warmup]
        distance = float(np.hypot(window[0], window[1]))
        duration = (steps - warmup) * config.control_dt
        results.append(summarize_run(trace, config, distance, duration, warmup))
    return results
