"""Exhaustive gait-parameter grid search evaluated through the simulator.

The default grid is the 12 x 4 x 15 x 9 = 6480-point Cartesian product over
(omega, y, amplitude, lambda). Each point is scored by a 1000-step rollout
whose first 200 control steps are discarded as acceleration transient; the
remaining 800 steps feed the power metrics, and velocity is the net head
displacement over the evaluated window divided by its duration.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .csvio import IncrementalCsvWriter
from .dynamics import RobotConfig, build_robot, reset, step
from .errors import SimulationDiverged, ValidationError
from .gait import GaitParams, targets_at
from .metrics import EvalResult, PowerTrace, summarize_run

DEFAULT_STEPS = 1000
DEFAULT_WARMUP = 200


def _float_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass(frozen=True)
class GridSpec:
    """Axis values for the parameter grid (defaults reproduce the full sweep)."""

    omega_values: tuple = _float_range(0.25, 3.0, 0.25)
    y_values: tuple = (0.1, 0.2, 0.3, 0.4)
    amplitude_values: tuple = _float_range(40.0, 180.0, 10.0)
    lambda_values: tuple = _float_range(40.0, 120.0, 10.0)

    @property
    def cardinality(self) -> int:
        return (
            len(self.omega_values) * len(self.y_values) * len(self.amplitude_values) * len(self.lambda_values)
        )


def enumerate_grid(spec: GridSpec = GridSpec()) -> list[GaitParams]:
    """All grid points in deterministic order: omega outer, then y, A, lambda."""
    return [
        GaitParams(omega=o, y=y, amplitude_deg=a, lambda_deg=l)
        for o, y, a, l in itertools.product(
            spec.omega_values, spec.y_values, spec.amplitude_values, spec.lambda_values
        )
    ]


def rollout_gait(
    params: GaitParams,
    config: RobotConfig,
    steps: int = DEFAULT_STEPS,
) -> tuple[PowerTrace, np.ndarray]:
    """Drive a fresh robot with the gait for `steps` control steps.

    Returns the actuation trace and the head positions after each step
    (steps + 1 rows, including the initial pose).
    """
    model = build_robot(config)
    state = reset(model)
    nj = model.num_joints
    torques = np.empty((steps, nj))
    joint_vel = np.empty((steps, nj))
    head_speed = np.empty(steps)
    head_pos = np.empty((steps + 1, 2))
    head_pos[0] = state.link_positions[0]
    for i in range(steps):
        targets = targets_at(params, state.sim_time, nj)
        state, info = step(model, state, targets)
        torques[i] = info.torques
        joint_vel[i] = info.joint_velocities
        head_speed[i] = info.head_velocity
        head_pos[i + 1] = state.link_positions[0]
    return PowerTrace.from_torques(torques, joint_vel, head_speed, config.gear), head_pos


def evaluate_gait(
    params: GaitParams,
    config: RobotConfig = RobotConfig(),
    steps: int = DEFAULT_STEPS,
    warmup: int = DEFAULT_WARMUP,
    seed=None,
) -> EvalResult:
    """Score one gait: 1000-step run, first 200 steps ignored.

    Deterministic given (params, config); `seed` is accepted for interface
    symmetry with the stochastic optimizers but has no effect. A diverging
    simulation raises SimulationDiverged with the offending params attached.
    """
    if steps <= warmup:
        raise ValidationError(f"steps ({steps}) must exceed warmup ({warmup})")
    try:
        trace, head_pos = rollout_gait(params, config, steps)
    except SimulationDiverged as err:
        err.params = params
        raise
    window = head_pos[steps] - head_pos[warmup]
    distance = float(math.hypot(window[0], window[1]))
    duration = (steps - warmup) * config.control_dt
    return summarize_run(trace, config, distance, duration, warmup)


GRID_CSV_SCHEMA = "grid"
GRID_CSV_HEADER = GaitParams.CSV_HEADER + EvalResult.CSV_HEADER


def grid_result_row(params: GaitParams, result) -> list[str]:
    if result is None:  # diverged run: params recorded, metrics left NaN
        return params.csv_row() + [repr(float("nan"))] * len(EvalResult.CSV_HEADER)
    return params.csv_row() + result.csv_row()


def _eval_point(args):
    params, config, steps, warmup = args
    try:
        return evaluate_gait(params, config, steps, warmup)
    except SimulationDiverged:
        return None


def grid_search(
    spec: GridSpec = GridSpec(),
    config: RobotConfig = RobotConfig(),
    steps: int = DEFAULT_STEPS,
    warmup: int = DEFAULT_WARMUP,
    workers: int = 1,
    csv_path=None,
    resume: bool = False,
) -> list[tuple[GaitParams, EvalResult | None]]:
    """Evaluate every grid point; order matches enumerate_grid.

    Diverged runs are recorded as None instead of aborting the sweep. With
    `csv_path` the rows stream to disk as they complete (in grid order), and
    `resume=True` continues a previous partial sweep from its last row.
    """
    points = enumerate_grid(spec)
    writer = None
    start_at = 0
    if csv_path is not None:
        writer = IncrementalCsvWriter(csv_path, GRID_CSV_SCHEMA, GRID_CSV_HEADER, resume=resume)
        start_at = writer.rows_present
        if start_at > len(points):
            writer.close()
            raise ValidationError(f"{csv_path}: has {start_at} rows but the grid only has {len(points)} points")

    results: list[tuple[GaitParams, EvalResult | None]] = []
    try:
        todo = points[start_at:]
        jobs = ((p, config, steps, warmup) for p in todo)
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                it = pool.map(_eval_point, jobs, chunksize=8)
                for params, res in zip(todo, it):
                    results.append((params, res))
                    if writer is not None:
                        writer.write_row(grid_result_row(params, res))
        else:
            for job in jobs:
                res = _eval_point(job)
                results.append((job[0], res))
                if writer is not None:
                    writer.write_row(grid_result_row(job[0], res))
    finally:
        if writer is not None:
            writer.close()
    return results


def efficiency_frontier(
    velocities, powers, bin_width: float = 0.01
) -> tuple[np.ndarray, np.ndarray]:
    """Best-efficiency frontier: minimum power per velocity bin, dominated bins removed.

    A bin is dominated if some faster bin needs no more power. The surviving
    (velocity, power) pairs are strictly increasing in both coordinates, so
    the frontier is monotone by construction.
    """
    velocities = np.asarray(velocities, dtype=float)
    powers = np.asarray(powers, dtype=float)
    keep = np.isfinite(velocities) & np.isfinite(powers) & (velocities > 0)
    velocities, powers = velocities[keep], powers[keep]
    if velocities.size == 0:
        return np.empty(0), np.empty(0)

    bins = np.floor(velocities / bin_width).astype(int)
    best: dict[int, float] = {}
    for b, p in zip(bins, powers):
        if b not in best or p < best[b]:
            best[b] = p

    centers = sorted(best)
    front_v, front_p = [], []
    # sweep from fast to slow keeping the running power minimum
    running = math.inf
    for b in reversed(centers):
        if best[b] < running:
            running = best[b]
            front_v.append((b + 0.5) * bin_width)
            front_p.append(best[b])
    return np.array(front_v[::-1]), np.array(front_p[::-1])
