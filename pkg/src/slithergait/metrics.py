"""Power and efficiency metrics computed from recorded actuation traces.

Five quantities: per-joint average power (mean |torque * joint velocity|),
total power (their sum over joints), normalized power (per-joint power as a
fraction of the actuator's force limit times a max joint speed, averaged over
joints), cost of transport P/(m g v), and averaged power per velocity P/v.

All are pure functions. Braking power costs the same as driving power: every
product enters through its absolute value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import RobotConfig
from .errors import UndefinedMetric, ValidationError

G_ACCEL = 9.81

# below this mean speed (m/s) the per-velocity metrics are reported undefined
VELOCITY_FLOOR = 1e-9


@dataclass
class PowerTrace:
    """Recorded actuation history: k control steps by J joints.

    ``forces`` is the primary actuator record; ``torques`` is stored as
    ``forces * gear`` so the two are consistent to the bit.
    """

    torques: np.ndarray  # (k, J) N*m
    joint_velocities: np.ndarray  # (k, J) rad/s
    head_speeds: np.ndarray  # (k,) m/s
    forces: np.ndarray  # (k, J) N

    def __post_init__(self):
        self.torques = np.asarray(self.torques, dtype=float)
        self.joint_velocities = np.asarray(self.joint_velocities, dtype=float)
        self.head_speeds = np.asarray(self.head_speeds, dtype=float)
        self.forces = np.asarray(self.forces, dtype=float)
        k = self.torques.shape[0]
        if k < 1:
            raise ValidationError("PowerTrace needs at least one step")
        if self.joint_velocities.shape != self.torques.shape or self.forces.shape != self.torques.shape:
            raise ValidationError(
                f"PowerTrace shape mismatch: torques {self.torques.shape}, "
                f"joint_velocities {self.joint_velocities.shape}, forces {self.forces.shape}"
            )
        if self.head_speeds.shape != (k,):
            raise ValidationError(f"PowerTrace.head_speeds must have shape ({k},), got {self.head_speeds.shape}")

    @classmethod
    def from_torques(cls, torques, joint_velocities, head_speeds, gear: float) -> "PowerTrace":
        """Build a trace from recorded torques; forces are torques / gear."""
        torques = np.asarray(torques, dtype=float)
        forces = torques / gear
        return cls(
            torques=forces * gear,
            joint_velocities=np.asarray(joint_velocities, dtype=float),
            head_speeds=np.asarray(head_speeds, dtype=float),
            forces=forces,
        )

    @property
    def num_steps(self) -> int:
        return self.torques.shape[0]

    @property
    def num_joints(self) -> int:
        return self.torques.shape[1]


@dataclass
class EvalResult:
    """Aggregate of one run: velocity, power, per-joint power, APPV, COT.

    ``appv`` and ``cot`` are NaN when the run produced no net motion.
    """

    mean_velocity: float
    mean_power: float
    per_joint_power: np.ndarray  # (J,) W
    appv: float
    cot: float

    CSV_HEADER = ("velocity", "power", "appv", "cot") + tuple(f"joint{j}_power" for j in range(1, 9))

    def csv_row(self) -> list[str]:
        vals = [self.mean_velocity, self.mean_power, self.appv, self.cot, *self.per_joint_power]
        return [repr(float(v)) for v in vals]


def joint_avg_power(trace: PowerTrace, j: int) -> float:
    """Average absolute power of joint j (1-based, matching the j-th actuator)."""
    if not 1 <= j <= trace.num_joints:
        raise IndexError(f"joint index {j} out of range 1..{trace.num_joints}")
    col = j - 1
    return float(np.mean(np.abs(trace.torques[:, col] * trace.joint_velocities[:, col])))


def total_power(torques, joint_velocities) -> float:
    """Total instantaneous power of all actuators: sum_j |tau_j * phidot_j|."""
    torques = np.asarray(torques, dtype=float)
    joint_velocities = np.asarray(joint_velocities, dtype=float)
    if torques.shape != joint_velocities.shape:
        raise ValidationError(
            f"torques and joint_velocities must have equal shapes, got {torques.shape} vs {joint_velocities.shape}"
        )
    return float(np.sum(np.abs(torques * joint_velocities)))


def normalized_power(forces, joint_velocities, config: RobotConfig) -> float:
    """Mean per-joint power as a fraction of force_limit * max_joint_speed.

    The gear length cancels between torque and its limit, so this works
    directly on actuator forces. Transient joint speeds above max_joint_speed
    could push the value past 1; the result is clamped to [0, 1] so downstream
    reward exponentiation stays real.
    """
    forces = np.asarray(forces, dtype=float)
    joint_velocities = np.asarray(joint_velocities, dtype=float)
    denom = config.force_limit * config.max_joint_speed
    value = float(np.mean(np.abs(forces * joint_velocities))) / denom
    return min(value, 1.0)


def cost_of_transport(mean_power: float, total_mass: float, velocity: float) -> float:
    """Dimensionless transport cost P / (m g v)."""
    if total_mass <= 0:
        raise ValidationError(f"total_mass must be positive, got {total_mass}")
    if velocity <= 0:
        raise UndefinedMetric(f"cost of transport undefined at velocity {velocity}")
    return mean_power / (total_mass * G_ACCEL * velocity)


def appv(mean_power: float, velocity: float) -> float:
    """Averaged power per velocity, P / v (W*s/m)."""
    if velocity <= 0:
        raise UndefinedMetric(f"APPV undefined at velocity {velocity}")
    return mean_power / velocity


def summarize_run(
    trace: PowerTrace,
    config: RobotConfig,
    distance: float,
    duration: float,
    warmup_steps: int = 0,
) -> EvalResult:
    """Aggregate a run over its post-warmup window.

    ``distance`` and ``duration`` describe the post-warmup window (net head
    displacement and elapsed time); the first ``warmup_steps`` rows of the
    trace are excluded from every average. Velocity is displacement-based,
    which is robust to body oscillation.
    """
    if warmup_steps < 0:
        raise ValidationError(f"warmup_steps must be nonnegative, got {warmup_steps}")
    if trace.num_steps <= warmup_steps:
        raise ValidationError(f"trace has {trace.num_steps} steps, needs more than warmup_steps={warmup_steps}")
    if duration <= 0:
        raise ValidationError(f"duration must be positive, got {duration}")

    tau = trace.torques[warmup_steps:]
    vel = trace.joint_velocities[warmup_steps:]
    per_joint = np.mean(np.abs(tau * vel), axis=0)
    mean_power = float(per_joint.sum())
    mean_velocity = distance / duration

    if mean_velocity > VELOCITY_FLOOR:
        run_appv = appv(mean_power, mean_velocity)
        run_cot = cost_of_transport(mean_power, config.total_mass, mean_velocity)
    else:
        run_appv = float("nan")
        run_cot = float("nan")

    return EvalResult(
        mean_velocity=mean_velocity,
        mean_power=mean_power,
        per_joint_power=per_joint,
        appv=run_appv,
        cot=run_cot,
    )
