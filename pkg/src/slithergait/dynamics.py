"""Planar rigid-chain dynamics of a wheeled multi-module snake robot.

The robot is a serial chain of identical box modules connected by actuated
yaw joints and viewed top-down: all motion happens in the ground plane.
Passive wheel pairs are collapsed into an anisotropic viscous friction law
per link (weak along the body axis, strong sideways), which is what makes
undulation propel the chain.

Coordinates
-----------
The chain is integrated in generalized coordinates

    a     = (theta_0, phi_0, ..., phi_{J-1})   body angles
    com   = center of mass of the whole chain

where ``theta_0`` is the world heading of the head link and ``phi_j`` is the
relative angle of link ``j+1`` with respect to link ``j`` (the servo
coordinate). Link poses are derived from these, so adjacent links coincide at
their joints by construction. Using the chain's center of mass as the
translational coordinate makes the mass matrix block-diagonal: with no
external forces the COM velocity is simply never touched, so total linear
momentum is conserved to rounding even over long runs.

Each control step of ``control_dt`` seconds runs ``control_dt /
physics_substep`` semi-implicit Euler substeps. Servo torques are recomputed
every substep from the PD law and clamped to ``force_limit * gear``. Joint
limits are hard: angles are clamped and outward joint velocity is zeroed.

Everything is deterministic: ``step`` is a pure function of (model, state,
targets) and replays bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from numba import njit

from .errors import SimulationDiverged, ValidationError

STRAIGHT_POSE = "straight"


@dataclass(frozen=True)
class RobotConfig:
    """Physical description of the chain. Defaults give the 9-module robot.

    Lengths in meters, density in kg/m^3, angles in radians, forces in
    newtons. ``gear`` is the servo lever arm converting actuator force to
    joint torque and must equal ``module_length / 2``. ``max_joint_speed`` is
    only a normalization constant for the power metrics, not a simulated
    limit.
    """

    num_modules: int = 9
    module_length: float = 0.35
    module_width: float = 0.10
    module_height: float = 0.05
    density: float = 600.0
    joint_limit: float = math.pi / 2
    force_limit: float = 20.0
    gear: float = 0.175
    lateral_friction_coeff: float = 30.0
    forward_damping_coeff: float = 0.3
    servo_kp: float = 60.0
    servo_kd: float = 3.0
    physics_substep: float = 0.005
    control_dt: float = 0.05
    max_joint_speed: float = 6.0

    @property
    def num_joints(self) -> int:
        return self.num_modules - 1

    @property
    def module_mass(self) -> float:
        return self.density * self.module_length * self.module_width * self.module_height

    @property
    def total_mass(self) -> float:
        return self.num_modules * self.module_mass

    @property
    def torque_limit(self) -> float:
        """Max joint torque: actuator force limit times the gear lever arm."""
        return self.force_limit * self.gear

    def to_file(self, path) -> None:
        from .config import write_kv

        write_kv(path, {f.name: getattr(self, f.name) for f in fields(self)})

    @classmethod
    def from_file(cls, path) -> "RobotConfig":
        from .config import read_kv

        raw = read_kv(path)
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> "RobotConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in known:
                raise ValidationError(f"unknown RobotConfig field '{key}'")
            kwargs[key] = int(value) if key == "num_modules" else float(value)
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Immutable precomputed quantities for one RobotConfig.

    Shareable across threads; all arrays are read-only views of the chain
    geometry (see module docstring for the W/S conventions).
    """

    config: RobotConfig
    num_links: int
    num_joints: int
    masses: np.ndarray  # (n,) kg per link
    inertias: np.ndarray  # (n,) planar moment of inertia per link
    total_mass: float
    half_length: float
    pos_weights: np.ndarray  # W: (n, n) link offsets as sums of heading unit vectors
    ang_map: np.ndarray  # S: (n, n) lower-triangular map angles -> headings
    rot_inertia: np.ndarray  # S^T diag(I) S, constant rotational part of the mass matrix
    n_substeps: int

    @property
    def torque_limit(self) -> float:
        return self.config.torque_limit


@dataclass
class SimState:
    """Full dynamic state of the chain at one instant.

    ``link_positions`` are centers of mass. The canonical degrees of freedom
    for stepping are reconstructed as: head position/heading, joint angles,
    COM velocity (mass-weighted mean of link velocities), head angular
    velocity, joint velocities. Redundant fields are kept consistent by
    ``step``.
    """

    link_positions: np.ndarray  # (n, 2) m
    link_headings: np.ndarray  # (n,) rad
    link_velocities: np.ndarray  # (n, 2) m/s
    link_angular_velocities: np.ndarray  # (n,) rad/s
    joint_angles: np.ndarray  # (J,) rad
    joint_velocities: np.ndarray  # (J,) rad/s
    applied_torques: np.ndarray  # (J,) N*m, last applied
    sim_time: float


@dataclass(frozen=True)
class StepInfo:
    """Per-control-step actuation summary.

    ``torques`` and ``joint_velocities`` are substep averages over the step
    (velocities taken after each velocity update, i.e. the values that moved
    the joints). ``head_velocity`` is the head link's COM speed at the end of
    the step. ``instantaneous_power`` is ``sum_j |torques[j] *
    joint_velocities[j]|`` over those averages.
    """

    torques: np.ndarray  # (J,)
    joint_velocities: np.ndarray  # (J,)
    head_velocity: float
    instantaneous_power: float


def _chain_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Constant geometry matrices for an n-link chain.

    W[i, k]: coefficient of the heading unit vector u(theta_k) in the offset
    of link i's center from the head center (scaled by -half_length).
    S[i, m]: 1 where angle coordinate m contributes to heading theta_i.
    """
    w = np.zeros((n, n))
    for i in range(1, n):
        w[i, 0] = 1.0
        w[i, 1:i] = 2.0
        w[i, i] = 1.0
    s = np.tril(np.ones((n, n)))
    return w, s


def build_robot(config: RobotConfig) -> RobotModel:
    """Validate a config and precompute the chain model."""
    positive = (
        "module_length",
        "module_width",
        "module_height",
        "density",
        "joint_limit",
        "force_limit",
        "gear",
        "physics_substep",
        "control_dt",
        "max_joint_speed",
    )
    for name in positive:
        if not getattr(config, name) > 0:
            raise ValidationError(f"RobotConfig.{name} must be positive, got {getattr(config, name)}")
    # zero gains / friction are legitimate (free-swinging or frictionless runs)
    for name in ("lateral_friction_coeff", "forward_damping_coeff", "servo_kp", "servo_kd"):
        if getattr(config, name) < 0:
            raise ValidationError(f"RobotConfig.{name} must be nonnegative, got {getattr(config, name)}")
    if config.num_modules < 2:
        raise ValidationError(f"RobotConfig.num_modules must be >= 2, got {config.num_modules}")
    if abs(config.gear - config.module_length / 2.0) > 1e-12:
        raise ValidationError(
            f"RobotConfig.gear must equal module_length/2 ({config.module_length / 2.0}), got {config.gear}"
        )
    ratio = config.control_dt / config.physics_substep
    n_sub = round(ratio)
    if n_sub < 1 or abs(ratio - n_sub) > 1e-9:
        raise ValidationError(
            f"RobotConfig.control_dt must be an integer multiple of physics_substep, got ratio {ratio}"
        )

    n = config.num_modules
    mass = config.module_mass
    # box footprint spinning about the vertical axis
    inertia = mass * (config.module_length**2 + config.module_width**2) / 12.0
    masses = np.full(n, mass)
    inertias = np.full(n, inertia)
    w, s = _chain_matrices(n)
    rot = s.T @ (inertias[:, None] * s)
    for arr in (masses, inertias, w, s, rot):
        arr.setflags(write=False)
    return RobotModel(
        config=config,
        num_links=n,
        num_joints=n - 1,
        masses=masses,
        inertias=inertias,
        total_mass=float(masses.sum()),
        half_length=config.module_length / 2.0,
        pos_weights=w,
        ang_map=s,
        rot_inertia=rot,
        n_substeps=n_sub,
    )


def _derive_state(
    model: RobotModel,
    com: np.ndarray,
    com_vel: np.ndarray,
    ang: np.ndarray,
    ang_vel: np.ndarray,
    applied_torques: np.ndarray,
    sim_time: float,
) -> SimState:
    """Expand canonical coordinates into the redundant per-link state."""
    hl = model.half_length
    w, s = model.pos_weights, model.ang_map
    theta = s @ ang
    cth, sth = np.cos(theta), np.sin(theta)

    # link centers relative to the head, then shifted so COM lands on `com`
    off_x = -hl * (w @ cth)
    off_y = -hl * (w @ sth)
    wts = model.masses / model.total_mass
    dx = off_x - wts @ off_x
    dy = off_y - wts @ off_y
    positions = np.column_stack((com[0] + dx, com[1] + dy))

    # velocity jacobian of the COM-relative offsets
    gx = hl * (w * sth) @ s
    gy = -hl * (w * cth) @ s
    gx -= wts @ gx
    gy -= wts @ gy
    velocities = np.column_stack((com_vel[0] + gx @ ang_vel, com_vel[1] + gy @ ang_vel))

    return SimState(
        link_positions=positions,
        link_headings=theta,
        link_velocities=velocities,
        link_angular_velocities=s @ ang_vel,
        joint_angles=ang[1:].copy(),
        joint_velocities=ang_vel[1:].copy(),
        applied_torques=applied_torques,
        sim_time=sim_time,
    )


def _canonical_coords(model: RobotModel, state: SimState):
    """Project a SimState back onto the canonical degrees of freedom."""
    n = model.num_links
    ang = np.empty(n)
    ang[0] = state.link_headings[0]
    ang[1:] = state.joint_angles
    ang_vel = np.empty(n)
    ang_vel[0] = state.link_angular_velocities[0]
    ang_vel[1:] = state.joint_velocities
    wts = model.masses / model.total_mass
    com = wts @ state.link_positions
    com_vel = wts @ state.link_velocities
    return com, com_vel, ang, ang_vel


def reset(model: RobotModel, pose=STRAIGHT_POSE) -> SimState:
    """Initial state at rest: straight line along +x, or explicit joint angles.

    The head sits at the origin facing +x with the body trailing in -x.
    """
    nj = model.num_joints
    if isinstance(pose, str):
        if pose != STRAIGHT_POSE:
            raise ValidationError(f"pose must be '{STRAIGHT_POSE}' or {nj} joint angles, got '{pose}'")
        joints = np.zeros(nj)
    else:
        joints = np.asarray(pose, dtype=float)
        if joints.shape != (nj,):
            raise ValidationError(f"pose must provide {nj} joint angles, got shape {joints.shape}")
        limit = model.config.joint_limit
        if np.any(np.abs(joints) > limit):
            bad = int(np.argmax(np.abs(joints) > limit))
            raise ValidationError(f"pose joint angle {bad} = {joints[bad]} exceeds joint limit +/-{limit}")

    n = model.num_links
    ang = np.zeros(n)
    ang[1:] = joints
    # place the head at the origin; COM follows from the geometry
    hl = model.half_length
    theta = model.ang_map @ ang
    off_x = -hl * (model.pos_weights @ np.cos(theta))
    off_y = -hl * (model.pos_weights @ np.sin(theta))
    wts = model.masses / model.total_mass
    com = np.array([wts @ off_x, wts @ off_y])
    return _derive_state(model, com, np.zeros(2), ang, np.zeros(n), np.zeros(nj), 0.0)


def servo_torque(target: float, angle: float, ang_vel: float, config: RobotConfig) -> float:
    """PD position servo with a hard torque clamp at force_limit * gear."""
    raw = config.servo_kp * (target - angle) - config.servo_kd * ang_vel
    limit = config.torque_limit
    return float(min(max(raw, -limit), limit))


def friction_force(link_velocity, heading: float, config: RobotConfig) -> np.ndarray:
    """Anisotropic wheel friction on one link: weak tangential, strong lateral.

    Decomposes the velocity along/across the link heading and applies
    independent viscous coefficients to each component.
    """
    v = np.asarray(link_velocity, dtype=float)
    t_hat = np.array([math.cos(heading), math.sin(heading)])
    n_hat = np.array([-t_hat[1], t_hat[0]])
    v_t = float(v @ t_hat)
    v_n = float(v @ n_hat)
    return -config.forward_damping_coeff * v_t * t_hat - config.lateral_friction_coeff * v_n * n_hat


@njit(cache=True)
def _advance(
    ang,
    ang_vel,
    com,
    com_vel,
    targets,
    n_sub,
    h,
    masses,
    total_mass,
    w,
    s,
    rot_inertia,
    hl,
    kp,
    kd,
    tau_max,
    c_lat,
    c_fwd,
    joint_limit,
):
    """Run the semi-implicit Euler substeps for one control step (in place).

    Returns (mean torques, mean post-update joint velocities) over substeps.
    """
    n = ang.shape[0]
    nj = n - 1
    tau_acc = np.zeros(nj)
    jvel_acc = np.zeros(nj)
    wts = masses / total_mass

    for _ in range(n_sub):
        # servo torques from the current joint state
        tau = kp * (targets - ang[1:]) - kd * ang_vel[1:]
        for j in range(nj):
            if tau[j] > tau_max:
                tau[j] = tau_max
            elif tau[j] < -tau_max:
                tau[j] = -tau_max

        theta = s @ ang
        cth = np.cos(theta)
        sth = np.sin(theta)

        # COM-relative position jacobian wrt the angle coordinates
        gx = hl * ((w * sth) @ s)
        gy = -hl * ((w * cth) @ s)
        for m in range(n):
            mx = 0.0
            my = 0.0
            for i in range(n):
                mx += wts[i] * gx[i, m]
                my += wts[i] * gy[i, m]
            for i in range(n):
                gx[i, m] -= mx
                gy[i, m] -= my

        # mass matrix (angular block) and velocity-product bias
        m_ang = gx.T @ (masses.reshape(n, 1) * gx) + gy.T @ (masses.reshape(n, 1) * gy) + rot_inertia
        theta_dot = s @ ang_vel
        td2 = theta_dot * theta_dot
        beta_x = hl * (w @ (td2 * cth))
        beta_y = hl * (w @ (td2 * sth))
        bias = gx.T @ (masses * beta_x) + gy.T @ (masses * beta_y)

        # per-link velocities and anisotropic friction
        vx = com_vel[0] + gx @ ang_vel
        vy = com_vel[1] + gy @ ang_vel
        v_t = vx * cth + vy * sth
        v_n = -vx * sth + vy * cth
        f_t = -c_fwd * v_t
        f_n = -c_lat * v_n
        fx = f_t * cth - f_n * sth
        fy = f_t * sth + f_n * cth

        q_ang = gx.T @ fx + gy.T @ fy - bias
        q_ang[1:] += tau

        acc_ang = np.linalg.solve(m_ang, q_ang)
        ang_vel += h * acc_ang
        com_vel[0] += h * fx.sum() / total_mass
        com_vel[1] += h * fy.sum() / total_mass
        ang += h * ang_vel
        com[0] += h * com_vel[0]
        com[1] += h * com_vel[1]

        # hard joint limits: clamp angle, kill outward velocity
        for j in range(nj):
            if ang[1 + j] > joint_limit:
                ang[1 + j] = joint_limit
                if ang_vel[1 + j] > 0.0:
                    ang_vel[1 + j] = 0.0
            elif ang[1 + j] < -joint_limit:
                ang[1 + j] = -joint_limit
                if ang_vel[1 + j] < 0.0:
                    ang_vel[1 + j] = 0.0

        tau_acc += tau
        jvel_acc += ang_vel[1:]

    return tau_acc / n_sub, jvel_acc / n_sub


def step(model: RobotModel, state: SimState, targets) -> tuple[SimState, StepInfo]:
    """Advance one control step of control_dt seconds.

    Deterministic: identical (model, state, targets) produce bit-identical
    outputs. Targets are clipped to the joint limits (callers are expected to
    respect them; clipping keeps the servo saturation behavior well defined).
    Raises SimulationDiverged if a non-finite value appears.
    """
    cfg = model.config
    tgt = np.clip(np.asarray(targets, dtype=float), -cfg.joint_limit, cfg.joint_limit)
    if tgt.shape != (model.num_joints,):
        raise ValidationError(f"targets must have shape ({model.num_joints},), got {tgt.shape}")

    com, com_vel, ang, ang_vel = _canonical_coords(model, state)
    tau_mean, jvel_mean = _advance(
        ang,
        ang_vel,
        com,
        com_vel,
        tgt,
        model.n_substeps,
        cfg.physics_substep,
        model.masses,
        model.total_mass,
        model.pos_weights,
        model.ang_map,
        model.rot_inertia,
        model.half_length,
        cfg.servo_kp,
        cfg.servo_kd,
        cfg.torque_limit,
        cfg.lateral_friction_coeff,
        cfg.forward_damping_coeff,
        cfg.joint_limit,
    )

    sim_time = state.sim_time + cfg.control_dt
    if not (np.all(np.isfinite(ang)) and np.all(np.isfinite(ang_vel)) and np.all(np.isfinite(com)) and np.all(np.isfinite(com_vel))):
        raise SimulationDiverged(sim_time)

    new_state = _derive_state(model, com, com_vel, ang, ang_vel, tau_mean.copy(), sim_time)
    head_speed = float(np.hypot(new_state.link_velocities[0, 0], new_state.link_velocities[0, 1]))
    power = float(np.sum(np.abs(tau_mean * jvel_mean)))
    info = StepInfo(
        torques=tau_mean,
        joint_velocities=jvel_mean,
        head_velocity=head_speed,
        instantaneous_power=power,
    )
    return new_state, info


def joint_residual(model: RobotModel, state: SimState) -> float:
    """Max distance between the joint anchor points of adjacent links.

    Kinematic-consistency diagnostic; ~1e-16 by construction.
    """
    hl = model.half_length
    pos = state.link_positions
    th = state.link_headings
    rear = pos - hl * np.column_stack((np.cos(th), np.sin(th)))
    front = pos + hl * np.column_stack((np.cos(th), np.sin(th)))
    gaps = rear[:-1] - front[1:]
    return float(np.max(np.hypot(gaps[:, 0], gaps[:, 1]))) if len(gaps) else 0.0


def total_momentum(model: RobotModel, state: SimState) -> np.ndarray:
    """Total planar linear momentum (kg*m/s, 2-vector)."""
    return model.masses @ state.link_velocities
