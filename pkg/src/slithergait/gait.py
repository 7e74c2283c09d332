"""Parameterized undulation gait: joint targets from a traveling sine wave.

Each joint n of N follows

    phi(n, t) = (n/N * x + y) * A * sin(omega * t + lambda * n)

with amplitude A and per-joint phase offset lambda given in degrees, and the
linear-reduction pair (x, y) shaping how the wave amplitude grows from head
(n = 0) to tail. x is always 1 - y. Outputs are clamped to the +/-90 degree
joint range, since extreme corners of the parameter space would exceed it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

JOINT_CLAMP = math.pi / 2


@dataclass(frozen=True)
class GaitParams:
    """The four free gait parameters; x is derived as 1 - y."""

    omega: float  # temporal frequency, rad/s
    y: float  # linear-reduction offset, dimensionless
    amplitude_deg: float  # A, degrees
    lambda_deg: float  # phase offset per joint index, degrees

    def __post_init__(self):
        if self.omega < 0:
            raise ValidationError(f"GaitParams.omega must be >= 0, got {self.omega}")
        if not 0 < self.y < 1:
            raise ValidationError(f"GaitParams.y must be in (0, 1), got {self.y}")
        if not 0 < self.amplitude_deg <= 180:
            raise ValidationError(f"GaitParams.amplitude_deg must be in (0, 180], got {self.amplitude_deg}")

    @property
    def x(self) -> float:
        return 1.0 - self.y

    def csv_row(self) -> list[str]:
        return [repr(float(v)) for v in (self.omega, self.y, self.amplitude_deg, self.lambda_deg)]

    CSV_HEADER = ("omega", "y", "amplitude_deg", "lambda_deg")

    def to_mapping(self) -> dict:
        return {
            "omega": self.omega,
            "y": self.y,
            "x": self.x,
            "amplitude_deg": self.amplitude_deg,
            "lambda_deg": self.lambda_deg,
        }

    @classmethod
    def from_mapping(cls, raw: dict) -> "GaitParams":
        known = {"omega", "y", "x", "amplitude_deg", "lambda_deg"}
        for key in raw:
            if key not in known:
                raise ValidationError(f"unknown GaitParams field '{key}'")
        params = cls(
            omega=float(raw["omega"]),
            y=float(raw["y"]),
            amplitude_deg=float(raw["amplitude_deg"]),
            lambda_deg=float(raw["lambda_deg"]),
        )
        if "x" in raw and abs(float(raw["x"]) - params.x) > 1e-12:
            raise ValidationError(f"GaitParams.x must equal 1 - y = {params.x}, got {raw['x']}")
        return params


def joint_angle(params: GaitParams, n: int, t: float, num_joints: int = 8) -> float:
    """Target angle (radians) for joint n at time t."""
    if not 0 <= n < num_joints:
        raise IndexError(f"joint index {n} out of range 0..{num_joints - 1}")
    envelope = (n / num_joints) * params.x + params.y
    amp = math.radians(params.amplitude_deg)
    phase = params.omega * t + math.radians(params.lambda_deg) * n
    value = envelope * amp * math.sin(phase)
    return min(max(value, -JOINT_CLAMP), JOINT_CLAMP)


def targets_at(params: GaitParams, t: float, num_joints: int = 8) -> np.ndarray:
    """Target angles for all joints at time t."""
    if num_joints < 1:
        raise ValidationError(f"num_joints must be >= 1, got {num_joints}")
    n = np.arange(num_joints)
    envelope = (n / num_joints) * params.x + params.y
    amp = math.radians(params.amplitude_deg)
    phase = params.omega * t + np.radians(params.lambda_deg) * n
    return np.clip(envelope * amp * np.sin(phase), -JOINT_CLAMP, JOINT_CLAMP)
