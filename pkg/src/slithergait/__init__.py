"""slithergait: a planar snake-robot locomotion lab.

Simulates a wheeled multi-module snake robot as a planar rigid chain,
drives it with a parameterized undulation gait or a learned PPO policy,
and scores everything with power/efficiency metrics (per-joint average
power, total power, normalized power, COT, APPV).
"""

__version__ = "0.1.0"

from .dynamics import RobotConfig, RobotModel, SimState, StepInfo, build_robot, reset, step
from .errors import SimulationDiverged, UndefinedMetric, ValidationError
from .gait import GaitParams, joint_angle, targets_at
from .metrics import EvalResult, PowerTrace, appv, cost_of_transport, summarize_run

__all__ = [
    "RobotConfig",
    "RobotModel",
    "SimState",
    "StepInfo",
    "build_robot",
    "reset",
    "step",
    "GaitParams",
    "joint_angle",
    "targets_at",
    "PowerTrace",
    "EvalResult",
    "appv",
    "cost_of_transport",
    "summarize_run",
    "ValidationError",
    "SimulationDiverged",
    "UndefinedMetric",
    "__version__",
]
