"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition.

    The message always names the offending field or argument.
    """


class SimulationDiverged(RuntimeError):
    """Raised when a non-finite value appears in the simulator state.

    Attributes:
        sim_time: simulation time (seconds) at which the divergence was detected.
    """

    def __init__(self, sim_time: float, detail: str = ""):
        self.sim_time = sim_time
        msg = f"simulation diverged at t={sim_time:.6f}s"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UndefinedMetric(ValueError):
    """Raised when an efficiency metric is requested at non-positive velocity."""
