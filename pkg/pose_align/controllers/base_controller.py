from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Optional

from ..geometry import Pose, PoseError


@dataclass
class ControllerOutput:
    """What the harness needs from any controller tick."""

    error: Optional[PoseError]
    in_tolerance: bool
    converged: bool
    holding: bool = False
    sensor_fault: bool = False
    detail: Any = None


class BaseController(ABC):
    """Base class for both alignment controllers."""

    #: "step" controllers hand pose steps to the executor, "twist" controllers stream velocities
    mode: str = "step"

    def __init__(self, controller_type: str, config: Any):
        """Initialize the base controller with configuration.

        Args:
            controller_type: Type of the controller ('v1' or 'v2')
            config: Validated configuration model
        """
        self.controller_type = controller_type
        self.config = config
        self.dwell_count = 0

    @property
    def tick_rate(self) -> float:
        """High-level update rate in Hz."""
        return 1.0 / self.config.tick_dt

    @property
    def converged(self) -> bool:
        return self.dwell_count >= self.config.dwell_ticks

    @abstractmethod
    def tick(self, ee: Optional[Pose], target: Optional[Pose]) -> ControllerOutput:
        """Consume one pair of measured poses and produce the next command.

        Args:
            ee: Measured end-effector pose, None when the sensor frame was lost
            target: Measured target pose, None when the sensor frame was lost

        Returns:
            ControllerOutput describing the command and the controller state
        """
        pass

    @abstractmethod
    def reset(self) -> None:
        """Drop all per-run state."""
        pass

    def notify_step_complete(self) -> None:
        """Executor feedback for step controllers; twist controllers ignore it."""

    def _update_dwell(self, in_tolerance: bool) -> None:
        self.dwell_count = self.dwell_count + 1 if in_tolerance else 0

    def in_tolerance(self, error: PoseError) -> bool:
        return (error.delta_d <= self.config.conv_d_tol
                and error.delta_theta <= self.config.conv_theta_tol)
