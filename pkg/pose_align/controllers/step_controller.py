"""Discrete two-stage LERP alignment (step-and-settle).

Each tick averages the translational error over a short buffer, checks that
the previous step has finished and that the measured error has not jumped,
and then issues one incremental pose step whose length is interpolated from
the averaged error. Steps never exceed the remaining error.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import DWELL_TICKS
from ..geometry import IDENTITY_QUAT, Pose, PoseError, ZERO3, pose_error, quat_exp, rotation_angle
from .base_controller import BaseController, ControllerOutput

logger = logging.getLogger(__name__)


class V1Config(BaseModel):
    """Step-and-settle parameters (mm, rad, Hz)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    s_min: float = 2.0
    s_max: float = 40.0
    r_low: float = 10.0
    r_high: float = 150.0
    theta_min: float = math.radians(0.5)
    theta_max: float = math.radians(10.0)
    buffer_len: int = Field(5, ge=1)
    warm_samples: int = Field(1, ge=1)
    jump_threshold: float = 15.0
    conv_d_tol: float = 3.0
    conv_theta_tol: float = math.radians(0.5)
    tick_rate: float = 30.0
    dwell_ticks: int = Field(DWELL_TICKS, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "V1Config":
        if not 0.0 < self.s_min <= self.s_max:
            raise ValueError("require 0 < s_min <= s_max")
        if not 0.0 < self.r_low < self.r_high:
            raise ValueError("require 0 < r_low < r_high")
        if not 0.0 <= self.theta_min <= self.theta_max:
            raise ValueError("require 0 <= theta_min <= theta_max")
        if self.jump_threshold <= 0.0:
            raise ValueError("jump_threshold must be positive")
        if self.conv_d_tol <= 0.0 or self.conv_theta_tol <= 0.0:
            raise ValueError("convergence tolerances must be positive")
        if self.tick_rate <= 0.0:
            raise ValueError("tick_rate must be positive")
        return self

    @property
    def tick_dt(self) -> float:
        return 1.0 / self.tick_rate


@dataclass
class V1State:
    error_buffer: Deque[np.ndarray] = field(default_factory=deque)
    last_error: Optional[PoseError] = None
    step_in_flight: bool = False
    holding: bool = False

    @classmethod
    def create(cls, buffer_len: int) -> "V1State":
        return cls(error_buffer=deque(maxlen=buffer_len))


class StepKind(str, Enum):
    STEP = "step"
    HOLD = "hold"
    CONVERGED = "converged"


@dataclass(frozen=True, eq=False)
class PoseStepCommand:
    """Relative pose step: world-frame translation (mm) and body-frame rotation."""

    kind: StepKind
    delta_p: np.ndarray = field(default_factory=lambda: ZERO3.copy())
    delta_q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    @classmethod
    def hold(cls) -> "PoseStepCommand":
        return cls(StepKind.HOLD)

    @classmethod
    def converged(cls) -> "PoseStepCommand":
        return cls(StepKind.CONVERGED)

    @property
    def is_step(self) -> bool:
        return self.kind is StepKind.STEP

    @property
    def rotation_angle(self) -> float:
        return rotation_angle(self.delta_q)


def push_and_average(state: V1State, raw_error: np.ndarray) -> np.ndarray:
    """Append a translational error vector to the FIFO buffer and return the buffer mean."""
    state.error_buffer.append(np.asarray(raw_error, dtype=float))
    return np.mean(np.stack(state.error_buffer), axis=0)


def stability_gate(state: V1State, current: PoseError, cfg: V1Config) -> bool:
    """True when no step is in flight and the measured error has not jumped.

    A jump in delta_d larger than cfg.jump_threshold between consecutive ticks
    puts the controller on hold and clears the averaging buffer. The hold is
    released on a jump-free tick once the buffer holds buffer_len samples again.
    """
    last = state.last_error
    state.last_error = current
    if state.step_in_flight:
        return False
    if last is not None and abs(current.delta_d - last.delta_d) > cfg.jump_threshold:
        if not state.holding:
            logger.debug(f"error jump {last.delta_d:.2f} -> {current.delta_d:.2f} mm, holding")
        state.holding = True
        state.error_buffer.clear()
        return False
    if state.holding:
        if len(state.error_buffer) < cfg.buffer_len:
            return False
        state.holding = False
        logger.debug("error stable again, releasing hold")
    return True


def step_size(delta_d: float, cfg: V1Config) -> float:
    """Step length interpolated from the translational error (clamped at both ends)."""
    if delta_d > cfg.r_high:
        return cfg.s_max
    if delta_d < cfg.r_low:
        return cfg.s_min
    return cfg.s_min + (delta_d - cfg.r_low) / (cfg.r_high - cfg.r_low) * (cfg.s_max - cfg.s_min)


def rotation_step_angle(delta_theta: float, cfg: V1Config) -> float:
    """Clamp the rotation step to [theta_min, theta_max] without passing the remaining error."""
    return min(delta_theta, min(max(delta_theta, cfg.theta_min), cfg.theta_max))


def v1_tick(state: V1State, ee: Pose, target: Pose, cfg: V1Config) -> PoseStepCommand:
    error = pose_error(ee, target)
    return _tick_with_error(state, error, target.position - ee.position, cfg)


def _tick_with_error(state: V1State, error: PoseError, raw_error: np.ndarray,
                     cfg: V1Config) -> PoseStepCommand:
    if error.delta_d <= cfg.conv_d_tol and error.delta_theta <= cfg.conv_theta_tol:
        state.last_error = error
        return PoseStepCommand.converged()

    if state.step_in_flight:
        state.last_error = error
        return PoseStepCommand.hold()
    averaged = push_and_average(state, raw_error)
    if not stability_gate(state, error, cfg):
        return PoseStepCommand.hold()
    if len(state.error_buffer) < cfg.warm_samples:
        return PoseStepCommand.hold()

    avg_norm = float(np.linalg.norm(averaged))
    if avg_norm > 0.0:
        length = min(step_size(avg_norm, cfg), avg_norm)
        delta_p = averaged * (length / avg_norm)
    else:
        delta_p = ZERO3.copy()
    angle = rotation_step_angle(error.delta_theta, cfg)
    delta_q = quat_exp(error.rotation_axis * angle)

    state.step_in_flight = True
    return PoseStepCommand(StepKind.STEP, delta_p, delta_q)


def notify_step_complete(state: V1State) -> None:
    """Executor finished interpolating and settled; start re-averaging from here."""
    if not state.step_in_flight:
        return
    state.step_in_flight = False
    state.error_buffer.clear()


class StepController(BaseController):
    """Controller Version 1: step-and-settle LERP alignment."""

    mode = "step"

    def __init__(self, config: V1Config):
        super().__init__("v1", config)
        self.state = V1State.create(config.buffer_len)

    def reset(self) -> None:
        self.state = V1State.create(self.config.buffer_len)
        self.dwell_count = 0

    def tick(self, ee: Optional[Pose], target: Optional[Pose]) -> ControllerOutput:
        if ee is None or target is None:
            self._update_dwell(False)
            return ControllerOutput(None, False, False, holding=True, sensor_fault=True,
                                    detail=PoseStepCommand.hold())
        error = pose_error(ee, target)
        command = _tick_with_error(self.state, error, target.position - ee.position, self.config)
        in_tolerance = self.in_tolerance(error)
        self._update_dwell(in_tolerance)
        if command.is_step:
            logger.debug(f"step |dp| = {np.linalg.norm(command.delta_p):.2f} mm, "
                         f"angle = {math.degrees(command.rotation_angle):.2f} deg")
        return ControllerOutput(error, in_tolerance, self.converged,
                                holding=self.state.holding, detail=command)

    def notify_step_complete(self) -> None:
        notify_step_complete(self.state)
