"""Pose-level stand-in for the limb, its low-level executor and the motion-capture rig.

The plant keeps a kinematic ``true_pose`` that is moved either by a LERP
executor (pose steps) or by integrating a lagged twist (velocity commands)
at the low-level rate. Disturbances:

    - backlash: per-axis rotational dead-band on the body-frame rotation
      increments, consumed after every sign reversal;
    - flex: a bounded random-walk offset between the kinematic pose and the
      physical end-effector the sensor sees;
    - tracking lag: first-order lag between the twist setpoint and the
      executed twist;
    - sensing: Gaussian noise, a fixed latency in sensor ticks and optional
      frame dropouts.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .controllers.step_controller import PoseStepCommand
from .errors import ExecutorBusyError
from .geometry import (
    Pose,
    TwistCommand,
    TwistStage,
    ZERO3,
    quat_compose,
    quat_conjugate,
    quat_exp,
    quat_log,
    quat_slerp,
    rotation_angle,
)

logger = logging.getLogger(__name__)


class PlantConfig(BaseModel):
    """Executor rates, disturbance magnitudes and sensor model (mm, rad, s, Hz)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lowlevel_rate: float = Field(30.0, gt=0.0)
    sensor_rate: float = Field(180.0, gt=0.0)
    measurement_noise_sigma: float = Field(0.0, ge=0.0)
    measurement_noise_sigma_rad: float = Field(0.0, ge=0.0)
    measurement_latency: int = Field(0, ge=0)
    backlash_deadband: float = Field(0.0, ge=0.0, le=math.pi)
    flex_offset_magnitude: float = Field(0.0, ge=0.0)
    flex_walk_sigma: float = Field(0.0, ge=0.0)
    tracking_lag_tau: float = Field(0.0, ge=0.0)
    lerp_speed: float = Field(25.0, gt=0.0)
    lerp_rot_speed: float = Field(math.radians(10.0), gt=0.0)
    settle_ticks: int = Field(3, ge=1)
    settle_pos_tol: float = Field(0.5, gt=0.0)
    settle_rot_tol: float = Field(math.radians(0.2), gt=0.0)
    dropout_probability: float = Field(0.0, ge=0.0, lt=1.0)
    rng_seed: int = Field(0, ge=0, lt=2**64)


class Backlash:
    """Per-axis dead-band automaton on incremental rotation commands.

    ``gap[i]`` is the position inside the dead-band on axis i: ``deadband``
    when engaged in the positive direction, 0 when engaged in the negative
    one. An axis engages in the direction of its first command.
    """

    def __init__(self, deadband: float):
        self.deadband = deadband
        self.gap = np.full(3, np.nan)

    def apply(self, increment: np.ndarray) -> np.ndarray:
        if self.deadband == 0.0:
            return increment
        out = np.zeros(3)
        for i in range(3):
            c = float(increment[i])
            if c == 0.0:
                continue
            p = self.gap[i]
            if math.isnan(p):
                p = self.deadband if c > 0.0 else 0.0
            p += c
            if p > self.deadband:
                out[i] = p - self.deadband
                p = self.deadband
            elif p < 0.0:
                out[i] = p
                p = 0.0
            self.gap[i] = p
        return out


@dataclass
class LerpPlan:
    """In-flight handle of one pose step."""

    start: Pose
    delta_p: np.ndarray
    rotvec: np.ndarray
    duration: float
    elapsed: float = 0.0
    fraction: float = 0.0
    finished: bool = False
    still_ticks: int = 0
    settled: bool = False

    @property
    def goal_position(self) -> np.ndarray:
        return self.start.position + self.delta_p

    @property
    def goal_orientation(self) -> np.ndarray:
        return quat_compose(self.start.orientation, quat_exp(self.rotvec))


Sample = Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


class PosePlant:
    """Simulated limb executing pose steps and twists under configurable disturbances."""

    def __init__(self, config: PlantConfig, initial_pose: Pose, target_pose: Pose):
        self.config = config
        self.rng = np.random.default_rng(config.rng_seed)
        self.true_pose = initial_pose
        self.target_pose = target_pose
        self.lerp_plan: Optional[LerpPlan] = None
        self.twist_setpoint = TwistCommand.zero(TwistStage.SMOOTHED)
        self.lagged_twist = TwistCommand.zero(TwistStage.SMOOTHED)
        self.backlash = Backlash(config.backlash_deadband)
        self.flex_bias = self._initial_flex()
        self.measurement_queue: Deque[Sample] = deque(maxlen=config.measurement_latency + 1)
        self.sense()

    @property
    def lowlevel_dt(self) -> float:
        return 1.0 / self.config.lowlevel_rate

    def _initial_flex(self) -> np.ndarray:
        magnitude = self.config.flex_offset_magnitude
        if magnitude == 0.0:
            return ZERO3.copy()
        direction = self.rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        return direction * magnitude * self.rng.uniform()

    def _walk_flex(self, dt: float) -> None:
        cfg = self.config
        if cfg.flex_walk_sigma == 0.0 or cfg.flex_offset_magnitude == 0.0:
            return
        self.flex_bias = self.flex_bias + self.rng.normal(0.0, cfg.flex_walk_sigma * math.sqrt(dt), 3)
        norm = float(np.linalg.norm(self.flex_bias))
        if norm > cfg.flex_offset_magnitude:
            self.flex_bias *= cfg.flex_offset_magnitude / norm

    @property
    def step_in_flight(self) -> bool:
        return self.lerp_plan is not None

    def execute_pose_step(self, cmd: PoseStepCommand) -> LerpPlan:
        """Schedule a LERP/slerp move from the current pose to ``pose ∘ cmd``."""
        if self.lerp_plan is not None:
            raise ExecutorBusyError("a pose step is already executing")
        rotvec = quat_log(cmd.delta_q)
        distance = float(np.linalg.norm(cmd.delta_p))
        angle = rotation_angle(cmd.delta_q)
        duration = max(distance / self.config.lerp_speed, angle / self.config.lerp_rot_speed)
        plan = LerpPlan(self.true_pose, np.array(cmd.delta_p, dtype=float), rotvec, duration)
        if duration == 0.0:
            plan.fraction = 1.0
            plan.finished = True
            plan.settled = True
        self.lerp_plan = plan
        return plan

    def set_twist(self, twist: TwistCommand) -> None:
        self.twist_setpoint = twist

    def poll_step_complete(self) -> bool:
        """True exactly once, when the current step has finished and settled."""
        if self.lerp_plan is not None and self.lerp_plan.settled:
            self.lerp_plan = None
            return True
        return False

    def step_lowlevel(self, dt: Optional[float] = None) -> None:
        """Advance the executor by one low-level period."""
        dt = self.lowlevel_dt if dt is None else dt
        previous = self.true_pose
        plan = self.lerp_plan
        if plan is not None:
            if not plan.finished:
                plan.elapsed += dt
                fraction = min(1.0, plan.elapsed / plan.duration)
                if self.backlash.deadband == 0.0:
                    orientation = quat_slerp(plan.start.orientation, plan.goal_orientation, fraction)
                else:
                    # Dead-band acts on per-tick increments.
                    increment = self.backlash.apply((fraction - plan.fraction) * plan.rotvec)
                    orientation = quat_compose(previous.orientation, quat_exp(increment))
                plan.fraction = fraction
                plan.finished = fraction >= 1.0
                position = plan.goal_position if plan.finished else plan.start.position + fraction * plan.delta_p
                self.true_pose = Pose(position, orientation)
            elif not plan.settled:
                self._update_settle(plan, previous)
        else:
            self._integrate_twist(dt)
        self._walk_flex(dt)

    def _update_settle(self, plan: LerpPlan, previous: Pose) -> None:
        # Still ticks are counted on the kinematic pose after interpolation ends.
        moved = float(np.linalg.norm(self.true_pose.position - previous.position))
        turned = rotation_angle(quat_compose(quat_conjugate(previous.orientation), self.true_pose.orientation))
        if moved < self.config.settle_pos_tol and turned < self.config.settle_rot_tol:
            plan.still_ticks += 1
        else:
            plan.still_ticks = 0
        if plan.still_ticks >= self.config.settle_ticks:
            plan.settled = True

    def _integrate_twist(self, dt: float) -> None:
        tau = self.config.tracking_lag_tau
        w = dt / (tau + dt)
        lagged = self.lagged_twist
        setpoint = self.twist_setpoint
        linear = lagged.linear + w * (setpoint.linear - lagged.linear)
        angular = lagged.angular + w * (setpoint.angular - lagged.angular)
        self.lagged_twist = TwistCommand(linear, angular, TwistStage.SMOOTHED)
        increment = self.backlash.apply(angular * dt)
        self.true_pose = Pose(
            self.true_pose.position + linear * dt,
            quat_compose(self.true_pose.orientation, quat_exp(increment)),
        )

    @property
    def commanded_twist(self) -> TwistCommand:
        """Rate the executor is currently commanding (LERP rate or lagged twist)."""
        plan = self.lerp_plan
        if plan is not None:
            if plan.finished or plan.duration == 0.0:
                return TwistCommand.zero(TwistStage.SMOOTHED)
            return TwistCommand(plan.delta_p / plan.duration, plan.rotvec / plan.duration,
                                TwistStage.SMOOTHED)
        return self.lagged_twist

    def move_target(self, offset: np.ndarray, rotvec: Optional[np.ndarray] = None) -> None:
        orientation = self.target_pose.orientation
        if rotvec is not None:
            orientation = quat_compose(orientation, quat_exp(np.asarray(rotvec, dtype=float)))
        self.target_pose = Pose(self.target_pose.position + np.asarray(offset, dtype=float), orientation)
        logger.info(f"target moved by {np.round(offset, 2).tolist()} mm")

    def sense(self) -> None:
        """One sensor frame: sample, corrupt and enqueue the current poses."""
        cfg = self.config
        if cfg.dropout_probability > 0.0 and self.rng.random() < cfg.dropout_probability:
            self.measurement_queue.append(None)
            return
        ee_pos = self.true_pose.position + self.flex_bias
        ee_q = self.true_pose.orientation
        t_pos = self.target_pose.position
        t_q = self.target_pose.orientation
        if cfg.measurement_noise_sigma > 0.0:
            noise = self.rng.standard_normal(6) * cfg.measurement_noise_sigma
            ee_pos = ee_pos + noise[:3]
            t_pos = t_pos + noise[3:]
        if cfg.measurement_noise_sigma_rad > 0.0:
            noise = self.rng.standard_normal(6) * cfg.measurement_noise_sigma_rad
            ee_q = quat_compose(ee_q, quat_exp(noise[:3]))
            t_q = quat_compose(t_q, quat_exp(noise[3:]))
        self.measurement_queue.append((ee_pos, ee_q, t_pos, t_q))

    def measure(self) -> Tuple[Optional[Pose], Optional[Pose]]:
        """Latency-delayed measured (end-effector, target) poses; (None, None) on a dropped frame."""
        sample = self.measurement_queue[0]
        if sample is None:
            return None, None
        ee_pos, ee_q, t_pos, t_q = sample
        return Pose(ee_pos, ee_q), Pose(t_pos, t_q)
