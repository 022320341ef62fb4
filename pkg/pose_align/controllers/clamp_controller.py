"""Continuous adaptive hypersphere clamp.

Every tick maps the pose error to base velocity radii, shrinks them by
jitter / error-change / off-axis factors, scales the raw 6-D twist into the
resulting ellipsoid and low-pass filters the result. A jump in the
translational error triggers a zero-hold that resets the filter, so the
command ramps back up after the hold.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import DWELL_TICKS
from ..geometry import Pose, PoseError, TwistCommand, TwistStage, ZERO3, pose_error
from .base_controller import BaseController, ControllerOutput

logger = logging.getLogger(__name__)


class V2Config(BaseModel):
    """Hypersphere clamp parameters (mm, rad, s)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    D_near: float = 3.0
    D_far: float = 120.0
    A_near: float = math.radians(0.5)
    A_far: float = math.radians(20.0)
    t_min: float = 6.0
    t_max: float = 80.0
    r_min: float = 0.03
    r_max: float = 0.5
    alpha_j: float = Field(0.2, ge=0.0)
    alpha_k: float = Field(0.05, ge=0.0)
    tau_jitter: float = Field(8.0, gt=0.0)
    epsilon: float = 0.01
    tau_lin: float = Field(0.2, ge=0.0)
    tau_rot: float = Field(0.2, ge=0.0)
    tick_dt: float = Field(1.0 / 30.0, gt=0.0)
    history_len: int = Field(10, ge=2)
    jump_threshold: float = Field(25.0, gt=0.0)
    hold_ticks: int = Field(9, ge=1)
    conv_d_tol: float = Field(3.0, gt=0.0)
    conv_theta_tol: float = Field(math.radians(0.5), gt=0.0)
    dwell_ticks: int = Field(DWELL_TICKS, ge=1)

    @model_validator(mode="after")
    def _check_windows(self) -> "V2Config":
        if not self.D_near < self.D_far:
            raise ValueError("require D_near < D_far")
        if not self.A_near < self.A_far:
            raise ValueError("require A_near < A_far")
        if not 0.0 < self.t_min <= self.t_max:
            raise ValueError("require 0 < t_min <= t_max")
        if not 0.0 < self.r_min <= self.r_max:
            raise ValueError("require 0 < r_min <= r_max")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("require 0 < epsilon <= 1")
        return self


@dataclass
class V2State:
    v_prev: np.ndarray = field(default_factory=lambda: ZERO3.copy())
    w_prev: np.ndarray = field(default_factory=lambda: ZERO3.copy())
    prev_delta_d: Optional[float] = None
    ee_history: Deque[Tuple[float, np.ndarray]] = field(default_factory=deque)
    holding: bool = False
    hold_remaining: int = 0
    tick_index: int = 0
    in_tolerance_count: int = 0

    @classmethod
    def create(cls, history_len: int) -> "V2State":
        return cls(ee_history=deque(maxlen=history_len))


@dataclass(frozen=True)
class ShrinkFactors:
    f_j: float = 1.0
    f_k: float = 1.0
    f_s: float = 1.0


@dataclass(frozen=True)
class VelocityBounds:
    base_t: float
    base_r: float
    eff_t: float
    eff_r: float


@dataclass(frozen=True, eq=False)
class ClampTick:
    """Everything one clamp tick produced, for commanding and for the trial log."""

    twist: TwistCommand
    raw: TwistCommand
    clamped: TwistCommand
    bounds: Optional[VelocityBounds]
    factors: Optional[ShrinkFactors]
    error: Optional[PoseError]
    sigma_jitter: float = 0.0
    rms_perp: float = 0.0
    holding: bool = False
    in_tolerance: bool = False
    converged: bool = False
    sensor_fault: bool = False


def base_radii(delta_d: float, delta_theta: float, cfg: V2Config) -> Tuple[float, float]:
    """Clamped piecewise-linear map from (delta_d, delta_theta) to (Δ_t, Δ_r)."""
    if delta_d <= cfg.D_near:
        base_t = cfg.t_min
    elif delta_d >= cfg.D_far:
        base_t = cfg.t_max
    else:
        alpha = (delta_d - cfg.D_near) / (cfg.D_far - cfg.D_near)
        base_t = cfg.t_min + alpha * (cfg.t_max - cfg.t_min)

    if delta_theta <= cfg.A_near:
        base_r = cfg.r_min
    elif delta_theta >= cfg.A_far:
        base_r = cfg.r_max
    else:
        beta = (delta_theta - cfg.A_near) / (cfg.A_far - cfg.A_near)
        base_r = cfg.r_min + beta * (cfg.r_max - cfg.r_min)
    return base_t, base_r


def jitter_sigma(times: np.ndarray, positions: np.ndarray) -> float:
    """RMS norm of the position residuals about a per-axis linear fit in time (mm).

    Detrending keeps commanded motion from registering as jitter.
    """
    if len(positions) < 2:
        return 0.0
    t = np.asarray(times, dtype=float)
    p = np.asarray(positions, dtype=float)
    tc = t - t.mean()
    pc = p - p.mean(axis=0)
    denom = float(tc @ tc)
    residual = pc - np.outer(tc, (tc @ pc) / denom) if denom > 0.0 else pc
    return math.sqrt(float(np.mean(np.sum(residual * residual, axis=1))))


def rms_perp(positions: np.ndarray, error_dir: np.ndarray) -> float:
    """RMS of the components of successive displacements orthogonal to error_dir (mm)."""
    if len(positions) < 2 or not np.any(error_dir):
        return 0.0
    steps = np.diff(np.asarray(positions, dtype=float), axis=0)
    perp = steps - np.outer(steps @ error_dir, error_dir)
    return math.sqrt(float(np.mean(np.sum(perp * perp, axis=1))))


def shrink_factors(sigma_jitter: float, delta_d: float, prev_delta_d: Optional[float],
                   rms_perp_mm: float, cfg: V2Config) -> ShrinkFactors:
    f_j = 1.0 / (1.0 + cfg.alpha_j * sigma_jitter)
    if prev_delta_d is None:
        f_k = 1.0
    else:
        f_k = 1.0 / (1.0 + cfg.alpha_k * abs(delta_d - prev_delta_d))
    f_s = max(cfg.epsilon, 1.0 - rms_perp_mm / cfg.tau_jitter)
    return ShrinkFactors(f_j, f_k, f_s)


def effective_radii(base: VelocityBounds, f: ShrinkFactors) -> VelocityBounds:
    """Shrink the base radii; f_s acts on translation only."""
    return VelocityBounds(
        base_t=base.base_t,
        base_r=base.base_r,
        eff_t=base.base_t * f.f_j * f.f_k * f.f_s,
        eff_r=base.base_r * f.f_j * f.f_k,
    )


def raw_velocity(ee: Pose, target: Pose, error: Optional[PoseError] = None) -> TwistCommand:
    """Raw twist: the translation to the target (as mm/s) and the error rotation vector (as rad/s)."""
    if error is None:
        error = pose_error(ee, target)
    return TwistCommand(target.position - ee.position, error.rotation, TwistStage.RAW)


def hypersphere_clamp(raw: TwistCommand, eff: VelocityBounds) -> TwistCommand:
    """Scale the 6-D twist so that (v/eff_t, w/eff_r) lies inside the unit ball."""
    u_lin = raw.linear / eff.eff_t
    u_ang = raw.angular / eff.eff_r
    norm = math.sqrt(float(u_lin @ u_lin + u_ang @ u_ang))
    if norm <= 1.0:
        return TwistCommand(raw.linear, raw.angular, TwistStage.CLAMPED)
    return TwistCommand(u_lin / norm * eff.eff_t, u_ang / norm * eff.eff_r, TwistStage.CLAMPED)


def smoothing_weights(cfg: V2Config) -> Tuple[float, float]:
    return cfg.tick_dt / (cfg.tau_lin + cfg.tick_dt), cfg.tick_dt / (cfg.tau_rot + cfg.tick_dt)


def smooth(prev_v: np.ndarray, prev_w: np.ndarray, clamped: TwistCommand,
           cfg: V2Config) -> TwistCommand:
    """First-order low-pass: x_{k+1} = x_k + dt/(tau + dt) * (x_c - x_k)."""
    w_lin, w_rot = smoothing_weights(cfg)
    return TwistCommand(
        prev_v + w_lin * (clamped.linear - prev_v),
        prev_w + w_rot * (clamped.angular - prev_w),
        TwistStage.SMOOTHED,
    )


def _enter_hold(state: V2State) -> None:
    # Zeroing the filter makes the command ramp back up once the hold ends.
    state.v_prev = ZERO3.copy()
    state.w_prev = ZERO3.copy()


def v2_tick(state: V2State, ee_measured: Optional[Pose], target_measured: Optional[Pose],
            cfg: V2Config) -> ClampTick:
    tick = state.tick_index
    state.tick_index += 1

    if ee_measured is None or target_measured is None:
        logger.warning(f"sensor fault at tick {tick}, holding")
        _enter_hold(state)
        state.in_tolerance_count = 0
        zero = TwistCommand.zero(TwistStage.SMOOTHED)
        return ClampTick(zero, TwistCommand.zero(), TwistCommand.zero(TwistStage.CLAMPED),
                         None, None, None, holding=True, sensor_fault=True)

    error = pose_error(ee_measured, target_measured)
    state.ee_history.append((tick * cfg.tick_dt, ee_measured.position))
    times = np.fromiter((s[0] for s in state.ee_history), dtype=float, count=len(state.ee_history))
    positions = np.stack([s[1] for s in state.ee_history])

    base_t, base_r = base_radii(error.delta_d, error.delta_theta, cfg)
    sigma = jitter_sigma(times, positions)
    perp = rms_perp(positions, error.translation_dir)
    factors = shrink_factors(sigma, error.delta_d, state.prev_delta_d, perp, cfg)
    bounds = effective_radii(VelocityBounds(base_t, base_r, base_t, base_r), factors)
    raw = raw_velocity(ee_measured, target_measured, error)
    clamped = hypersphere_clamp(raw, bounds)

    jumped = (state.prev_delta_d is not None
              and abs(error.delta_d - state.prev_delta_d) > cfg.jump_threshold)
    state.prev_delta_d = error.delta_d
    if jumped:
        if not state.holding:
            logger.debug(f"error jump at tick {tick}, zero-hold for {cfg.hold_ticks} ticks")
        state.holding = True
        state.hold_remaining = cfg.hold_ticks

    in_tolerance = error.delta_d <= cfg.conv_d_tol and error.delta_theta <= cfg.conv_theta_tol
    state.in_tolerance_count = state.in_tolerance_count + 1 if in_tolerance else 0
    converged = state.in_tolerance_count >= cfg.dwell_ticks

    if state.holding:
        state.hold_remaining -= 1
        if state.hold_remaining <= 0:
            state.holding = False
            logger.debug(f"zero-hold released after tick {tick}")
        _enter_hold(state)
        output = TwistCommand.zero(TwistStage.SMOOTHED)
        # The hold is applied at the clamp stage; raw stays visible in the log.
        return ClampTick(output, raw, TwistCommand.zero(TwistStage.CLAMPED), bounds, factors,
                         error, sigma, perp, holding=True, in_tolerance=in_tolerance, converged=converged)

    if in_tolerance:
        _enter_hold(state)
        output = TwistCommand.zero(TwistStage.SMOOTHED)
    else:
        output = smooth(state.v_prev, state.w_prev, clamped, cfg)
        state.v_prev = output.linear
        state.w_prev = output.angular
    return ClampTick(output, raw, clamped, bounds, factors, error, sigma, perp,
                     in_tolerance=in_tolerance, converged=converged)


class ClampController(BaseController):
    """Controller Version 2: continuous adaptive hypersphere clamp."""

    mode = "twist"

    def __init__(self, config: V2Config):
        super().__init__("v2", config)
        self.state = V2State.create(config.history_len)

    def reset(self) -> None:
        self.state = V2State.create(self.config.history_len)
        self.dwell_count = 0

    @property
    def converged(self) -> bool:
        return self.state.in_tolerance_count >= self.config.dwell_ticks

    def tick(self, ee: Optional[Pose], target: Optional[Pose]) -> ControllerOutput:
        result = v2_tick(self.state, ee, target, self.config)
        self.dwell_count = self.state.in_tolerance_count
        return ControllerOutput(result.error, result.in_tolerance, result.converged,
                                holding=result.holding, sensor_fault=result.sensor_fault,
                                detail=result)
