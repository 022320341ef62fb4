"""Pose types and the raw error computations both controllers consume.

Conventions:
    - Quaternions are length-4 arrays in scalar-first Hamilton form
      ``[w, x, y, z]``.
    - Positions are millimeters, angles radians.
    - ``TwistCommand.linear`` is a world-frame velocity (mm/s);
      ``TwistCommand.angular`` is a body-frame (end-effector) angular
      velocity (rad/s), the frame in which ``axis(q_e^-1 q_t)`` lives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

# Allowed deviation of |q| from 1 before a quaternion is rejected
QUAT_NORM_TOL = 1e-6
# Below this translational error the direction is reported as the zero vector (mm)
TRANSLATION_EPS = 1e-9
# Below this angle the rotation axis is reported as the zero vector (rad)
AXIS_EPS = 1e-7

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
ZERO3 = np.zeros(3)


def _as_vector(values: Sequence[float], size: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise InvalidInputError(f"{name} must have {size} components, got {arr.shape[0]}")
    return arr


def _check_unit(q: np.ndarray, name: str = "quaternion") -> None:
    if not np.all(np.isfinite(q)):
        raise InvalidInputError(f"{name} has non-finite components: {q}")
    norm = math.sqrt(float(q @ q))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise InvalidInputError(f"{name} is not unit-norm (|q| = {norm:.9f})")


@dataclass(frozen=True, eq=False)
class Pose:
    """Position (mm) plus unit-quaternion orientation of an end-effector or target."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self) -> None:
        position = _as_vector(self.position, 3, "position")
        if not np.all(np.isfinite(position)):
            raise InvalidInputError(f"position has non-finite components: {position}")
        q = _as_vector(self.orientation, 4, "orientation")
        _check_unit(q, "orientation")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "orientation", q / math.sqrt(float(q @ q)))

    @classmethod
    def from_raw(cls, position: Sequence[float], quaternion: Sequence[float]) -> "Pose":
        """Build a pose from any finite, nonzero quaternion by normalizing it first."""
        q = _as_vector(quaternion, 4, "orientation")
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm == 0.0:
            raise InvalidInputError(f"cannot normalize quaternion {q}")
        return cls(position, q / norm)

    @classmethod
    def from_rotvec(cls, position: Sequence[float], rotvec: Sequence[float]) -> "Pose":
        return cls(position, quat_exp(_as_vector(rotvec, 3, "rotvec")))


@dataclass(frozen=True, eq=False)
class PoseError:
    """Scalar translational/rotational error with its direction and axis."""

    delta_d: float
    delta_theta: float
    translation_dir: np.ndarray
    rotation_axis: np.ndarray

    @property
    def translation(self) -> np.ndarray:
        """Error vector x_t - x_e (mm)."""
        return self.translation_dir * self.delta_d

    @property
    def rotation(self) -> np.ndarray:
        """Body-frame rotation vector axis * angle (rad)."""
        return self.rotation_axis * self.delta_theta


class TwistStage(str, Enum):
    RAW = "raw"
    CLAMPED = "clamped"
    SMOOTHED = "smoothed"


@dataclass(frozen=True, eq=False)
class TwistCommand:
    """6-DOF velocity: world-frame linear (mm/s) and body-frame angular (rad/s)."""

    linear: np.ndarray
    angular: np.ndarray
    stage: TwistStage = TwistStage.RAW

    def __post_init__(self) -> None:
        object.__setattr__(self, "linear", _as_vector(self.linear, 3, "linear"))
        object.__setattr__(self, "angular", _as_vector(self.angular, 3, "angular"))

    @classmethod
    def zero(cls, stage: TwistStage = TwistStage.RAW) -> "TwistCommand":
        return cls(ZERO3.copy(), ZERO3.copy(), stage)

    @property
    def linear_speed(self) -> float:
        return float(np.linalg.norm(self.linear))

    @property
    def angular_speed(self) -> float:
        return float(np.linalg.norm(self.angular))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.linear)) and np.all(np.isfinite(self.angular)))


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _hamilton(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_compose(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """Hamilton product ``a ⊗ b`` of two unit quaternions, renormalized."""
    q = _hamilton(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return q / math.sqrt(float(q @ q))


def quat_exp(rotvec: np.ndarray) -> np.ndarray:
    """Unit quaternion of the rotation vector ``rotvec`` (axis * angle)."""
    angle = math.sqrt(float(rotvec @ rotvec))
    if angle < 1e-12:
        q = np.array([1.0, 0.5 * rotvec[0], 0.5 * rotvec[1], 0.5 * rotvec[2]])
        return q / math.sqrt(float(q @ q))
    half = 0.5 * angle
    s = math.sin(half) / angle
    return np.array([math.cos(half), s * rotvec[0], s * rotvec[1], s * rotvec[2]])


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector of ``q`` for the representative with angle in [0, pi]."""
    w = float(q[0])
    vec = np.asarray(q[1:], dtype=float)
    if w < 0.0:
        w, vec = -w, -vec
    s = math.sqrt(float(vec @ vec))
    if s < 1e-15:
        return 2.0 * vec
    angle = 2.0 * math.atan2(s, w)
    return vec * (angle / s)


def quat_slerp(q0: np.ndarray, q1: np.ndarray, f: float) -> np.ndarray:
    """Spherical interpolation from q0 (f = 0) to q1 (f = 1) along the short arc."""
    rel = _hamilton(quat_conjugate(q0), q1)
    return quat_compose(q0, quat_exp(f * quat_log(rel)))


def rotation_angle(q: np.ndarray) -> float:
    """Geodesic angle of a unit quaternion, in [0, pi]."""
    s = math.sqrt(float(q[1] * q[1] + q[2] * q[2] + q[3] * q[3]))
    return 2.0 * math.atan2(s, abs(float(q[0])))


def pose_error(ee: Pose, target: Pose) -> PoseError:
    """Translational and rotational error from the end-effector to the target.

    delta_theta is the geodesic angle 2*arccos(|scalar part of q_t^-1 q_e|),
    evaluated through atan2 of the vector and scalar parts so that it stays
    accurate near zero. rotation_axis is the unit vector part of q_e^-1 q_t,
    taken from the representative with a non-negative scalar part.
    """
    _check_unit(ee.orientation, "end-effector orientation")
    _check_unit(target.orientation, "target orientation")

    diff = target.position - ee.position
    delta_d = math.sqrt(float(diff @ diff))
    translation_dir = diff / delta_d if delta_d > TRANSLATION_EPS else ZERO3.copy()

    rel = _hamilton(quat_conjugate(ee.orientation), target.orientation)
    w = float(rel[0])
    vec = rel[1:]
    if w < 0.0:
        w, vec = -w, -vec
    s = math.sqrt(float(vec @ vec))
    # arccos argument clamp folded in: atan2 never leaves [0, pi/2]
    delta_theta = 2.0 * math.atan2(s, min(w, 1.0))

    if delta_theta <= AXIS_EPS:
        rotation_axis = ZERO3.copy()
    else:
        rotation_axis = vec / s
        if w < 1e-12:
            # half-turn: q and -q describe the same rotation, pick a stable sign
            if rotation_axis[int(np.argmax(np.abs(rotation_axis)))] < 0.0:
                rotation_axis = -rotation_axis
    return PoseError(delta_d, delta_theta, translation_dir, rotation_axis)


def apply_twist(p: Pose, twist: TwistCommand, dt: float) -> Pose:
    """Integrate a constant twist for dt seconds: x += v*dt, q <- q ⊗ exp(w*dt)."""
    if dt <= 0.0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    position = p.position + twist.linear * dt
    orientation = quat_compose(p.orientation, quat_exp(twist.angular * dt))
    return Pose(position, orientation)
