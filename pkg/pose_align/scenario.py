"""Scenario files: one YAML document fully determines a trial condition.

Example::

    name: v2_moderate
    controller: v2
    controller_profile: speed_first
    controller_config: {tau_lin: 0.3}
    plant_profile: moderate
    plant: {measurement_latency: 3}
    initial: {position: [571, -59, 221], rotvec_deg: [0, 63.64, 63.64]}
    target: {position: [871, -459, 221]}
    max_sim_time: 120
    seeds: [0, 1, 2]

Angles in ``controller_config`` and ``plant`` overrides are radians, like the
profiles they override. Pose orientations take either a scalar-first unit
quaternion (``orientation``) or a rotation vector in degrees (``rotvec_deg``).
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import (
    CONTROLLER_PROFILES,
    DEFAULT_CONTROLLER_PROFILE,
    DEFAULT_SEEDS,
    DEFAULT_TARGET_POSITION,
    PLANT_PROFILES,
)
from .controllers import BaseController, ClampController, StepController, V1Config, V2Config
from .errors import ScenarioError
from .geometry import Pose
from .plant import PlantConfig

logger = logging.getLogger(__name__)

Vector3 = Tuple[float, float, float]

# Condition keys ignore what differs between the controllers of one condition.
_CONTROLLER_FIELDS = {"name", "controller", "controller_profile", "controller_config", "seeds"}


class PoseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    position: Vector3
    orientation: Optional[Tuple[float, float, float, float]] = None
    rotvec_deg: Optional[Vector3] = None

    @model_validator(mode="after")
    def _one_orientation(self) -> "PoseSpec":
        if self.orientation is not None and self.rotvec_deg is not None:
            raise ValueError("give either orientation or rotvec_deg, not both")
        self.to_pose()
        return self

    def to_pose(self) -> Pose:
        if self.orientation is not None:
            return Pose.from_raw(self.position, self.orientation)
        if self.rotvec_deg is not None:
            return Pose.from_rotvec(self.position, np.radians(self.rotvec_deg))
        return Pose.from_rotvec(self.position, (0.0, 0.0, 0.0))


class TargetEvent(BaseModel):
    """Scripted target move at simulated time ``t`` (world-frame offset, body-frame rotation)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    t: float = Field(ge=0.0)
    offset: Vector3 = (0.0, 0.0, 0.0)
    rotvec_deg: Vector3 = (0.0, 0.0, 0.0)


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "scenario"
    controller: Literal["v1", "v2"]
    controller_profile: Optional[str] = None
    controller_config: Dict[str, Any] = Field(default_factory=dict)
    plant_profile: str = "clean"
    plant: Dict[str, Any] = Field(default_factory=dict)
    initial: PoseSpec
    target: PoseSpec = PoseSpec(position=DEFAULT_TARGET_POSITION)
    approach_offset: float = Field(0.0, ge=0.0)
    max_sim_time: float = Field(120.0, gt=0.0)
    seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_SEEDS), min_length=1)
    log_rate: float = Field(10.0, gt=0.0)
    target_events: List[TargetEvent] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_condition(self) -> "Scenario":
        if "rng_seed" in self.plant:
            raise ValueError("rng_seed comes from the trial seed, not the plant section")
        controller_cfg = self.build_controller_config()
        plant_cfg = self.build_plant_config(0)
        if self.log_rate > plant_cfg.sensor_rate:
            raise ValueError("log_rate must not exceed the sensor rate")
        control_rate = 1.0 / controller_cfg.tick_dt
        sensor_ticks = {
            "low-level": _ticks_per_period(plant_cfg.sensor_rate, plant_cfg.lowlevel_rate),
            "controller": _ticks_per_period(plant_cfg.sensor_rate, control_rate),
            "log": _ticks_per_period(plant_cfg.sensor_rate, self.log_rate),
        }
        for label, ticks in sensor_ticks.items():
            if ticks is None:
                raise ValueError(f"{label} rate must divide the sensor rate {plant_cfg.sensor_rate:g} Hz")
        if sensor_ticks["log"] % sensor_ticks["controller"]:
            raise ValueError("log period must be a whole number of controller periods")
        return self

    @property
    def resolved_controller_profile(self) -> str:
        return self.controller_profile or DEFAULT_CONTROLLER_PROFILE[self.controller]

    def build_controller_config(self) -> Union[V1Config, V2Config]:
        profiles = CONTROLLER_PROFILES[self.controller]
        profile = self.resolved_controller_profile
        if profile not in profiles:
            raise ValueError(f"unknown {self.controller} profile '{profile}' "
                             f"(available: {', '.join(sorted(profiles))})")
        params = {**profiles[profile], **self.controller_config}
        model = V1Config if self.controller == "v1" else V2Config
        return model(**params)

    def build_plant_config(self, seed: int) -> PlantConfig:
        if self.plant_profile not in PLANT_PROFILES:
            raise ValueError(f"unknown plant profile '{self.plant_profile}' "
                             f"(available: {', '.join(sorted(PLANT_PROFILES))})")
        return PlantConfig(**{**PLANT_PROFILES[self.plant_profile], **self.plant, "rng_seed": seed})

    @property
    def initial_pose(self) -> Pose:
        return self.initial.to_pose()

    @property
    def goal_pose(self) -> Pose:
        """Target pose shifted by the approach offset along world +z."""
        target = self.target.to_pose()
        if self.approach_offset == 0.0:
            return target
        return Pose(target.position + np.array([0.0, 0.0, self.approach_offset]), target.orientation)

    @property
    def tolerances(self) -> Tuple[float, float]:
        """Convergence tolerances (mm, rad) of the configured controller."""
        cfg = self.build_controller_config()
        return cfg.conv_d_tol, cfg.conv_theta_tol

    def condition_key(self) -> str:
        """Fingerprint of everything that has to match for two scenarios to be compared."""
        payload = self.model_dump(mode="json", exclude=_CONTROLLER_FIELDS)
        payload["plant"] = self.build_plant_config(0).model_dump(mode="json")
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _ticks_per_period(sensor_rate: float, rate: float) -> Optional[int]:
    ratio = sensor_rate / rate
    ticks = round(ratio)
    if ticks < 1 or not math.isclose(ratio, ticks, rel_tol=1e-9):
        return None
    return ticks


def scenario_from_dict(data: Dict[str, Any], default_name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    data = {"name": default_name, **data}
    try:
        return Scenario(**data)
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario '{data['name']}': {e}") from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate one scenario file; the file stem is the default name."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ScenarioError(f"cannot parse scenario {path}: {e}") from e
    scenario = scenario_from_dict(data, default_name=path.stem)
    logger.debug(f"loaded scenario '{scenario.name}' from {path}")
    return scenario


def load_scenario_dir(directory: Union[str, Path]) -> List[Scenario]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ScenarioError(f"scenario directory not found: {directory}")
    paths = sorted(p for p in directory.iterdir() if p.suffix in (".yaml", ".yml"))
    if not paths:
        raise ScenarioError(f"no scenario files in {directory}")
    return [load_scenario(p) for p in paths]


def build_controller(scenario: Scenario) -> BaseController:
    cfg = scenario.build_controller_config()
    if isinstance(cfg, V1Config):
        return StepController(cfg)
    return ClampController(cfg)
