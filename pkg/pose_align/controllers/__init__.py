# Alignment controllers
# Step-and-settle (Version 1) and adaptive hypersphere clamp (Version 2)

from .base_controller import BaseController, ControllerOutput
from .step_controller import PoseStepCommand, StepController, StepKind, V1Config, V1State
from .clamp_controller import (
    ClampController,
    ClampTick,
    ShrinkFactors,
    V2Config,
    V2State,
    VelocityBounds,
)

__all__ = [
    'BaseController',
    'ControllerOutput',
    'StepController',
    'StepKind',
    'PoseStepCommand',
    'V1Config',
    'V1State',
    'ClampController',
    'ClampTick',
    'ShrinkFactors',
    'V2Config',
    'V2State',
    'VelocityBounds',
]
