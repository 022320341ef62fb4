# Pose alignment package
# Geometry, the two alignment controllers, the plant simulator and the trial harness

from .geometry import Pose, PoseError, TwistCommand, apply_twist, pose_error
from .controllers import ClampController, StepController, V1Config, V2Config
from .plant import PlantConfig, PosePlant
from .scenario import Scenario, load_scenario
from .records import TrialRecord, TrialSummary, read_log, write_log
from .harness import aggregate, compare_conditions, compute_metrics, run_bench, run_trial
from .plotting import emit_plots

__version__ = "0.1.0"

__all__ = [
    'Pose',
    'PoseError',
    'TwistCommand',
    'apply_twist',
    'pose_error',
    'ClampController',
    'StepController',
    'V1Config',
    'V2Config',
    'PlantConfig',
    'PosePlant',
    'Scenario',
    'load_scenario',
    'TrialRecord',
    'TrialSummary',
    'read_log',
    'write_log',
    'aggregate',
    'compare_conditions',
    'compute_metrics',
    'run_bench',
    'run_trial',
    'emit_plots',
]
