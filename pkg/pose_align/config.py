import math
import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Project directories
BASE_DIR = Path(__file__).parent.parent
SCENARIO_DIR = Path(os.getenv("ALIGN_SCENARIO_DIR", BASE_DIR / "scenarios"))
BENCH_DIR = SCENARIO_DIR / "bench"
RESULTS_DIR = Path(os.getenv("ALIGN_RESULTS_DIR", BASE_DIR / "results"))

LOG_LEVEL = os.getenv("ALIGN_LOG_LEVEL", "INFO").upper()

# Stationary wheel used in the field trials, millimeters
DEFAULT_TARGET_POSITION = (871.0, -459.0, 221.0)

DEFAULT_SEEDS = list(range(10))

# Consecutive in-tolerance controller ticks before a run counts as converged.
# Shared by both controllers and the harness.
DWELL_TICKS = 5

# Controller Configuration
CONTROLLER_PROFILES = {
    "v1": {
        "default": {
            "s_min": 2.0,
            "s_max": 40.0,
            "r_low": 10.0,
            "r_high": 150.0,
            "theta_min": math.radians(0.5),
            "theta_max": math.radians(10.0),
            "buffer_len": 5,
            "warm_samples": 5,
            "jump_threshold": 15.0,
            "conv_d_tol": 3.0,
            "conv_theta_tol": math.radians(0.5),
            "tick_rate": 30.0,
            "dwell_ticks": DWELL_TICKS,
        },
    },
    "v2": {
        "speed_first": {
            "D_near": 3.0,
            "D_far": 120.0,
            "A_near": math.radians(0.5),
            "A_far": math.radians(20.0),
            "t_min": 6.0,
            "t_max": 80.0,
            "r_min": 0.03,
            "r_max": 0.5,
            "alpha_j": 0.2,
            "alpha_k": 0.05,
            "tau_jitter": 8.0,
            "epsilon": 0.01,
            "tau_lin": 0.2,
            "tau_rot": 0.2,
            "tick_dt": 1.0 / 30.0,
            "history_len": 10,
            "jump_threshold": 25.0,
            "hold_ticks": 9,
            "conv_d_tol": 3.0,
            "conv_theta_tol": math.radians(0.5),
            "dwell_ticks": DWELL_TICKS,
        },
        # Closer to the step-and-settle behaviour: slower envelope, heavier
        # smoothing, stronger reaction to jitter and off-axis motion.
        "smooth": {
            "D_near": 5.0,
            "D_far": 200.0,
            "A_near": math.radians(1.0),
            "A_far": math.radians(30.0),
            "t_min": 3.0,
            "t_max": 30.0,
            "r_min": 0.02,
            "r_max": 0.2,
            "alpha_j": 0.8,
            "alpha_k": 0.3,
            "tau_jitter": 4.0,
            "epsilon": 0.01,
            "tau_lin": 0.6,
            "tau_rot": 0.6,
            "tick_dt": 1.0 / 30.0,
            "history_len": 15,
            "jump_threshold": 15.0,
            "hold_ticks": 15,
            "conv_d_tol": 3.0,
            "conv_theta_tol": math.radians(0.5),
            "dwell_ticks": DWELL_TICKS,
        },
    },
}

DEFAULT_CONTROLLER_PROFILE = {"v1": "default", "v2": "speed_first"}

# Plant (simulated limb + executor + motion capture) Configuration
PLANT_PROFILES = {
    "clean": {
        "measurement_noise_sigma": 0.0,
        "measurement_noise_sigma_rad": 0.0,
        "measurement_latency": 0,
        "backlash_deadband": 0.0,
        "flex_offset_magnitude": 0.0,
        "flex_walk_sigma": 0.0,
        "tracking_lag_tau": 0.0,
    },
    "moderate": {
        "measurement_noise_sigma": 0.5,
        "measurement_noise_sigma_rad": 0.001,
        "measurement_latency": 2,
        "backlash_deadband": math.radians(2.0),
        "flex_offset_magnitude": 20.0,
        "flex_walk_sigma": 0.5,
        "tracking_lag_tau": 0.1,
    },
    "harsh": {
        "measurement_noise_sigma": 1.0,
        "measurement_noise_sigma_rad": 0.002,
        "measurement_latency": 6,
        "backlash_deadband": math.radians(10.0),
        "flex_offset_magnitude": 100.0,
        "flex_walk_sigma": 1.5,
        "tracking_lag_tau": 0.2,
    },
}

# Trial log schema
CSV_COLUMNS = [
    "t",
    "ee_x", "ee_y", "ee_z", "ee_qw", "ee_qx", "ee_qy", "ee_qz",
    "true_x", "true_y", "true_z",
    "dd_mm", "dtheta_rad",
    "base_t", "base_r", "eff_t", "eff_r",
    "f_j", "f_k", "f_s",
    "vraw_x", "vraw_y", "vraw_z", "wraw_x", "wraw_y", "wraw_z",
    "vc_x", "vc_y", "vc_z", "wc_x", "wc_y", "wc_z",
    "vs_x", "vs_y", "vs_z", "ws_x", "ws_y", "ws_z",
    "hold",
]

# Columns beyond the log schema, written to the ``.extras.csv`` companion
EXTRA_COLUMNS = ["true_qw", "true_qx", "true_qy", "true_qz", "rms_perp", "sensor_fault"]
TOLERANCE_COLUMNS = ["d_tol", "theta_tol"]

# Convergence tolerances for logs that carry none
DEFAULT_D_TOL = 3.0
DEFAULT_THETA_TOL = math.radians(0.5)

# summary.csv only; trial logs keep full round-trip precision
CSV_FLOAT_FORMAT = "%.10g"

# Status labels used in reports
CONTROLLER_LABELS = {
    "v1": "Version 1",
    "v2": "Version 2",
}
