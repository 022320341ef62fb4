"""Full ten-seed comparisons on the shipped bench scenarios."""

import pytest

from pose_align.geometry import TwistCommand
from pose_align.harness import compare_conditions, run_trial
from pose_align.scenario import load_scenario

pytestmark = pytest.mark.slow


def run_pair(scenario_dir, profile):
    records = {}
    for controller in ("v1", "v2"):
        scenario = load_scenario(scenario_dir / "bench" / f"{controller}_{profile}.yaml")
        records[controller] = [run_trial(scenario, seed) for seed in scenario.seeds]
    return records


def commands_finite(record):
    rows = record.rows
    for prefix in ("raw", "c", "s"):
        linear = rows[[f"v{prefix}_x", f"v{prefix}_y", f"v{prefix}_z"]].to_numpy(dtype=float)
        angular = rows[[f"w{prefix}_x", f"w{prefix}_y", f"w{prefix}_z"]].to_numpy(dtype=float)
        if not all(TwistCommand(v, w).is_finite() for v, w in zip(linear, angular)):
            return False
    return True


def test_moderate_clamp_is_faster_at_equal_accuracy(scenario_dir):
    records = run_pair(scenario_dir, "moderate")
    report = compare_conditions(records)
    v1, v2 = report.groups["v1"], report.groups["v2"]
    assert v1.converged >= 8
    assert v2.converged >= 8
    assert report.median_ratio <= 0.9
    assert v2.final_dd_mean <= v1.final_dd_mean + 1.0


def test_harsh_plant_mostly_converges_with_finite_commands(scenario_dir):
    records = run_pair(scenario_dir, "harsh")
    for controller in ("v1", "v2"):
        assert sum(r.summary.converged for r in records[controller]) >= 8
    for record in records["v1"] + records["v2"]:
        assert commands_finite(record)
