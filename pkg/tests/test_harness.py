import math
import random
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from pose_align.config import CSV_COLUMNS, DEFAULT_D_TOL, DEFAULT_THETA_TOL
from pose_align.errors import ComparisonError, EmptyLogError, LogFormatError, ScenarioMismatchError
from pose_align.geometry import Pose, TwistCommand
from pose_align.harness import _dispatch, aggregate, compare_conditions, compute_metrics, run_trial
from pose_align.plant import PlantConfig, PosePlant
from pose_align.plotting import emit_plots
from pose_align.records import (
    METRIC_FIELDS,
    TrialRecord,
    TrialSummary,
    extras_path,
    read_log,
    summary_path,
    write_log,
)
from pose_align.scenario import load_scenario
from tests.strategies import TARGET_POSITION


def row(t, dd, dtheta=0.0, x=0.0, y=0.0):
    return {"t": t, "dd_mm": dd, "dtheta_rad": dtheta, "true_x": x, "true_y": y, "true_z": 0.0}


def summary(duration, controller="v1", condition="c", seed=0, converged=True):
    return TrialSummary(
        duration_s=duration,
        final_dd_mm=1.0,
        final_dtheta_deg=0.2,
        path_length_mm=600.0,
        max_rms_perp_mm=0.5,
        converged=converged,
        scenario=f"{controller}_test",
        controller=controller,
        seed=seed,
        condition=condition,
    )


def test_trial_starting_at_target_converges_immediately(make_scenario):
    scenario = make_scenario(initial={"position": list(TARGET_POSITION)})
    record = run_trial(scenario, 0)
    assert record.summary.converged
    assert record.summary.duration_s == 0.0
    assert record.summary.path_length_mm == 0.0
    assert len(record.rows) == 3


@pytest.mark.parametrize("controller", ["v1", "v2"])
def test_noiseless_trial_converges_monotonically(make_scenario, controller):
    record = run_trial(make_scenario(controller=controller), 0)
    s = record.summary
    assert s.converged
    assert 0.0 < s.duration_s < 60.0
    assert s.final_dd_mm <= 3.0
    assert s.final_dtheta_deg <= 0.5
    assert np.all(np.diff(record.rows["dd_mm"].to_numpy()) <= 1e-6)
    assert np.all(np.diff(record.rows["dtheta_rad"].to_numpy()) <= 1e-6)
    # straight-line approach
    assert s.path_length_mm == pytest.approx(500.0 - s.final_dd_mm, abs=1.0)
    assert list(record.rows.columns[:len(CSV_COLUMNS)]) == CSV_COLUMNS
    assert (record.rows["t"].diff().dropna() > 0).all()


def test_clamp_is_faster_than_step_and_settle_on_clean_plant(make_scenario):
    v1 = run_trial(make_scenario(controller="v1"), 0).summary
    v2 = run_trial(make_scenario(controller="v2"), 0).summary
    assert v2.duration_s < v1.duration_s
    assert v1.condition == v2.condition


def test_non_convergence_is_flagged(make_scenario):
    record = run_trial(make_scenario(max_sim_time=2.0), 0)
    assert not record.summary.converged
    assert math.isnan(record.summary.duration_s)
    assert record.sim_time == pytest.approx(2.0)
    assert len(record.rows) == 21


def test_trial_is_deterministic(make_scenario, tmp_path):
    scenario = make_scenario(plant_profile="moderate", max_sim_time=10.0)
    first = write_log(run_trial(scenario, 3), tmp_path / "a" / "trial.csv")
    second = write_log(run_trial(scenario, 3), tmp_path / "b" / "trial.csv")
    assert first.read_bytes() == second.read_bytes()
    assert summary_path(first).read_bytes() == summary_path(second).read_bytes()


def test_zero_hold_after_target_jump(scenario_dir):
    record = run_trial(load_scenario(scenario_dir / "v2_zero_hold.yaml"), 0)
    rows = record.rows.set_index(record.rows["t"].round(6))

    def speed(t, prefix):
        r = rows.loc[t]
        return math.sqrt(r[f"{prefix}_x"] ** 2 + r[f"{prefix}_y"] ** 2 + r[f"{prefix}_z"] ** 2)

    assert rows.loc[2.9, "hold"] == 0
    for t in (3.0, 3.1, 3.2):
        assert rows.loc[t, "hold"] == 1
        assert speed(t, "vc") == 0.0
        assert speed(t, "vs") == 0.0
        assert speed(t, "vraw") > 0.0
    assert rows.loc[3.3, "hold"] == 0
    assert 0.0 < speed(3.3, "vs") < speed(3.3, "vc")
    assert record.summary.converged


def test_compute_metrics_single_row():
    s = compute_metrics([row(0.0, 1.0)])
    assert s.converged
    assert s.duration_s == 0.0
    assert s.path_length_mm == 0.0


def test_compute_metrics_path_and_duration():
    rows = [row(0.0, 10.0, x=0.0), row(0.1, 2.0, x=10.0), row(0.2, 5.0, x=20.0), row(0.3, 1.0, x=20.0)]
    s = compute_metrics(rows)
    assert s.path_length_mm == pytest.approx(20.0)
    assert s.converged
    assert s.duration_s == pytest.approx(0.3)
    assert s.final_dd_mm == 1.0


def test_compute_metrics_requires_rotation_in_tolerance_too():
    s = compute_metrics([row(0.0, 1.0, dtheta=math.radians(2.0))])
    assert not s.converged
    assert math.isnan(s.duration_s)
    assert s.final_dtheta_deg == pytest.approx(2.0)


def test_compute_metrics_empty_log():
    with pytest.raises(EmptyLogError):
        compute_metrics([])


def test_compute_metrics_straight_line_has_no_curvature_or_oscillation():
    s = compute_metrics([row(0.1 * i, 50.0 - 10.0 * i, x=10.0 * i) for i in range(5)])
    assert s.path_length_mm == pytest.approx(40.0)
    assert s.curvature_deg_per_mm == 0.0
    assert s.oscillations == 0


def test_compute_metrics_zig_zag():
    ys = (0.0, 10.0, 0.0, 10.0, 0.0)
    dds = (20.0, 12.0, 20.0, 12.0, 20.0)
    s = compute_metrics([row(0.1 * i, dds[i], x=10.0 * i, y=ys[i]) for i in range(5)])
    # three right-angle turns over four 10*sqrt(2) mm legs
    assert s.curvature_deg_per_mm == pytest.approx(270.0 / (40.0 * math.sqrt(2.0)))
    assert s.oscillations == 3


def test_oscillations_ignore_noise_and_dropouts():
    dds = (20.0, 19.0, math.nan, 19.5, 18.0, 18.8, 17.0, 10.0)
    s = compute_metrics([row(0.1 * i, d) for i, d in enumerate(dds)])
    assert s.oscillations == 0
    assert s.curvature_deg_per_mm == 0.0


def test_aggregate_mean_and_sample_std():
    table = aggregate([summary(92.9, seed=0), summary(90.9, seed=1), summary(94.9, seed=2)])
    assert len(table) == 1
    assert table.loc[0, "duration_mean"] == pytest.approx(92.9)
    assert table.loc[0, "duration_std"] == pytest.approx(2.0)
    assert table.loc[0, "n"] == 3
    assert table.loc[0, "converged"] == 3


def test_compare_identical_groups_ratio_one():
    group = [summary(d, seed=i) for i, d in enumerate((30.0, 31.0, 29.0))]
    report = compare_conditions({"v1": group, "v2": [replace_controller(s, "v2") for s in group]})
    assert report.duration_ratio == pytest.approx(1.0)
    assert report.median_ratio == pytest.approx(1.0)


def replace_controller(s: TrialSummary, controller: str) -> TrialSummary:
    return TrialSummary(**{**s.to_dict(), "controller": controller})


def test_compare_duration_ratio():
    report = compare_conditions({
        "v1": [summary(60.0, seed=0), summary(60.0, seed=1)],
        "v2": [summary(45.0, "v2", seed=0), summary(45.0, "v2", seed=1)],
    })
    assert report.baseline == "v1"
    assert report.duration_ratio == pytest.approx(0.75)
    lines = report.summary_lines("moderate")
    assert "0.750" in lines[0]
    frame = report.to_frame("moderate")
    assert list(frame["Controller"]) == ["Version 1", "Version 2"]


def test_compare_ignores_unconverged_durations():
    report = compare_conditions({
        "v1": [summary(60.0), summary(math.nan, converged=False, seed=1)],
        "v2": [summary(30.0, "v2")],
    })
    assert report.groups["v1"].converged == 1
    assert report.duration_ratio == pytest.approx(0.5)


def test_aggregate_and_report_carry_path_shape():
    v1 = [replace(summary(30.0, seed=i), curvature_deg_per_mm=c, oscillations=o)
          for i, (c, o) in enumerate(((0.1, 2), (0.3, 4)))]
    v2 = [replace(summary(20.0, "v2", seed=i), curvature_deg_per_mm=0.05, oscillations=0) for i in range(2)]
    table = aggregate(v1 + v2)
    assert table.loc[0, "curvature_mean"] == pytest.approx(0.2)
    assert table.loc[0, "oscillations_mean"] == pytest.approx(3.0)
    assert table.loc[1, "curvature_std"] == pytest.approx(0.0)

    report = compare_conditions({"v1": v1, "v2": v2})
    assert report.groups["v1"].oscillations_mean == pytest.approx(3.0)
    frame = report.to_frame("clean")
    assert list(frame["Oscillations"]) == ["3.0", "0.0"]
    assert frame.loc[0, "Curvature (deg/mm)"] == "0.200 ± 0.141"


def test_compare_trials_starting_at_target(make_scenario):
    groups = {
        c: [run_trial(make_scenario(controller=c, initial={"position": list(TARGET_POSITION)}), 0)]
        for c in ("v1", "v2")
    }
    report = compare_conditions(groups)
    assert report.groups["v1"].duration_mean == 0.0
    assert report.duration_ratio == 1.0
    assert report.median_ratio == 1.0
    assert "mean 1.000" in report.summary_lines()[0]


def test_compare_zero_baseline_duration_is_infinite():
    report = compare_conditions({"v1": [summary(0.0)], "v2": [summary(5.0, "v2")]})
    assert report.duration_ratio == math.inf
    assert report.median_ratio == math.inf


def test_non_finite_twist_is_replaced_by_zero():
    plant = PosePlant(PlantConfig(), Pose([0.0, 0.0, 0.0]), Pose([100.0, 0.0, 0.0]))
    twist = TwistCommand([math.nan, 1.0, 0.0], [0.0, 0.0, 0.0])
    _dispatch(SimpleNamespace(mode="twist"), plant, SimpleNamespace(detail=SimpleNamespace(twist=twist)))
    assert plant.twist_setpoint.is_finite()
    assert plant.twist_setpoint.linear_speed == 0.0


def test_compare_rejects_bad_groups():
    with pytest.raises(ComparisonError):
        compare_conditions({"v1": [summary(10.0)]})
    with pytest.raises(EmptyLogError):
        compare_conditions({"v1": [summary(10.0)], "v2": []})
    with pytest.raises(ScenarioMismatchError):
        compare_conditions({"v1": [summary(10.0)], "v2": [summary(8.0, "v2", condition="other")]})


def test_compare_is_permutation_invariant():
    rng = random.Random(5)
    v1 = [summary(d, seed=i) for i, d in enumerate((20.1, 35.7, 28.3, 41.9, 30.0))]
    v2 = [summary(d, "v2", seed=i) for i, d in enumerate((12.2, 15.8, 11.1, 19.4, 14.0))]
    report = compare_conditions({"v1": v1, "v2": v2})
    for _ in range(5):
        rng.shuffle(v1)
        rng.shuffle(v2)
        shuffled = compare_conditions({"v1": list(v1), "v2": list(v2)})
        assert shuffled.groups == report.groups
        assert shuffled.duration_ratios == report.duration_ratios


def test_write_and_read_log(make_scenario, tmp_path):
    record = run_trial(make_scenario(), 0)
    path = write_log(record, tmp_path / f"{record.stem}.csv")
    assert path.name == "test_seed0.csv"
    assert pd.read_csv(path).columns.tolist() == CSV_COLUMNS

    loaded = read_log(path)
    assert (loaded.scenario, loaded.controller, loaded.seed) == ("test", "v2", 0)
    assert loaded.condition == record.condition
    assert loaded.summary == record.summary
    assert len(loaded.rows) == len(record.rows)


def same_metric(a, b) -> bool:
    return a == b or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))


@pytest.mark.parametrize("overrides", [
    {"controller": "v1", "controller_config": {"conv_d_tol": 20.0, "conv_theta_tol": 0.1}},
    {"plant_profile": "moderate", "max_sim_time": 60.0},
])
def test_log_without_sidecar_recomputes_summary(make_scenario, tmp_path, overrides):
    scenario = make_scenario(**overrides)
    record = run_trial(scenario, 1)
    path = write_log(record, tmp_path / "trial.csv")
    assert extras_path(path).exists()
    assert read_log(path).d_tol == scenario.tolerances[0]

    summary_path(path).unlink()
    loaded = read_log(path)
    assert (loaded.d_tol, loaded.theta_tol) == scenario.tolerances
    stored = record.summary
    for name in METRIC_FIELDS:
        assert same_metric(getattr(loaded.summary, name), getattr(stored, name)), name
    if scenario.plant_profile == "moderate":
        assert stored.max_rms_perp_mm > 0.0
    else:
        assert stored.converged and stored.final_dd_mm > 3.0


def test_log_without_companions_uses_default_tolerances(make_scenario, tmp_path):
    record = run_trial(make_scenario(controller="v1"), 0)
    path = write_log(record, tmp_path / "trial.csv")
    summary_path(path).unlink()
    extras_path(path).unlink()
    loaded = read_log(path)
    assert (loaded.d_tol, loaded.theta_tol) == (DEFAULT_D_TOL, DEFAULT_THETA_TOL)
    assert loaded.summary.converged == record.summary.converged
    assert loaded.summary.path_length_mm == record.summary.path_length_mm
    assert loaded.summary.max_rms_perp_mm == 0.0


def test_unconverged_summary_round_trips_nan(make_scenario, tmp_path):
    record = run_trial(make_scenario(max_sim_time=1.0), 0)
    loaded = read_log(write_log(record, tmp_path / "short.csv"))
    assert not loaded.summary.converged
    assert math.isnan(loaded.summary.duration_s)


def test_log_errors(tmp_path):
    empty = TrialRecord("s", "v2", 0, "c", pd.DataFrame(columns=CSV_COLUMNS), summary(1.0))
    with pytest.raises(EmptyLogError):
        write_log(empty, tmp_path / "empty.csv")
    with pytest.raises(EmptyLogError):
        emit_plots([], tmp_path)

    other = tmp_path / "other.csv"
    other.write_text("a,b\n1,2\n")
    with pytest.raises(LogFormatError):
        read_log(other)
    blank = tmp_path / "blank.csv"
    blank.write_text("")
    with pytest.raises(EmptyLogError):
        read_log(blank)


def test_emit_plots_writes_pngs(make_scenario, tmp_path):
    records = [run_trial(make_scenario(controller=c, max_sim_time=3.0), 0) for c in ("v1", "v2")]
    records[0].scenario = "v1_test"
    paths = emit_plots(records, tmp_path / "plots")
    names = {p.name for p in paths}
    assert {"v1_test_seed0_errors.png", "test_seed0_velocity.png", "trajectories_clean.png"} <= names
    for p in paths:
        assert p.stat().st_size > 0


def test_emit_plots_one_trajectory_figure_per_condition(make_scenario, tmp_path):
    records = [
        run_trial(make_scenario(controller=c, plant_profile=profile, max_sim_time=2.0), 0)
        for profile in ("clean", "moderate")
        for c in ("v1", "v2")
    ]
    paths = emit_plots(records, tmp_path / "plots")
    trajectories = sorted(p.name for p in paths if p.name.startswith("trajectories"))
    assert trajectories == ["trajectories_clean.png", "trajectories_moderate.png"]

    # same plant profile, different condition
    other = run_trial(make_scenario(plant_profile="clean", max_sim_time=2.0, approach_offset=50.0), 0)
    paths = emit_plots(records[:2] + [other], tmp_path / "mixed")
    trajectories = {p.name for p in paths if p.name.startswith("trajectories")}
    assert trajectories == {f"trajectories_clean_{records[0].condition[:8]}.png",
                            f"trajectories_clean_{other.condition[:8]}.png"}
