import pytest
import yaml

from pose_align.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, build_parser, main
from pose_align.config import BENCH_DIR
from pose_align.report import load_results
from tests.strategies import INITIAL_POSITION, INITIAL_ROTVEC_DEG, TARGET_POSITION


def write_scenario(directory, name, **overrides):
    data = {
        "name": name,
        "controller": "v2",
        "plant_profile": "clean",
        "initial": {"position": list(INITIAL_POSITION), "rotvec_deg": list(INITIAL_ROTVEC_DEG)},
        "target": {"position": list(TARGET_POSITION)},
        "max_sim_time": 60.0,
        "seeds": [0],
    }
    data.update(overrides)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_validate(tmp_path, capsys, scenario_dir):
    assert main(["validate", str(scenario_dir / "v1_moderate.yaml")]) == EXIT_OK
    assert "OK" in capsys.readouterr().out

    bad = tmp_path / "bad.yaml"
    bad.write_text("controller: v9\ninitial: {position: [0, 0, 0]}\n")
    assert main(["validate", str(bad)]) == EXIT_ERROR
    assert main(["validate", str(tmp_path / "missing.yaml")]) == EXIT_ERROR


def test_run_writes_log_and_plots(tmp_path, capsys):
    scenario = write_scenario(tmp_path / "scenarios", "quick")
    out = tmp_path / "out"
    assert main(["run", str(scenario), "--out", str(out), "--plots", "--strict"]) == EXIT_OK
    assert "converged" in capsys.readouterr().out
    assert (out / "quick_seed0.csv").exists()
    assert (out / "quick_seed0.summary.json").exists()
    assert (out / "quick_seed0_velocity.png").exists()


def test_run_strict_reports_non_convergence(tmp_path):
    scenario = write_scenario(tmp_path / "scenarios", "short", max_sim_time=1.0)
    args = ["run", str(scenario), "--out", str(tmp_path / "out"), "--seed", "2"]
    assert main(args) == EXIT_OK
    assert main(args + ["--strict"]) == EXIT_NOT_CONVERGED
    assert (tmp_path / "out" / "short_seed2.csv").exists()


def test_plot_existing_logs(tmp_path):
    scenario = write_scenario(tmp_path / "scenarios", "quick", max_sim_time=2.0)
    assert main(["run", str(scenario), "--out", str(tmp_path / "out")]) == EXIT_OK
    plots = tmp_path / "plots"
    assert main(["plot", str(tmp_path / "out" / "quick_seed0.csv"), "--out", str(plots)]) == EXIT_OK
    assert (plots / "trajectories_clean.png").exists()
    assert main(["plot", str(tmp_path / "nope.csv"), "--out", str(plots)]) == EXIT_ERROR


def test_bench_compares_controllers(tmp_path, capsys):
    scenarios = tmp_path / "bench"
    write_scenario(scenarios, "v1_clean", controller="v1")
    write_scenario(scenarios, "v2_clean", controller="v2")
    out = tmp_path / "results"
    assert main(["bench", str(scenarios), "--seeds", "1", "--out", str(out)]) == EXIT_OK
    assert "duration ratio" in capsys.readouterr().out

    bundle = load_results(out)
    assert len(bundle.summary) == 2
    assert set(bundle.logs) == {"v1_clean_seed0", "v2_clean_seed0"}
    assert "Version 2" in bundle.report_text
    assert bundle.load_trial("v2_clean_seed0").summary.converged


def test_bench_defaults_to_shipped_scenarios(scenario_dir):
    args = build_parser().parse_args(["bench"])
    assert args.scenario_dir == BENCH_DIR
    assert sorted(p.name for p in BENCH_DIR.glob("*.yaml")) == sorted(
        p.name for p in (scenario_dir / "bench").glob("*.yaml"))


def test_bench_missing_directory(tmp_path):
    assert main(["bench", str(tmp_path / "none"), "--out", str(tmp_path / "out")]) == EXIT_ERROR


def test_load_results_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_results(tmp_path / "absent")
