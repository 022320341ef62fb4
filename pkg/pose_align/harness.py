"""Trial orchestration, metrics and controller comparison.

A trial runs on an integer sensor-tick clock. Every sensor tick the plant
senses; every ``sensor_rate / lowlevel_rate`` ticks the executor advances;
every ``sensor_rate / controller_rate`` ticks the controller consumes the
latest (latency-delayed) measurement; log rows are taken on controller ticks
at ``log_rate`` and carry that tick's values. A trial ends at the first log
tick where the controller reports convergence, or at ``max_sim_time``.
"""

import logging
import math
from collections import defaultdict, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Deque, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .config import (
    CONTROLLER_LABELS,
    CSV_COLUMNS,
    CSV_FLOAT_FORMAT,
    DEFAULT_D_TOL,
    DEFAULT_THETA_TOL,
    EXTRA_COLUMNS,
)
from .controllers import BaseController, ClampTick, ControllerOutput
from .controllers.clamp_controller import rms_perp
from .errors import ComparisonError, EmptyLogError, ExecutorBusyError, ScenarioMismatchError
from .geometry import Pose, TwistCommand
from .plant import PosePlant
from .records import TrialRecord, TrialSummary, write_log
from .scenario import Scenario, build_controller, load_scenario_dir
from .utils import log_duration

logger = logging.getLogger(__name__)

# Measured positions kept for the lateral wobble metric (controller ticks)
RMS_PERP_WINDOW = 10

# Path steps shorter than this carry no heading
CURVATURE_MIN_STEP_MM = 1e-3
# Δd excursions below this are treated as measurement noise
OSCILLATION_FLOOR_MM = 2.0

_NAN3 = (math.nan, math.nan, math.nan)


def _period_ticks(sensor_rate: float, rate: float) -> int:
    return max(1, int(round(sensor_rate / rate)))


def _dispatch(controller: BaseController, plant: PosePlant, output: ControllerOutput) -> None:
    if controller.mode == "twist":
        twist = output.detail.twist
        if not twist.is_finite():
            logger.error(f"non-finite twist {twist.linear} / {twist.angular} replaced by zero")
            twist = TwistCommand.zero(twist.stage)
        plant.set_twist(twist)
        return
    command = output.detail
    if command is not None and command.is_step:
        try:
            plant.execute_pose_step(command)
        except ExecutorBusyError:
            # The running step still completes and notifies the controller.
            logger.warning("pose step rejected, executor busy")


def _log_row(t: float, plant: PosePlant, ee: Optional[Pose], output: ControllerOutput,
             window: Deque[np.ndarray]) -> Dict[str, float]:
    error = output.error
    detail = output.detail
    if isinstance(detail, ClampTick):
        raw, clamped, smoothed = detail.raw, detail.clamped, detail.twist
        bounds, factors = detail.bounds, detail.factors
    else:
        raw = clamped = smoothed = plant.commanded_twist
        bounds = factors = None

    ee_pos = ee.position if ee is not None else _NAN3
    ee_q = ee.orientation if ee is not None else (math.nan,) * 4
    true = plant.true_pose

    row: Dict[str, float] = {"t": t}
    row.update(zip(("ee_x", "ee_y", "ee_z"), map(float, ee_pos)))
    row.update(zip(("ee_qw", "ee_qx", "ee_qy", "ee_qz"), map(float, ee_q)))
    row.update(zip(("true_x", "true_y", "true_z"), map(float, true.position)))
    row["dd_mm"] = error.delta_d if error is not None else math.nan
    row["dtheta_rad"] = error.delta_theta if error is not None else math.nan
    row["base_t"] = bounds.base_t if bounds is not None else math.nan
    row["base_r"] = bounds.base_r if bounds is not None else math.nan
    row["eff_t"] = bounds.eff_t if bounds is not None else math.nan
    row["eff_r"] = bounds.eff_r if bounds is not None else math.nan
    row["f_j"] = factors.f_j if factors is not None else math.nan
    row["f_k"] = factors.f_k if factors is not None else math.nan
    row["f_s"] = factors.f_s if factors is not None else math.nan
    for prefix, twist in (("raw", raw), ("c", clamped), ("s", smoothed)):
        row.update(_twist_columns(prefix, twist))
    row["hold"] = int(output.holding)
    row.update(zip(("true_qw", "true_qx", "true_qy", "true_qz"), map(float, true.orientation)))
    if error is not None and len(window) >= 2:
        row["rms_perp"] = rms_perp(np.stack(window), error.translation_dir)
    else:
        row["rms_perp"] = 0.0
    row["sensor_fault"] = int(output.sensor_fault)
    return row


def _twist_columns(prefix: str, twist: TwistCommand) -> Dict[str, float]:
    v, w = twist.linear, twist.angular
    return {
        f"v{prefix}_x": float(v[0]), f"v{prefix}_y": float(v[1]), f"v{prefix}_z": float(v[2]),
        f"w{prefix}_x": float(w[0]), f"w{prefix}_y": float(w[1]), f"w{prefix}_z": float(w[2]),
    }


@log_duration("run_trial")
def run_trial(scenario: Scenario, seed: int) -> TrialRecord:
    """Simulate one seeded trial of a scenario; non-convergence is flagged, not raised."""
    controller = build_controller(scenario)
    plant_cfg = scenario.build_plant_config(seed)
    plant = PosePlant(plant_cfg, scenario.initial_pose, scenario.goal_pose)
    sensor_rate = plant_cfg.sensor_rate

    lowlevel_every = _period_ticks(sensor_rate, plant_cfg.lowlevel_rate)
    control_every = _period_ticks(sensor_rate, controller.tick_rate)
    log_every = _period_ticks(sensor_rate, scenario.log_rate)
    last_tick = int(round(scenario.max_sim_time * sensor_rate))

    events: Dict[int, list] = defaultdict(list)
    for event in scenario.target_events:
        events[int(round(event.t * sensor_rate))].append(event)

    logger.info(f"trial {scenario.name} seed={seed}: {CONTROLLER_LABELS[scenario.controller]}, "
                f"plant '{scenario.plant_profile}'")
    window: Deque[np.ndarray] = deque(maxlen=RMS_PERP_WINDOW)
    rows: List[Dict[str, float]] = []
    for k in range(last_tick + 1):
        for event in events.get(k, ()):
            plant.move_target(np.array(event.offset), np.radians(event.rotvec_deg))
        if k > 0:
            if k % lowlevel_every == 0:
                plant.step_lowlevel()
            plant.sense()
        if k % control_every:
            continue

        if controller.mode == "step" and plant.poll_step_complete():
            controller.notify_step_complete()
        ee, target = plant.measure()
        output = controller.tick(ee, target)
        _dispatch(controller, plant, output)
        if ee is not None:
            window.append(ee.position)

        if k % log_every == 0:
            rows.append(_log_row(k / sensor_rate, plant, ee, output, window))
            if output.converged:
                break

    frame = pd.DataFrame(rows, columns=CSV_COLUMNS + EXTRA_COLUMNS)
    d_tol, theta_tol = scenario.tolerances
    summary = replace(
        compute_metrics(frame, d_tol, theta_tol),
        scenario=scenario.name,
        controller=scenario.controller,
        seed=seed,
        condition=scenario.condition_key(),
    )
    if summary.converged:
        logger.info(f"trial {scenario.name} seed={seed} converged in {summary.duration_s:.1f} s")
    else:
        logger.warning(f"trial {scenario.name} seed={seed} did not converge within "
                       f"{scenario.max_sim_time:g} s (final dd={summary.final_dd_mm:.2f} mm)")
    return TrialRecord(
        scenario=scenario.name,
        controller=scenario.controller,
        seed=seed,
        condition=summary.condition,
        rows=frame,
        summary=summary,
        log_rate=scenario.log_rate,
        plant_profile=scenario.plant_profile,
        d_tol=d_tol,
        theta_tol=theta_tol,
    )


def compute_metrics(rows: Union[pd.DataFrame, Sequence[Mapping[str, float]]],
                    d_tol: float = DEFAULT_D_TOL,
                    theta_tol: float = DEFAULT_THETA_TOL) -> TrialSummary:
    """Summary of a time-ordered log.

    ``duration_s`` is the time of the first row after which every row is
    within both tolerances (NaN when the last row is not); the trial counts
    as converged when its last row is within tolerance. Path shape is
    summarised by the turning of the true path per mm travelled and by the
    number of direction reversals of Δd larger than the noise floor.
    """
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    if frame.empty:
        raise EmptyLogError("cannot compute metrics of an empty log")

    t = frame["t"].to_numpy(dtype=float)
    dd = frame["dd_mm"].to_numpy(dtype=float)
    dtheta = frame["dtheta_rad"].to_numpy(dtype=float)
    with np.errstate(invalid="ignore"):
        inside = (dd <= d_tol) & (dtheta <= theta_tol)

    converged = bool(inside[-1])
    if converged:
        outside = np.flatnonzero(~inside)
        first = int(outside[-1]) + 1 if outside.size else 0
        duration = float(t[first] - t[0])
    else:
        duration = math.nan

    positions = frame[["true_x", "true_y", "true_z"]].to_numpy(dtype=float)
    steps = np.diff(positions, axis=0)
    lengths = np.linalg.norm(steps, axis=1)
    path = float(np.sum(lengths)) if len(positions) > 1 else 0.0

    max_perp = 0.0
    if "rms_perp" in frame.columns and frame["rms_perp"].notna().any():
        max_perp = float(frame["rms_perp"].max())

    return TrialSummary(
        duration_s=duration,
        final_dd_mm=float(dd[-1]),
        final_dtheta_deg=math.degrees(float(dtheta[-1])),
        path_length_mm=path,
        max_rms_perp_mm=max_perp,
        converged=converged,
        curvature_deg_per_mm=_curvature(steps[lengths > CURVATURE_MIN_STEP_MM], path),
        oscillations=_count_reversals(dd, OSCILLATION_FLOOR_MM),
    )


def _curvature(steps: np.ndarray, path: float) -> float:
    """Total turning angle between successive path steps, in degrees per mm travelled."""
    if len(steps) < 2 or path == 0.0:
        return 0.0
    a, b = steps[:-1], steps[1:]
    cross = np.linalg.norm(np.cross(a, b), axis=1)
    dot = np.einsum("ij,ij->i", a, b)
    return float(np.degrees(np.sum(np.arctan2(cross, dot)))) / path


def _count_reversals(values: np.ndarray, floor: float) -> int:
    """Direction changes of a series, ignoring excursions smaller than ``floor`` (hysteresis)."""
    values = values[~np.isnan(values)]
    if values.size < 2:
        return 0
    direction = 0
    extreme = float(values[0])
    count = 0
    for v in map(float, values[1:]):
        if direction == 0:
            if abs(v - extreme) > floor:
                direction = 1 if v > extreme else -1
                extreme = v
        elif direction * (v - extreme) > 0.0:
            extreme = v
        elif direction * (extreme - v) > floor:
            direction = -direction
            extreme = v
            count += 1
    return count


def aggregate(summaries: Iterable[TrialSummary]) -> pd.DataFrame:
    """Mean and sample standard deviation of every metric per (condition, controller)."""
    frame = pd.DataFrame([s.to_dict() for s in summaries])
    if frame.empty:
        raise EmptyLogError("nothing to aggregate")
    frame["converged"] = frame["converged"].astype(int)
    table = frame.groupby(["condition", "controller"], sort=True).agg(
        n=("seed", "count"),
        converged=("converged", "sum"),
        duration_mean=("duration_s", "mean"),
        duration_std=("duration_s", "std"),
        duration_median=("duration_s", "median"),
        final_dd_mean=("final_dd_mm", "mean"),
        final_dd_std=("final_dd_mm", "std"),
        final_dtheta_mean=("final_dtheta_deg", "mean"),
        final_dtheta_std=("final_dtheta_deg", "std"),
        path_length_mean=("path_length_mm", "mean"),
        path_length_std=("path_length_mm", "std"),
        max_rms_perp_mean=("max_rms_perp_mm", "mean"),
        curvature_mean=("curvature_deg_per_mm", "mean"),
        curvature_std=("curvature_deg_per_mm", "std"),
        oscillations_mean=("oscillations", "mean"),
    )
    return table.reset_index()


def _stats(values: Sequence[float]) -> tuple:
    # Sorted so that group statistics do not depend on trial order.
    arr = np.sort(np.asarray([v for v in values if not math.isnan(v)], dtype=float))
    if arr.size == 0:
        return math.nan, math.nan, math.nan
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else math.nan
    return float(np.mean(arr)), std, float(np.median(arr))


@dataclass(frozen=True)
class GroupStats:
    """One row of the comparison table; durations only over converged trials."""

    name: str
    n: int
    converged: int
    duration_mean: float
    duration_std: float
    duration_median: float
    final_dd_mean: float
    final_dd_std: float
    final_dtheta_mean: float
    final_dtheta_std: float
    path_length_mean: float
    path_length_std: float
    max_rms_perp_mean: float
    curvature_mean: float
    curvature_std: float
    oscillations_mean: float

    @classmethod
    def from_summaries(cls, name: str, summaries: Sequence[TrialSummary]) -> "GroupStats":
        duration = _stats([s.duration_s for s in summaries])
        dd = _stats([s.final_dd_mm for s in summaries])
        dtheta = _stats([s.final_dtheta_deg for s in summaries])
        path = _stats([s.path_length_mm for s in summaries])
        perp = _stats([s.max_rms_perp_mm for s in summaries])
        curvature = _stats([s.curvature_deg_per_mm for s in summaries])
        oscillations = _stats([float(s.oscillations) for s in summaries])
        return cls(
            name=name,
            n=len(summaries),
            converged=sum(1 for s in summaries if s.converged),
            duration_mean=duration[0],
            duration_std=duration[1],
            duration_median=duration[2],
            final_dd_mean=dd[0],
            final_dd_std=dd[1],
            final_dtheta_mean=dtheta[0],
            final_dtheta_std=dtheta[1],
            path_length_mean=path[0],
            path_length_std=path[1],
            max_rms_perp_mean=perp[0],
            curvature_mean=curvature[0],
            curvature_std=curvature[1],
            oscillations_mean=oscillations[0],
        )


def _pm(mean: float, std: float, digits: int = 1) -> str:
    if math.isnan(mean):
        return "n/a"
    if math.isnan(std):
        return f"{mean:.{digits}f}"
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


@dataclass
class ComparisonReport:
    condition: str
    baseline: str
    groups: Dict[str, GroupStats]
    duration_ratios: Dict[str, float] = field(default_factory=dict)
    median_ratios: Dict[str, float] = field(default_factory=dict)

    @property
    def duration_ratio(self) -> float:
        """Mean-duration ratio of the (first) non-baseline group to the baseline."""
        return next(iter(self.duration_ratios.values()))

    @property
    def median_ratio(self) -> float:
        return next(iter(self.median_ratios.values()))

    def to_frame(self, label: str = "") -> pd.DataFrame:
        records = []
        for name, g in self.groups.items():
            records.append({
                "Condition": label or self.condition[:8],
                "Controller": CONTROLLER_LABELS.get(name, name),
                "Converged": f"{g.converged}/{g.n}",
                "Duration (s)": _pm(g.duration_mean, g.duration_std),
                "Final Δd (mm)": _pm(g.final_dd_mean, g.final_dd_std, 2),
                "Final Δθ (deg)": _pm(g.final_dtheta_mean, g.final_dtheta_std, 2),
                "Path (mm)": _pm(g.path_length_mean, g.path_length_std, 0),
                "Max RMS⊥ (mm)": "n/a" if math.isnan(g.max_rms_perp_mean) else f"{g.max_rms_perp_mean:.2f}",
                "Curvature (deg/mm)": _pm(g.curvature_mean, g.curvature_std, 3),
                "Oscillations": "n/a" if math.isnan(g.oscillations_mean) else f"{g.oscillations_mean:.1f}",
            })
        return pd.DataFrame(records)

    def summary_lines(self, label: str = "") -> List[str]:
        label = label or self.condition[:8]
        base = self.groups[self.baseline]
        base_name = CONTROLLER_LABELS.get(self.baseline, self.baseline)
        lines = []
        for name, ratio in self.duration_ratios.items():
            other = self.groups[name]
            other_name = CONTROLLER_LABELS.get(name, name)
            lines.append(f"{label}: {other_name} / {base_name} duration ratio "
                         f"mean {ratio:.3f}, median {self.median_ratios[name]:.3f}")
            if not (math.isnan(other.final_dtheta_mean) or math.isnan(base.final_dtheta_mean)):
                direction = "higher" if other.final_dtheta_mean >= base.final_dtheta_mean else "lower"
                lines.append(f"{label}: {other_name} final Δθ is {direction} than {base_name} "
                             f"({other.final_dtheta_mean:.2f} vs {base.final_dtheta_mean:.2f} deg)")
        return lines


def _ratio(value: float, baseline: float) -> float:
    """``value / baseline``; 1.0 when both are zero, inf when only the baseline is."""
    if baseline == 0.0:
        return 1.0 if value == 0.0 else math.inf
    return value / baseline


def _summary_of(item: Union[TrialRecord, TrialSummary]) -> TrialSummary:
    return item.summary if isinstance(item, TrialRecord) else item


def compare_conditions(groups: Mapping[str, Sequence[Union[TrialRecord, TrialSummary]]],
                       baseline: str = "v1") -> ComparisonReport:
    """Per-group duration and accuracy statistics plus duration ratios against ``baseline``.

    Raises:
        ComparisonError: fewer than two groups
        EmptyLogError: a group without trials
        ScenarioMismatchError: trials that were not run on the same condition
    """
    if len(groups) < 2:
        raise ComparisonError(f"need at least two groups to compare, got {len(groups)}")
    summaries = {name: [_summary_of(item) for item in items] for name, items in groups.items()}
    for name, items in summaries.items():
        if not items:
            raise EmptyLogError(f"group '{name}' has no trials")
    conditions = {s.condition for items in summaries.values() for s in items}
    if len(conditions) > 1:
        raise ScenarioMismatchError(f"groups were run on {len(conditions)} different conditions")

    if baseline not in summaries:
        baseline = next(iter(summaries))
    stats = {name: GroupStats.from_summaries(name, items) for name, items in summaries.items()}
    base = stats[baseline]
    report = ComparisonReport(condition=conditions.pop(), baseline=baseline, groups=stats)
    for name, g in stats.items():
        if name == baseline:
            continue
        report.duration_ratios[name] = _ratio(g.duration_mean, base.duration_mean)
        report.median_ratios[name] = _ratio(g.duration_median, base.duration_median)
    return report


@dataclass
class BenchResult:
    records: List[TrialRecord]
    comparisons: Dict[str, ComparisonReport]
    summary: pd.DataFrame
    report_text: str
    out_dir: Path


def _run_task(task: tuple) -> TrialRecord:
    scenario, seed = task
    return run_trial(scenario, seed)


def format_report(comparisons: Mapping[str, ComparisonReport]) -> str:
    if not comparisons:
        return "no comparable conditions\n"
    table = pd.concat([report.to_frame(label) for label, report in comparisons.items()],
                      ignore_index=True)
    lines = [table.to_string(index=False), ""]
    for label, report in comparisons.items():
        lines.extend(report.summary_lines(label))
    return "\n".join(lines) + "\n"


@log_duration("run_bench")
def run_bench(scenario_dir: Union[str, Path], seeds: Optional[Sequence[int]],
              out_dir: Union[str, Path], jobs: int = 1) -> BenchResult:
    """Run every scenario in a directory for every seed and compare controllers per condition.

    Writes one CSV log (+ extras companion and summary sidecar) per trial, ``summary.csv`` and
    ``report.txt`` into ``out_dir``.
    """
    scenarios = load_scenario_dir(scenario_dir)
    tasks = [(scenario, seed) for scenario in scenarios
             for seed in (seeds if seeds is not None else scenario.seeds)]
    logger.info(f"bench: {len(scenarios)} scenarios, {len(tasks)} trials, {jobs} job(s)")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(task) for task in tasks]

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for record in records:
        write_log(record, out_dir / f"{record.stem}.csv")

    summary = pd.DataFrame([{**r.summary.to_dict(), "plant_profile": r.plant_profile} for r in records])
    summary.to_csv(out_dir / "summary.csv", index=False, float_format=CSV_FLOAT_FORMAT)

    by_condition: Dict[str, List[TrialRecord]] = defaultdict(list)
    for record in records:
        by_condition[record.condition].append(record)

    comparisons: Dict[str, ComparisonReport] = {}
    for key, items in by_condition.items():
        label = items[0].plant_profile or key[:8]
        if label in comparisons:
            label = f"{label}-{key[:8]}"
        groups: Dict[str, List[TrialRecord]] = defaultdict(list)
        for record in items:
            groups[record.controller].append(record)
        if len(groups) < 2:
            logger.warning(f"condition {label} has only {', '.join(groups)}; not compared")
            continue
        comparisons[label] = compare_conditions(dict(sorted(groups.items())))

    report_text = format_report(comparisons)
    with open(out_dir / "report.txt", "w", encoding="utf-8") as f:
        f.write(report_text)
    logger.info(f"bench finished, report written to {out_dir / 'report.txt'}")
    return BenchResult(records, comparisons, summary, report_text, out_dir)
