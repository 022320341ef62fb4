"""Trial records and their on-disk form.

A trial is stored as three files sharing a stem: the CSV log with the fixed
column schema, an ``.extras.csv`` companion with the columns the log schema
leaves out (true orientation, lateral RMS, sensor-fault flag and the
convergence tolerances), and a ``.summary.json`` sidecar.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd

from .config import CSV_COLUMNS, DEFAULT_D_TOL, DEFAULT_THETA_TOL, EXTRA_COLUMNS, TOLERANCE_COLUMNS
from .errors import EmptyLogError, LogFormatError

logger = logging.getLogger(__name__)

SUMMARY_SUFFIX = ".summary.json"
EXTRAS_SUFFIX = ".extras.csv"

METRIC_FIELDS = (
    "duration_s",
    "final_dd_mm",
    "final_dtheta_deg",
    "path_length_mm",
    "max_rms_perp_mm",
    "curvature_deg_per_mm",
    "oscillations",
    "converged",
)


@dataclass(frozen=True)
class TrialSummary:
    """Per-trial metrics (durations in s, distances in mm, angles in degrees)."""

    duration_s: float
    final_dd_mm: float
    final_dtheta_deg: float
    path_length_mm: float
    max_rms_perp_mm: float
    converged: bool
    curvature_deg_per_mm: float = 0.0
    oscillations: int = 0
    scenario: str = ""
    controller: str = ""
    seed: int = -1
    condition: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrialSummary":
        known = {f.name for f in fields(cls)}
        values = {k: (math.nan if v is None else v) for k, v in data.items() if k in known}
        values["converged"] = bool(values.get("converged", False))
        return cls(**values)


@dataclass
class TrialRecord:
    """Time-ordered log rows of one trial plus its summary."""

    scenario: str
    controller: str
    seed: int
    condition: str
    rows: pd.DataFrame
    summary: TrialSummary
    log_rate: float = 10.0
    plant_profile: str = ""
    d_tol: float = DEFAULT_D_TOL
    theta_tol: float = DEFAULT_THETA_TOL

    @property
    def sim_time(self) -> float:
        return float(self.rows["t"].iloc[-1]) if len(self.rows) else 0.0

    @property
    def stem(self) -> str:
        return f"{self.scenario}_seed{self.seed}"


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def summary_path(log_path: Union[str, Path]) -> Path:
    log_path = Path(log_path)
    return log_path.with_name(log_path.stem + SUMMARY_SUFFIX)


def extras_path(log_path: Union[str, Path]) -> Path:
    log_path = Path(log_path)
    return log_path.with_name(log_path.stem + EXTRAS_SUFFIX)


def write_log(record: TrialRecord, path: Union[str, Path]) -> Path:
    """Write the CSV log (exact column schema), its extras companion and the summary sidecar.

    Floats are written at full round-trip precision so that
    :func:`~pose_align.harness.compute_metrics` on the re-read rows
    reproduces the stored summary.
    """
    if record.rows.empty:
        raise EmptyLogError(f"trial {record.stem} has no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    frame = record.rows.reindex(columns=CSV_COLUMNS)
    frame["hold"] = frame["hold"].fillna(0).astype(int)
    frame.to_csv(path, index=False)

    extras = record.rows.reindex(columns=["t"] + EXTRA_COLUMNS)
    extras["sensor_fault"] = extras["sensor_fault"].fillna(0).astype(int)
    extras["d_tol"] = record.d_tol
    extras["theta_tol"] = record.theta_tol
    extras.to_csv(extras_path(path), index=False)

    sidecar = {
        "scenario": record.scenario,
        "controller": record.controller,
        "seed": record.seed,
        "condition": record.condition,
        "plant_profile": record.plant_profile,
        "log_rate": record.log_rate,
        "d_tol": record.d_tol,
        "theta_tol": record.theta_tol,
        "summary": {k: _json_safe(v) for k, v in record.summary.to_dict().items()},
    }
    with open(summary_path(path), "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug(f"wrote {len(frame)} rows to {path}")
    return path


def _read_extras(path: Path, rows: pd.DataFrame) -> Optional[pd.DataFrame]:
    companion = extras_path(path)
    if not companion.exists():
        return None
    extras = pd.read_csv(companion, float_precision="round_trip")
    if len(extras) != len(rows) or not extras["t"].equals(rows["t"]):
        logger.warning(f"ignoring {companion}: rows do not line up with {path.name}")
        return None
    return extras


def read_log(path: Union[str, Path]) -> TrialRecord:
    """Parse a CSV log with its extras companion and sidecar.

    Without a sidecar the summary is recomputed from the rows, using the
    tolerances from the extras companion (or the defaults when that is
    missing too).
    """
    path = Path(path)
    try:
        rows = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise EmptyLogError(f"{path} is empty") from e
    if rows.empty:
        raise EmptyLogError(f"{path} has no rows")
    missing = [c for c in CSV_COLUMNS if c not in rows.columns]
    if missing:
        raise LogFormatError(f"{path} is not a trial log (missing columns: {', '.join(missing)})")

    d_tol, theta_tol = DEFAULT_D_TOL, DEFAULT_THETA_TOL
    extras = _read_extras(path, rows)
    if extras is not None:
        for column in EXTRA_COLUMNS:
            if column in extras.columns:
                rows[column] = extras[column].to_numpy()
        if set(TOLERANCE_COLUMNS) <= set(extras.columns):
            d_tol = float(extras["d_tol"].iloc[0])
            theta_tol = float(extras["theta_tol"].iloc[0])

    sidecar: Optional[Dict[str, Any]] = None
    meta_path = summary_path(path)
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as f:
            sidecar = json.load(f)

    if sidecar is None:
        # Local import: harness depends on this module.
        from .harness import compute_metrics

        summary = compute_metrics(rows, d_tol, theta_tol)
        return TrialRecord(path.stem, "", -1, "", rows, summary, d_tol=d_tol, theta_tol=theta_tol)

    summary = TrialSummary.from_dict(sidecar["summary"])
    return TrialRecord(
        scenario=sidecar["scenario"],
        controller=sidecar["controller"],
        seed=int(sidecar["seed"]),
        condition=sidecar["condition"],
        rows=rows,
        summary=summary,
        log_rate=float(sidecar.get("log_rate", 10.0)),
        plant_profile=sidecar.get("plant_profile", ""),
        d_tol=float(sidecar.get("d_tol", d_tol)),
        theta_tol=float(sidecar.get("theta_tol", theta_tol)),
    )
