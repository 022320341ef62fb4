import logging
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import CONTROLLER_LABELS  # noqa: E402
from .errors import EmptyLogError  # noqa: E402
from .records import TrialRecord  # noqa: E402

logger = logging.getLogger(__name__)

CONTROLLER_COLORS = {"v1": "tab:blue", "v2": "tab:orange"}


def _speed(rows, prefix: str) -> np.ndarray:
    cols = [f"{prefix}_{axis}" for axis in "xyz"]
    return np.linalg.norm(rows[cols].to_numpy(dtype=float), axis=1)


def _hold_spans(ax, rows) -> None:
    t = rows["t"].to_numpy(dtype=float)
    hold = rows["hold"].to_numpy(dtype=float) > 0
    if not hold.any() or len(t) < 2:
        return
    dt = float(t[1] - t[0])
    for i in np.flatnonzero(hold):
        ax.axvspan(t[i] - dt / 2, t[i] + dt / 2, color="0.85", lw=0)


def plot_errors(record: TrialRecord, path: Path) -> Path:
    rows = record.rows
    fig, (ax_d, ax_r) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_d.plot(rows["t"], rows["dd_mm"], color=CONTROLLER_COLORS.get(record.controller))
    ax_d.set_ylabel("Δd (mm)")
    ax_d.set_yscale("symlog", linthresh=1.0)
    ax_r.plot(rows["t"], np.degrees(rows["dtheta_rad"]), color=CONTROLLER_COLORS.get(record.controller))
    ax_r.set_ylabel("Δθ (deg)")
    ax_r.set_yscale("symlog", linthresh=0.1)
    ax_r.set_xlabel("t (s)")
    for ax in (ax_d, ax_r):
        ax.grid(True, alpha=0.25)
    ax_d.set_title(f"{record.scenario} seed {record.seed}: alignment error")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_velocity(record: TrialRecord, path: Path) -> Path:
    """Raw vs clamped vs smoothed speed; zero-hold ticks are shaded."""
    rows = record.rows
    t = rows["t"]
    fig, (ax_v, ax_w) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for ax, kind, unit in ((ax_v, "v", "mm/s"), (ax_w, "w", "rad/s")):
        _hold_spans(ax, rows)
        ax.plot(t, _speed(rows, f"{kind}raw"), label="raw", color="0.5", lw=1)
        ax.plot(t, _speed(rows, f"{kind}c"), label="clamped", color="tab:red")
        ax.plot(t, _speed(rows, f"{kind}s"), label="smoothed", color="tab:green", ls="--")
        ax.set_ylabel(f"|{kind}| ({unit})")
        ax.set_yscale("symlog", linthresh=1.0 if kind == "v" else 0.01)
        ax.grid(True, alpha=0.25)
    ax_v.legend(loc="upper right")
    ax_w.set_xlabel("t (s)")
    ax_v.set_title(f"{record.scenario} seed {record.seed}: raw vs clamped velocity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_trajectories(records: Sequence[TrialRecord], path: Path, title: str = "") -> Path:
    """XY and XZ projections of the true end-effector path of every record."""
    fig, (ax_xy, ax_xz) = plt.subplots(1, 2, figsize=(11, 5))
    labelled = set()
    for record in records:
        rows = record.rows
        color = CONTROLLER_COLORS.get(record.controller)
        label = None
        if record.controller not in labelled:
            labelled.add(record.controller)
            label = CONTROLLER_LABELS.get(record.controller, record.controller)
        ax_xy.plot(rows["true_x"], rows["true_y"], color=color, alpha=0.7, lw=1, label=label)
        ax_xz.plot(rows["true_x"], rows["true_z"], color=color, alpha=0.7, lw=1)
        ax_xy.plot(rows["true_x"].iloc[0], rows["true_y"].iloc[0], "o", color=color, ms=3)
        ax_xz.plot(rows["true_x"].iloc[0], rows["true_z"].iloc[0], "o", color=color, ms=3)
    for ax, ylabel in ((ax_xy, "y (mm)"), (ax_xz, "z (mm)")):
        ax.set_xlabel("x (mm)")
        ax.set_ylabel(ylabel)
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(True, alpha=0.25)
    ax_xy.legend(loc="best", fontsize=8)
    prefix = f"{title}: " if title else ""
    ax_xy.set_title(f"{prefix}trajectory (XY)")
    ax_xz.set_title(f"{prefix}trajectory (XZ)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def group_by_condition(records: Sequence[TrialRecord]) -> Dict[str, List[TrialRecord]]:
    """Records keyed by a file-safe condition label.

    The label is the plant profile, extended with the condition key prefix
    when two conditions share a profile.
    """
    groups: Dict[str, List[TrialRecord]] = defaultdict(list)
    for record in records:
        groups[record.condition].append(record)
    names = {cond: recs[0].plant_profile or cond[:8] or "all" for cond, recs in groups.items()}
    counts = Counter(names.values())
    labelled = {}
    for cond, recs in groups.items():
        name = names[cond]
        if counts[name] > 1:
            name = f"{name}_{cond[:8]}"
        labelled[name] = recs
    return labelled


def emit_plots(records: Sequence[TrialRecord], out_dir: Union[str, Path]) -> List[Path]:
    """Error and velocity time series per record plus one trajectory figure per condition.

    Raises:
        EmptyLogError: no records were given
    """
    if not records:
        raise EmptyLogError("no records to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for record in records:
        paths.append(plot_errors(record, out_dir / f"{record.stem}_errors.png"))
        paths.append(plot_velocity(record, out_dir / f"{record.stem}_velocity.png"))
    for label, group in group_by_condition(records).items():
        paths.append(plot_trajectories(group, out_dir / f"trajectories_{label}.png", title=label))
    logger.info(f"wrote {len(paths)} plots to {out_dir}")
    return paths
