"""Loading of a results directory written by ``align run`` / ``align bench``."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd

from .records import EXTRAS_SUFFIX, SUMMARY_SUFFIX, TrialRecord, read_log

logger = logging.getLogger(__name__)


@dataclass
class ResultsBundle:
    summary: pd.DataFrame
    report_text: Optional[str] = None
    logs: Dict[str, Path] = field(default_factory=dict)

    def load_trial(self, stem: str) -> TrialRecord:
        return read_log(self.logs[stem])


def load_results(directory: Union[str, Path]) -> ResultsBundle:
    """Summary table, report text and trial logs found in ``directory``.

    The summary comes from ``summary.csv`` when present, otherwise from the
    per-trial summary sidecars.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"results directory not found: {directory}")

    logs = {
        p.stem: p for p in sorted(directory.glob("*.csv"))
        if p.name != "summary.csv" and not p.name.endswith(EXTRAS_SUFFIX)
    }

    summary_csv = directory / "summary.csv"
    if summary_csv.exists():
        summary = pd.read_csv(summary_csv)
    else:
        entries = []
        for sidecar in sorted(directory.glob(f"*{SUMMARY_SUFFIX}")):
            with open(sidecar, "r", encoding="utf-8") as f:
                data = json.load(f)
            entries.append({**data["summary"], "plant_profile": data.get("plant_profile", "")})
        summary = pd.DataFrame(entries)

    report_path = directory / "report.txt"
    report_text = report_path.read_text(encoding="utf-8") if report_path.exists() else None
    logger.debug(f"loaded {len(logs)} logs from {directory}")
    return ResultsBundle(summary=summary, report_text=report_text, logs=logs)
