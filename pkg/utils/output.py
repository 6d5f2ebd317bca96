"""
Writers for run-level CSV tables, JSON report bundles and per-round trace files.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from models.report import CSV_COLUMNS, EpisodeTrace, RegretReport, RegretSummary
from utils.fingerprint import digest_from_model

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "arm", "loss", "delay", "eta", "gamma", "tau", "estimate", "d_star", "l_bck", "arrivals", "probs"]


def reports_frame(reports: Sequence[RegretReport]) -> pd.DataFrame:
    return pd.DataFrame([r.csv_row() for r in reports], columns=CSV_COLUMNS)


def write_csv(reports: Sequence[RegretReport], path: Path, append: bool = False) -> Path:
    """One row per seed; inapplicable bound cells are left empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    exists = append and path.exists()
    reports_frame(reports).to_csv(path, mode="a" if exists else "w", header=not exists, index=False)
    logger.info("wrote %d rows to %s", len(reports), path)
    return path


def write_json(reports: Sequence[RegretReport], path: Path, summary: Optional[RegretSummary] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "reports": [{**r.model_dump(mode="json"), "digest": digest_from_model(r)} for r in reports],
    }
    if summary is not None:
        payload["summary"] = summary.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2))
    logger.info("wrote %d reports to %s", len(reports), path)
    return path


def trace_frame(trace: EpisodeTrace) -> pd.DataFrame:
    rows = []
    for r in trace.rounds:
        row = r.model_dump()
        row["arrivals"] = " ".join(map(str, r.arrivals))
        row["probs"] = " ".join(repr(p) for p in r.probs)
        rows.append(row)
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_trace(trace: EpisodeTrace, directory: Path, seed: int) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{trace.algo or 'trace'}_seed{seed}.csv"
    trace_frame(trace).to_csv(path, index=False)
    return path
