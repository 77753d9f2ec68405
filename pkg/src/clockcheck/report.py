"""Report serialization: one JSON document plus CSV views of the same numbers.

Output contract, relied on by regression tests:

* ``report.json`` — the full comparison report, ``schema_version`` 1, keys
  sorted alphabetically, two-space indent, UTF-8, trailing newline.  The
  only non-deterministic field is ``generated_at`` (ISO-8601 UTC); byte
  comparison after dropping that line is stable for identical inputs.
* ``events_seed<seed>_<label>.csv`` — one file per simulated run, header
  ``time,mark,draw_index``.
* ``summary.csv`` — header ``seed,pairing,test,statistic,p_value,verdict``;
  one row per evidence item per pairing (plus the fix before/after blocks
  and discard rate when a fix is configured).

Every number in the CSVs is formatted with ``repr`` of the parsed value,
which is exactly how ``json.dump`` writes it — so each CSV cell reappears
byte-identically in ``report.json``.  Non-finite floats (which no healthy
run produces) are serialised as strings to keep the JSON standard-valid.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .detector import ComparisonReport

__all__ = [
    "sanitize",
    "report_json_text",
    "summary_rows",
    "write_report_bundle",
    "SUMMARY_HEADER",
    "EVENTS_HEADER",
]

SUMMARY_HEADER = ("seed", "pairing", "test", "statistic", "p_value", "verdict")
EVENTS_HEADER = ("time", "mark", "draw_index")


def sanitize(obj):
    """Recursively coerce to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    return obj


def report_json_text(report: ComparisonReport, generated_at: Optional[str] = None) -> str:
    body = sanitize(report.as_dict())
    body["generated_at"] = generated_at or datetime.now(timezone.utc).isoformat()
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_rows(report: ComparisonReport) -> list[tuple]:
    """Flatten the report into summary-CSV rows, from the sanitized dict the
    JSON writer uses, so the two outputs agree to the byte."""
    clean = sanitize(report.as_dict())
    rows = []
    for sr in clean["seed_reports"]:
        seed = sr["seed"]
        for pairing in sr["pairings"]:
            verdict = pairing["verdict"]
            for e in verdict["evidence"]:
                rows.append((seed, pairing["label"], e["test"],
                             e["statistic"], e["p_value"], verdict["outcome"]))
        fix = sr.get("fix")
        if fix:
            for phase in ("before", "after"):
                verdict = fix[phase]
                for e in verdict["evidence"]:
                    rows.append((seed, f"fix_{phase}", e["test"],
                                 e["statistic"], e["p_value"], verdict["outcome"]))
            rows.append((seed, "fix", "discard_rate", fix["discard_rate"], None, None))
    return rows


def write_report_bundle(
    report: ComparisonReport,
    out_dir: Union[str, Path],
    formats: Sequence[str] = ("json", "csv"),
    generated_at: Optional[str] = None,
) -> dict:
    """Write the configured artifacts under ``out_dir``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict = {"events": []}
    if "json" in formats:
        path = out / "report.json"
        path.write_text(report_json_text(report, generated_at), encoding="utf-8")
        written["report"] = path
    if "csv" in formats:
        path = out / "summary.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_HEADER)
            for row in summary_rows(report):
                writer.writerow([_cell(v) for v in row])
        written["summary"] = path
        for sr in report.seed_reports:
            for run in sr.runs:
                epath = out / f"events_seed{sr.seed}_{run.label}.csv"
                with open(epath, "w", newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(EVENTS_HEADER)
                    for event in run.trajectory.events():
                        writer.writerow([repr(event.time), event.mark, event.draw_index])
                written["events"].append(epath)
    return written
