"""Report serialization: CSV table and structured JSON, both round-trippable.

The CSV carries one row per (concept, config) cell, per-config mean rows
(the Pareto plot series and match-rate bar data), and the three reference
lines. Floats are written at 4 decimals in both formats.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional

from ..errors import FileFormatError
from .experiment import CellResult, ExperimentReport, ReferenceLines

CSV_COLUMNS = [
    "kind",
    "concept",
    "config",
    "clap_a",
    "fad",
    "clap_t",
    "bpm_match_rate",
    "loudness_match_rate",
    "key_match_rate",
    "scale_match_rate",
    "clips",
    "error",
]

_METRICS = [
    "clap_a",
    "fad",
    "clap_t",
    "bpm_match_rate",
    "loudness_match_rate",
    "key_match_rate",
    "scale_match_rate",
]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.4f}"


def _round(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(value, 4)


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "meta": report.meta,
        "reference": {
            "ceil_a": _round(report.reference.ceil_a),
            "ceil_t": _round(report.reference.ceil_t),
            "floor_t": _round(report.reference.floor_t),
        },
        "pareto": [
            {k: (_round(v) if isinstance(v, float) else v) for k, v in entry.items()}
            for entry in report.pareto_series()
        ],
        "cells": [
            {
                "concept": c.concept,
                "config": c.config,
                **{m: _round(getattr(c, m)) for m in _METRICS},
                "clips": c.clips_generated,
                "error": c.error,
            }
            for c in report.cells
        ],
    }


def emit_report(report: ExperimentReport, fmt: str, path: str | Path) -> None:
    """Write the report as 'csv' or 'json' (structured text)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report_to_dict(report), indent=2) + "\n")
        return
    if fmt != "csv":
        raise FileFormatError(f"unknown report format {fmt!r}; use csv or json")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in report.cells:
        writer.writerow(
            ["cell", c.concept, c.config]
            + [_fmt(getattr(c, m)) for m in _METRICS]
            + [c.clips_generated, c.error or ""]
        )
    for entry in report.pareto_series():
        writer.writerow(
            ["config_mean", "", entry["config"]]
            + [_fmt(entry.get(m)) for m in _METRICS]
            + ["", ""]
        )
    ref = report.reference
    for name, value, column in (
        ("ceil_a", ref.ceil_a, "clap_a"),
        ("ceil_t", ref.ceil_t, "clap_t"),
        ("floor_t", ref.floor_t, "clap_t"),
    ):
        row = ["reference", "", name] + [""] * len(_METRICS) + ["", ""]
        row[3 + _METRICS.index(column)] = _fmt(value)
        writer.writerow(row)
    path.write_text(buf.getvalue())


def report_from_dict(data: dict) -> ExperimentReport:
    """Rebuild an ExperimentReport from the JSON layout (cells + reference)."""
    cells = []
    for c in data.get("cells", []):
        cells.append(
            CellResult(
                concept=c.get("concept", ""),
                config=c.get("config", ""),
                clap_a=c.get("clap_a"),
                fad=c.get("fad"),
                clap_t=c.get("clap_t"),
                bpm_match_rate=c.get("bpm_match_rate"),
                loudness_match_rate=c.get("loudness_match_rate"),
                key_match_rate=c.get("key_match_rate"),
                scale_match_rate=c.get("scale_match_rate"),
                clips_generated=int(c.get("clips", 0)),
                error=c.get("error"),
            )
        )
    ref = data.get("reference", {})
    reference = ReferenceLines(
        ceil_a=ref.get("ceil_a"), ceil_t=ref.get("ceil_t"), floor_t=ref.get("floor_t")
    )
    return ExperimentReport(cells=cells, reference=reference, meta=dict(data.get("meta", {})))


def parse_report(path: str | Path) -> dict:
    """Read back an emitted report (either format) into the JSON layout."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: invalid JSON report: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FileFormatError(f"{path}: empty report file")
    if header != CSV_COLUMNS:
        raise FileFormatError(f"{path}: unexpected CSV header {header}")

    out = {"meta": {}, "reference": {}, "pareto": [], "cells": []}
    for row in reader:
        record = dict(zip(CSV_COLUMNS, row))
        metrics = {
            m: (float(record[m]) if record[m] != "" else None) for m in _METRICS
        }
        if record["kind"] == "cell":
            out["cells"].append(
                {
                    "concept": record["concept"],
                    "config": record["config"],
                    **metrics,
                    "clips": int(record["clips"]) if record["clips"] else 0,
                    "error": record["error"] or None,
                }
            )
        elif record["kind"] == "config_mean":
            out["pareto"].append({"config": record["config"], **metrics})
        elif record["kind"] == "reference":
            column = "clap_a" if record["config"] == "ceil_a" else "clap_t"
            out["reference"][record["config"]] = metrics[column]
    return out
