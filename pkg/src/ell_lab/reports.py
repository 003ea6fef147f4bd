"""JSON reports and CSV artifacts with fixed, locale-independent formatting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA = "ell_lab.report/1"

# documented CSV headers, one per artifact kind
CSV_SCHEMAS = {
    "profile": ("t", "u", "du"),
    "pair": ("t", "u", "v", "u_over_v"),
    "field_radial": ("r", "u", "v"),
    "field_box": ("x", "y", "u", "v"),
    "eigen_radial": ("r", "phi"),
    "eigen_box": ("x", "y", "phi"),
    "continuation": ("param", "converged", "sup_u", "sup_v", "min_interior_u", "min_interior_v", "residual_inf"),
    "means": ("R", "mean", "err"),
    "pohozaev": ("X", "h"),
    "barrier": ("r", "lap_W", "rhs"),
    "mixed_pair": ("rho", "minus_lap_Z", "rhs_Z", "lap_W", "rhs_W"),
    "harmonicity": ("r", "lap_W", "minus_lap_Z"),
    "gates": ("name", "value", "threshold", "relation", "verdict"),
}


def schema_header(kind: str) -> str:
    return ",".join(CSV_SCHEMAS[kind])


def to_plain(obj):
    """Convert numpy scalars/arrays and dataclasses into JSON-ready values; non-finite floats become strings."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def report_payload(command: str, verdict: bool, results: dict, config: dict) -> dict:
    return {"schema": SCHEMA, "command": command, "verdict": "pass" if verdict else "fail",
            "config": to_plain(config), "results": to_plain(results)}


def write_json(path: Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(kind: str, rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_SCHEMAS[kind])
    width = len(CSV_SCHEMAS[kind])
    for row in rows:
        if len(row) != width:
            raise ValueError(f"{kind} rows need {width} columns, got {len(row)}")
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, kind: str, rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(kind, rows), encoding="utf-8")


def read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
