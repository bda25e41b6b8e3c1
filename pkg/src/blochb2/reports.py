"""JSON reports and CSV grids."""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import enum
import json
import math
from pathlib import Path

import numpy as np

TIMESTAMP_KEY = "timestamp"


def to_jsonable(obj):
    """Plain JSON types; complex numbers become ``[re, im]`` and non-finite
    floats the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return to_jsonable(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def make_report(command: str, config: dict, result, status: str = "ok", timestamp: str | None = None) -> dict:
    from . import __version__

    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {
        "command": command,
        "config": to_jsonable(config),
        "result": to_jsonable(result),
        "status": status,
        TIMESTAMP_KEY: timestamp,
        "version": __version__,
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict, path=None) -> str:
    text = dumps(report)
    if path is not None:
        Path(path).write_text(text)
    return text


def strip_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != TIMESTAMP_KEY}


def write_csv(path, header, rows) -> None:
    """One header row followed by float64 columns."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(list(header))
        for row in rows:
            out.writerow([repr(float(x)) for x in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64)
    return rows[0], data.reshape(len(rows) - 1, len(rows[0]))


def merge_reports(reports: list[dict]) -> dict:
    """Combine reports; the merged status is the worst of the inputs."""
    order = {"ok": 0, "inconclusive": 1, "divergent": 2}
    worst = max((r.get("status", "ok") for r in reports), key=lambda s: order.get(s, 3), default="ok")
    return {"reports": reports, "count": len(reports), "status": worst}
