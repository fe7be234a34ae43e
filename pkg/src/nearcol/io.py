"""CSV and JSON writers with stable, byte-reproducible formatting."""
from __future__ import annotations

import json
import math

import numpy as np

SCHEMA_VERSION = "1"


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _cell(v) -> str:
    if isinstance(v, str):
        if "," in v or "\n" in v:
            raise ValueError("CSV text cells may not contain commas or newlines")
        return v
    return format_float(v)


def csv_text(header, rows) -> str:
    """CSV with a schema comment line, header row and 17-digit floats; text cells pass through."""
    lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(header)]
    if isinstance(rows, np.ndarray) or (len(rows) and not any(isinstance(v, str) for r in rows for v in r)):
        rows = np.atleast_2d(np.asarray(rows, dtype=float)) if len(rows) else []
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(csv_text(header, rows))


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    try:
        return header, np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        return header, rows


def _clean(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return {"error": "non-finite", "value": repr(obj)}
        return obj
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(_clean(obj))
    return json.dumps(payload, allow_nan=False, indent=2, sort_keys=True)


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(obj) + "\n")
