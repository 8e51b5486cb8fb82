# report_writer.py
"""JSON and CSV report emission."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Any, List, Mapping, Optional, Sequence

import numpy as np


def _plain(value: Any) -> Any:
    """Recursively convert numpy scalars and non-finite floats to JSON-safe values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no infinities; keep them readable instead
        return value if math.isfinite(value) else str(value)
    return value


def render_json(payload: Mapping) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def render_csv(rows: Sequence[Mapping], columns: Optional[List[str]] = None) -> str:
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _plain(row.get(k)) for k in columns})
    return buffer.getvalue()


def write_report(path: str, text: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise RuntimeError(f"could not write report to {path}: {e}") from e
    return path
