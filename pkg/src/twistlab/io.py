"""Deterministic writers for CSV tables, JSON summaries and gnuplot data."""

from __future__ import annotations

import csv
import json
import math
import numbers
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"


def fmt(x):
    """17 significant digits; non-finite values become empty strings."""
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else ""


def _to_json(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_to_json(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (numbers.Number, np.generic)) and not isinstance(v, bool)
               for v in seq):
            return "[" + ", ".join(_to_json(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _to_json(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (numbers.Integral, np.integer)):
        return str(int(obj))
    if isinstance(obj, (numbers.Real, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    return json.dumps(str(obj))


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits and NaN/inf as null."""
    return _to_json(obj, indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def write_summary(path, command, verdicts, results, error=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "status": "error" if error else ("pass" if all(v["status"] == "pass" for v in verdicts)
                                         else "fail"),
        "verdicts": verdicts,
        "results": results,
    }
    if error:
        doc["error"] = error
    write_json(path, doc)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (numbers.Real, np.floating))
                             and not isinstance(v, (bool, numbers.Integral)) else v
                             for v in row])


def write_columns(path, x, y, labels=("x", "y")):
    """Two-column whitespace-separated file for gnuplot."""
    with open(path, "w") as fh:
        fh.write(f"# {labels[0]} {labels[1]}\n")
        for a, b in zip(x, y):
            if math.isfinite(float(a)) and math.isfinite(float(b)):
                fh.write(f"{fmt(a)} {fmt(b)}\n")
