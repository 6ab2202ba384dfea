"""Deterministic CSV / JSON writers for the report bundle."""

import csv
import json
import math
import os

import numpy as np


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{float(value):.6g}"
    return str(value)


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def decomposition_rows(decomposition, hypothesis):
    rows = []
    for row in decomposition.levels:
        rows.append({
            "hypothesis": hypothesis,
            "level": row.level,
            "kind": "marginal" if row.level == 1 else "conditional",
            "win": row.win,
            "loss": row.loss,
            "tie": row.tie,
            "defined": row.defined,
        })
    o = decomposition.overall
    rows.append({"hypothesis": hypothesis, "level": "overall", "kind": "overall",
                 "win": o.u_w, "loss": o.u_l, "tie": o.u_tie, "defined": True})
    return rows


DECOMPOSITION_COLUMNS = ["hypothesis", "level", "kind", "win", "loss", "tie", "defined"]
