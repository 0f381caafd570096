"""CSV/JSON writers shared by the command-line front end.

CSV files start with one ``# config=...`` comment line carrying the resolved
configuration, then a header row; floats are written with 17 significant
digits so doubles round-trip.  JSON is written with sorted keys; non-finite
floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (str, bool)) or x is None:
        return "" if x is None else str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_csv(path, header, rows, config=None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if config is not None:
            fh.write("# config=" + json.dumps(jsonable(config), sort_keys=True, separators=(",", ":")) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([fmt(v) for v in row] for row in rows)
    return path


def write_json(path, payload, config=None) -> Path:
    path = Path(path)
    doc = dict(payload)
    if config is not None:
        doc["config"] = config
    path.write_text(json.dumps(jsonable(doc), sort_keys=True, indent=2) + "\n")
    return path


def curve_rows(curve):
    ids = curve.branch_ids()
    return [(g, m, int(b)) for g, m, b in zip(curve.gamma_grid, curve.mu_values, ids)]


def density_rows(density):
    flags = density.node_flags or [""] * len(density.mu_grid)
    return [
        (m, m / density.mu_max, rho, density.method, f)
        for m, rho, f in zip(density.mu_grid, density.density, flags)
    ]


CURVE_HEADER = ("gamma", "mu_r", "branch_id")
DENSITY_HEADER = ("mu", "mu_over_mu_max", "density", "method", "flag")
