"""Snapshots, diagnostics CSV and JSON result files."""

import csv
import json
import math
from dataclasses import astuple, dataclass
from pathlib import Path

import numpy as np

from .flow import DIAGNOSTIC_COLUMNS
from .sphere_grid import GridS1


@dataclass
class Snapshot:
    n: int
    grid_shape: tuple
    t: float
    step: int
    config_hash: str
    h: np.ndarray


def _grid_shape(grid):
    return [grid.N] if isinstance(grid, GridS1) else [grid.n_theta, grid.n_phi]


def make_snapshot(grid, h, t, step, config_hash=""):
    return Snapshot(grid.dim, tuple(_grid_shape(grid)), float(t), int(step), config_hash, np.array(h, dtype=float))


def save_snapshot(snapshot, path):
    # json writes floats with repr(), which round-trips doubles exactly
    payload = {
        "n": snapshot.n,
        "grid_shape": list(snapshot.grid_shape),
        "t": snapshot.t,
        "step": snapshot.step,
        "config_hash": snapshot.config_hash,
        "h": snapshot.h.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_snapshot(path):
    data = json.loads(Path(path).read_text())
    shape = tuple(data["grid_shape"])
    h = np.asarray(data["h"], dtype=float).reshape(shape)
    return Snapshot(data["n"], shape, data["t"], data["step"], data["config_hash"], h)


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_diagnostics(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(float(v)) for v in astuple(row)])


def read_diagnostics(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in rec.items()} for rec in reader]


def write_table(records, columns, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_fmt(rec.get(c, "")) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
