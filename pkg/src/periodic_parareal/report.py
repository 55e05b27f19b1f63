"""CSV and JSON writers; floats use Python's shortest round-trip repr."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_trajectory(path, times: np.ndarray, trajectory: np.ndarray) -> Path:
    d = trajectory.shape[1]
    header = ["n", "T_n"] + [f"u_{i}" for i in range(d)]
    rows = ([n, times[n], *trajectory[n]] for n in range(trajectory.shape[0]))
    return write_csv(path, header, rows)


def write_history(path, history) -> Path:
    rows = ([r.k, r.jump_norm, r.wall_time] for r in history.records)
    return write_csv(path, ["k", "jump_norm", "wall_time_s"], rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
    return path
