"""CSV and JSON helpers for the external file formats."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError


def fmt(value):
    """Shortest round-trip decimal text for a number."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], np.zeros((0, 0))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))


def write_trajectory_csv(path, times, traj, names):
    rows = (np.concatenate([[t], x]) for t, x in zip(times, traj))
    return write_csv(path, ["t", *names], rows)


def load_json(path):
    try:
        with Path(path).open() as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def dump_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def complex_pair(z):
    z = complex(z)
    return [z.real, z.imag]


def parse_complex(value, name="value"):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{name} must be a number or a [re, im] pair")


def write_field_csv(path, field, header_path=None, grid_info=None):
    """Flat ``i,j,value`` export of a 1D or 2D array plus optional JSON header."""
    a = np.asarray(field)
    if a.ndim == 1:
        a = a[:, None]
    rows = ((i, j, a[i, j]) for i in range(a.shape[0]) for j in range(a.shape[1]))
    write_csv(path, ["i", "j", "value"], rows)
    if header_path is not None:
        info = dict(grid_info or {})
        info["shape"] = list(np.shape(field))
        dump_json(header_path, info)
    return path


def read_field_csv(path, shape):
    _, data = read_csv(path)
    out = np.zeros(shape if len(shape) == 2 else (shape[0], 1))
    for i, j, v in data:
        out[int(i), int(j)] = v
    return out.reshape(shape)
