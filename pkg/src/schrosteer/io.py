"""CSV/JSON artifacts and potential files.

Numeric CSVs are comma separated with a header row and 17 significant
digits.  When provenance is supplied, the file starts with one comment line
``# config_hash=<sha256> seed=<seed>``.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .spectral import Grid1D, SampledPotential


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def provenance_line(provenance: dict | None) -> str:
    if not provenance:
        return ""
    return "# " + " ".join(f"{k}={v}" for k, v in provenance.items()) + "\n"


def write_csv(path, header, rows, provenance: dict | None = None) -> Path:
    path = Path(path)
    lines = [provenance_line(provenance), ",".join(header) + "\n"]
    lines += [",".join(_fmt(v) for v in row) + "\n" for row in rows]
    path.write_text("".join(lines))
    return path


def read_csv(path):
    """Header and float rows of a CSV written by :func:`write_csv`."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


def write_json(path, payload: dict, provenance: dict | None = None) -> Path:
    path = Path(path)
    body = dict(provenance or {})
    body.update(payload)
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def trajectory_rows(times, states):
    states = np.asarray(states)
    for t, c in zip(times, states):
        row = [t]
        for z in c:
            row += [z.real, z.imag]
        yield row


def state_header(N: int, time_label: str = "time"):
    header = [time_label]
    for j in range(1, N + 1):
        header += [f"re_c{j}", f"im_c{j}"]
    return header


def write_trajectory_csv(path, times, states, provenance=None) -> Path:
    states = np.asarray(states)
    return write_csv(path, state_header(states.shape[1]), trajectory_rows(times, states), provenance)


def load_potential_csv(path, grid: Grid1D) -> SampledPotential:
    """Two-column (x, value) table, linearly interpolated onto ``grid.x``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"potential file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError:
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    if data.shape[1] != 2 or len(data) < 2:
        raise ConfigError(f"{path}: expected two columns (x, value) and at least two rows")
    order = np.argsort(data[:, 0])
    x, v = data[order, 0], data[order, 1]
    if x[0] > grid.a + 1e-12 or x[-1] < grid.b - 1e-12:
        raise ConfigError(f"{path}: samples cover [{x[0]}, {x[-1]}], grid needs [{grid.a}, {grid.b}]")
    return SampledPotential(grid, np.interp(grid.x, x, v))
