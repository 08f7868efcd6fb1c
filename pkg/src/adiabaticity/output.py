"""CSV trajectories, sweep summaries and JSON metadata sidecars.

Floats are written with ``repr``, the shortest decimal that round-trips,
so identical runs give identical bytes. Times are in internal units
(dimensionless for the three-level model, atomic units for aggregates)
and positions in bohr.
"""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .errors import OutputError
from .models import PRNG_NAME

SUMMARY_COLUMNS = ("sigma_E", "alpha", "seed", "max_p_out", "t_of_max", "T1_final", "T2_final")


def trajectory_header(n_sites: int, with_positions: bool) -> list[str]:
    cols = ["t"]
    cols += [f"p_{n}" for n in range(1, n_sites + 1)]
    cols += [f"ptilde_{n}" for n in range(1, n_sites + 1)]
    cols += [f"t_{n}" for n in range(1, n_sites + 1)]
    cols += ["T1", "T2"]
    if with_positions:
        cols += [f"X_{n}" for n in range(1, n_sites + 1)]
    return cols


def _fmt(x) -> str:
    return repr(float(x))


def _ensure_dir(directory) -> Path:
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {d}: {exc}") from exc
    return d


def write_trajectory_csv(record, path) -> Path:
    path = Path(path)
    _ensure_dir(path.parent)
    with_pos = record.classical_positions is not None
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(trajectory_header(record.n_sites, with_pos))
            for i, t in enumerate(record.times):
                row = [t, *record.diabatic_pops[i], *record.adiabatic_pops[i], *record.t_field[i]]
                row += [record.T1_series[i], record.T2_series[i]]
                if with_pos:
                    row += list(record.classical_positions[i])
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory file keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {name: data[:, j] for j, name in enumerate(rows[0])}


def summary_row(sigma_E, alpha, seed, record, output_index=-1) -> dict:
    """Ensemble summary for one member; ``max_p_out`` is the running maximum of the output population."""
    p_out = record.diabatic_pops[:, output_index]
    k = int(np.argmax(p_out))
    return {
        "sigma_E": float(sigma_E),
        "alpha": float(alpha),
        "seed": int(seed),
        "max_p_out": float(p_out[k]),
        "t_of_max": float(record.times[k]),
        "T1_final": float(record.T1_series[-1]),
        "T2_final": float(record.T2_series[-1]),
    }


def write_summary_csv(rows, path) -> Path:
    path = Path(path)
    _ensure_dir(path.parent)
    rows = sorted(rows, key=lambda r: (r["sigma_E"], r["alpha"], r["seed"]))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for r in rows:
                w.writerow([_fmt(r[c]) if c != "seed" else str(r[c]) for c in SUMMARY_COLUMNS])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_summary_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k == "seed" else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def environment_info() -> dict:
    return {
        "code_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "prng": PRNG_NAME,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_metadata(meta: dict, path) -> Path:
    path = Path(path)
    _ensure_dir(path.parent)
    try:
        path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path
