"""CSV/JSON output with round-trip precision and atomic writes."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Grid, Profile, build_grid

FLOAT_FMT = "%.17g"


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else FLOAT_FMT % v
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, obj) -> None:
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_profile(path, profile: Profile) -> None:
    write_csv(path, ("x", "u"), zip(profile.x, profile.values))


def read_profile(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["x", "u"]:
        raise ValueError(f"{path}: expected a header row 'x,u'")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    return data[:, 0], data[:, 1]


def profile_on_grid(path, grid: Grid) -> Profile:
    """Load an (x, u) file onto ``grid``; nodal values are taken as-is when the grids coincide."""
    x, u = read_profile(path)
    if x.size == grid.N + 1 and np.allclose(x, grid.nodes, rtol=0, atol=1e-12 * max(1.0, grid.a)):
        return Profile(u, grid)
    if not math.isclose(x[-1], grid.a, rel_tol=1e-9):
        # different domain length: keep the shape, stretch to [0, a]
        x = x * (grid.a / x[-1])
    return Profile(np.interp(grid.nodes, x, u), grid)


def grid_from_profile_file(path) -> Grid:
    x, _ = read_profile(path)
    return build_grid(float(x[-1]), x.size - 1)
