"""CSV / JSON file formats and provenance manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import Dataset, Rect, Role


def fmt(v: float) -> str:
    """17 significant digits: round-trips any float64."""
    return format(float(v), ".17g")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(paths: Iterable) -> dict:
    return {str(p): sha256_file(p) for p in paths}


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    return header, [r for r in rows[1:] if r]


def read_points(path) -> np.ndarray:
    """Locations from a CSV with ``x`` and ``y`` columns."""
    header, rows = read_table(path)
    try:
        ix, iy = header.index("x"), header.index("y")
    except ValueError:
        raise ValueError(f"{path}: header needs columns x,y (got {header})") from None
    return np.array([[float(r[ix]), float(r[iy])] for r in rows], dtype=float).reshape(-1, 2)


def read_dataset(path, domain: Rect | None = None, default_role: Role = Role.TRAIN) -> Dataset:
    """Dataset from a CSV with header ``x,y,value[,role]``."""
    header, rows = read_table(path)
    for col in ("x", "y", "value"):
        if col not in header:
            raise ValueError(f"{path}: missing column {col!r} (header {header})")
    ix, iy, iv = header.index("x"), header.index("y"), header.index("value")
    ir = header.index("role") if "role" in header else None
    locs = np.array([[float(r[ix]), float(r[iy])] for r in rows], dtype=float).reshape(-1, 2)
    values = np.array([float(r[iv]) for r in rows], dtype=float)
    if ir is None:
        roles = np.full(len(rows), int(default_role), dtype=np.int8)
    else:
        roles = np.array([int(Role.parse(r[ir])) for r in rows], dtype=np.int8)
    if locs.shape[0] == 0:
        raise ValueError(f"{path}: no data rows")
    return Dataset(locs, values, roles, domain if domain is not None else Rect.bounding(locs))


def write_dataset(path, data: Dataset, with_role: bool = True, extra: dict | None = None) -> None:
    cols = ["x", "y", "value"] + (["role"] if with_role else []) + list(extra or {})
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        ex = [np.asarray(v) for v in (extra or {}).values()]
        for k, ((x, y), v, r) in enumerate(zip(data.locs.tolist(), data.values.tolist(), data.roles.tolist())):
            row = [fmt(x), fmt(y), fmt(v)]
            if with_role:
                row.append(Role(r).label)
            row += [str(int(e[k])) if e.dtype == bool else fmt(e[k]) for e in ex]
            w.writerow(row)


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
