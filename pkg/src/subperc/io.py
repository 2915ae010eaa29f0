"""CSV/JSON readers and writers for patterns, graphs, scans and reports.

Floats are written with ``repr`` so files round-trip exactly and identical
inputs give byte-identical output.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticRow
from .point_processes import PointPattern, Window


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_pattern(pattern: PointPattern, path) -> Path:
    """``x,y`` CSV plus a ``.json`` sidecar with window and provenance."""
    path = Path(path)
    write_rows(path, ("x", "y"), pattern.points.tolist())
    write_json(
        path.with_suffix(".json"),
        {"window": pattern.window.to_dict(), "provenance": pattern.provenance, "count": pattern.n},
    )
    return path


def read_pattern(path) -> PointPattern:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pts = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    return PointPattern(pts, Window.from_dict(meta["window"]), meta.get("provenance", {}))


def write_edges(graph, path) -> Path:
    return write_rows(path, ("i", "j"), graph.edges.tolist())


def read_edges(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[int(r["i"]), int(r["j"])] for r in rows], dtype=np.int64).reshape(-1, 2)


def write_components(stats, path) -> Path:
    return write_rows(path, ("node", "component"), enumerate(stats.labels.tolist()))


def write_scan(result, path) -> Path:
    """``param,mean_fraction,std,replications`` CSV plus a JSON summary."""
    path = Path(path)
    rows = [(s.param, s.mean_fraction, s.std, s.replications) for s in result.per_step]
    write_rows(path, ("param", "mean_fraction", "std", "replications"), rows)
    write_json(path.with_suffix(".json"), result.summary())
    return path


def write_interference_grid(xs, ys, values, path) -> Path:
    rows = ((x, y, values[i, j]) for i, x in enumerate(xs) for j, y in enumerate(ys))
    return write_rows(path, ("x", "y", "I"), rows)


def write_diagnostics(rows, path) -> Path:
    return write_rows(path, DiagnosticRow.HEADER, (r.as_tuple() for r in rows))
