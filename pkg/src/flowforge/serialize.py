"""CSV snapshot and JSON manifest serialization.

Snapshot schema: a `# time=<t>` header line, then one row per node with
index columns, coordinate columns, and the height, all floats printed with
17 significant digits so a round trip is lossless.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import GraphField, PeriodicGrid

__all__ = [
    "write_snapshot_csv",
    "read_snapshot_csv",
    "write_rows_csv",
    "write_manifest",
]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_snapshot_csv(path, field: GraphField, time: float) -> None:
    grid = field.grid
    lines = [f"# time={_fmt(time)}"]
    if grid.dim == 1:
        xs = grid.axis(0)
        for i, v in enumerate(field.values):
            lines.append(f"{i},{_fmt(xs[i])},{_fmt(v)}")
    else:
        xs, ys = grid.axis(0), grid.axis(1)
        for i in range(grid.points[0]):
            for j in range(grid.points[1]):
                lines.append(
                    f"{i},{j},{_fmt(xs[i])},{_fmt(ys[j])},{_fmt(field.values[i, j])}"
                )
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot_csv(path, grid: PeriodicGrid) -> tuple[float, GraphField]:
    """Inverse of :func:`write_snapshot_csv` given the grid it was written on."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0]
    if not header.startswith("# time="):
        raise ValueError(f"{path}: missing '# time=' header")
    time = float(header.split("=", 1)[1])
    vals = np.empty(grid.shape)
    for line in lines[1:]:
        parts = line.split(",")
        if grid.dim == 1:
            vals[int(parts[0])] = float(parts[2])
        else:
            vals[int(parts[0]), int(parts[1])] = float(parts[4])
    return time, GraphField(grid, vals)


def write_rows_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
