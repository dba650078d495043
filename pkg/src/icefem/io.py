"""Plain-text writers: legacy ASCII VTK snapshots and CSV traces."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .mesh import Mesh

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return FLOAT_FMT % float(x)


def write_vtk(mesh: Mesh, fields: Mapping[str, np.ndarray], path, title: str = "icefem snapshot") -> Path:
    """Legacy VTK unstructured grid of triangles with CELL_DATA.

    Scalar fields are ``(C,)`` arrays, vector fields ``(C, 2)`` (padded with a
    zero third component).
    """
    path = Path(path)
    C = mesh.n_cells
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {C} {4 * C}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.cells]
    lines.append(f"CELL_TYPES {C}")
    lines += ["5"] * C
    if fields:
        lines.append(f"CELL_DATA {C}")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape == (C,):
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in values]
        elif values.shape == (C, 2):
            lines.append(f"VECTORS {name} double")
            lines += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in values]
        else:
            raise ValueError(f"field {name!r} has shape {values.shape}, expected ({C},) or ({C}, 2)")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path


class CsvTrace:
    """Append-only CSV writer with a fixed header; floats at 17 significant digits."""

    def __init__(self, path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)
        try:
            self._fh = self.path.open("w", newline="")
        except OSError as exc:
            raise OSError(f"cannot open CSV file {self.path}: {exc}") from exc
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)

    def append(self, row: Sequence) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values, header has {len(self.columns)}")
        self._writer.writerow([_fmt(v) for v in row])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(rows: Iterable[Sequence], path, columns: Sequence[str]) -> Path:
    with CsvTrace(path, columns) as out:
        for row in rows:
            out.append(row)
    return Path(path)


def read_csv(path) -> dict:
    """Read a trace back into ``{column: float array}``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(x) for x in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}
