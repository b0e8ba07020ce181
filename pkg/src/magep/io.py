"""VTK legacy snapshots and CSV time series, written atomically."""

from __future__ import annotations

import contextlib
import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .discretization import Discretization

VTK_QUAD = 9


@contextlib.contextmanager
def atomic_write(path, newline=None):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return repr(float(x))


def schlieren(disc: Discretization, rho, c: float = 10.0) -> np.ndarray:
    """exp(-c |grad rho| / max |grad rho|) from cell-local gradients."""
    g = disc.dg_gradient(rho)
    mag = np.hypot(g[:, 0], g[:, 1])
    top = mag.max()
    return np.exp(-c * mag / top) if top > 0 else np.ones_like(mag)


def write_vtk_snapshot(path, disc: Discretization, fields: dict, cg_fields: dict | None = None,
                       title: str = "magep snapshot"):
    """Legacy ASCII unstructured grid with one quad per cell and duplicated dG points.

    ``fields`` maps names to dG arrays of shape (N,) or (N, 2); ``cg_fields``
    maps names to CG arrays (one value per mesh vertex), written per dG point.
    """
    if disc.n_cells == 0:
        raise ValueError("cannot write an empty mesh")
    n = disc.n_dg
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(title.replace("\n", " ")[:255] + "\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {n} double\n")
    pts = np.column_stack([disc.dg_points, np.zeros(n)])
    np.savetxt(buf, pts, fmt="%.17g")
    buf.write(f"CELLS {disc.n_cells} {5 * disc.n_cells}\n")
    conn = np.column_stack([np.full(disc.n_cells, 4), np.arange(n).reshape(-1, 4)])
    np.savetxt(buf, conn, fmt="%d")
    buf.write(f"CELL_TYPES {disc.n_cells}\n")
    np.savetxt(buf, np.full(disc.n_cells, VTK_QUAD), fmt="%d")
    buf.write(f"POINT_DATA {n}\n")

    all_fields = dict(fields)
    for name, val in (cg_fields or {}).items():
        all_fields[name] = disc.cg_to_dg(np.asarray(val))
    for name, val in all_fields.items():
        val = np.asarray(val, dtype=float)
        if val.shape[0] != n:
            raise ValueError(f"field {name!r} has {val.shape[0]} entries, expected {n}")
        key = name.replace(" ", "_")
        if val.ndim == 1:
            buf.write(f"SCALARS {key} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(buf, val, fmt="%.17g")
        elif val.shape[1] == 2:
            buf.write(f"VECTORS {key} double\n")
            np.savetxt(buf, np.column_stack([val, np.zeros(n)]), fmt="%.17g")
        else:
            raise ValueError(f"field {name!r} has unsupported shape {val.shape}")
    try:
        with atomic_write(path) as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"failed to write VTK snapshot {path}: {exc}") from exc
    return Path(path)


def state_fields(disc: Discretization, u, eos) -> dict:
    rho = u[:, 0]
    out = {"density": rho, "momentum": u[:, 1:3], "velocity": u[:, 1:3] / rho[:, None]}
    if u.shape[1] == 4:
        out["energy"] = u[:, 3]
    out["pressure"] = eos.pressure(u)
    out["schlieren"] = schlieren(disc, rho)
    return out


def read_vtk_snapshot(path) -> dict:
    """Minimal parser for files written by ``write_vtk_snapshot``."""
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    lines = iter(tokens[2:])
    out = {"fields": {}}
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([next(lines).split() for _ in range(n)], dtype=float)
        elif key == "CELLS":
            nc = int(parts[1])
            out["cells"] = np.array([next(lines).split() for _ in range(nc)], dtype=int)
        elif key == "CELL_TYPES":
            nc = int(parts[1])
            out["cell_types"] = np.array([next(lines) for _ in range(nc)], dtype=int)
        elif key == "SCALARS":
            next(lines)  # lookup table
            n = len(out["points"])
            out["fields"][parts[1]] = np.array([next(lines) for _ in range(n)], dtype=float)
        elif key == "VECTORS":
            n = len(out["points"])
            out["fields"][parts[1]] = np.array([next(lines).split() for _ in range(n)], dtype=float)
    return out


def write_csv_series(records, path, fieldnames=None):
    """Header plus one row per record; floats written in shortest round-trip form."""
    rows = [r.as_row() if hasattr(r, "as_row") else dict(r) for r in records]
    if fieldnames is None:
        if not rows:
            raise ValueError("fieldnames are required when there are no records")
        fieldnames = list(rows[0].keys())
        for r in rows[1:]:
            fieldnames += [k for k in r if k not in fieldnames]
    with atomic_write(path, newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, quoting=csv.QUOTE_MINIMAL)
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
    return Path(path)


def read_csv_series(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
