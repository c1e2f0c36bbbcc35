"""Result writers: legacy ASCII VTK, run-history CSV, JSON reports.

All writers are atomic (write to a temp file in the target directory, then
rename), so a crashed run never leaves a truncated output behind, and all
formatting is deterministic: identical inputs give byte-identical files.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .mesh import Mesh2D


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path, data) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb" if isinstance(data, bytes) else "w") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_bytes_atomic(path, data: bytes) -> None:
    """Atomic write for non-text outputs (mesh files)."""
    _atomic_write(path, data)


def vtk_document(mesh: Mesh2D, fields: dict) -> str:
    """Legacy ASCII VTK unstructured grid with point data.

    ``fields`` maps names to nodal arrays: shape (n, 2) entries become
    VECTORS (zero-padded to 3D), shape (n,) entries become SCALARS.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        "adjflow output",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines.extend(["5"] * mesh.n_triangles)
    if fields:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, arr in fields.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 2 and arr.shape == (mesh.n_nodes, 2):
                lines.append(f"VECTORS {name} double")
                for vx, vy in arr:
                    lines.append(f"{_fmt(vx)} {_fmt(vy)} 0")
            elif arr.shape == (mesh.n_nodes,):
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                for v in arr:
                    lines.append(_fmt(v))
            else:
                raise ValueError(f"field '{name}' has shape {arr.shape}, "
                                 f"expected ({mesh.n_nodes},) or ({mesh.n_nodes}, 2)")
    return "\n".join(lines) + "\n"


def export_vtk(mesh: Mesh2D, fields: dict, path) -> None:
    _atomic_write(path, vtk_document(mesh, fields))


HISTORY_HEADER = "iter,J,volume,multiplier,step,grad_norm,newton_iters,accepted"


def history_document(history) -> str:
    lines = [HISTORY_HEADER]
    for rec in history:
        lines.append(",".join([
            str(rec.iteration),
            _fmt(rec.energy),
            _fmt(rec.vol),
            _fmt(rec.multiplier),
            _fmt(rec.step),
            _fmt(rec.grad_norm),
            str(rec.newton_iters),
            "1" if rec.accepted else "0",
        ]))
    return "\n".join(lines) + "\n"


def export_history_csv(history, path) -> None:
    _atomic_write(path, history_document(history))


def export_report(report: dict, path) -> None:
    """Small JSON summary (energies, residuals, counts)."""
    _atomic_write(path, json.dumps(report, indent=2, sort_keys=True) + "\n")
