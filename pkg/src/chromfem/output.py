"""CSV and legacy-VTK emission for simulation artifacts.

All floats are written with ``repr``, the shortest round-trip decimal, so
reruns with identical configuration produce byte-identical files.
"""

from __future__ import annotations

import os

import numpy as np

from chromfem.diagnostics import LEDGER_COLUMNS, MassLedgerRow
from chromfem.mesh import Mesh


def write_vtk(path, mesh: Mesh, values: np.ndarray, name: str = "C") -> None:
    """Write a nodal scalar field as a legacy ASCII VTK unstructured grid."""
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write("chromfem concentration field\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        nt = mesh.num_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        fh.write(f"POINT_DATA {mesh.num_nodes}\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


def write_field_csv(path, mesh: Mesh, values: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,C\n")
        for (x, y), v in zip(mesh.nodes, values):
            fh.write(f"{float(x)!r},{float(y)!r},{float(v)!r}\n")


class LedgerWriter:
    """Incremental ``mass_ledger.csv`` writer; rows are flushed as they arrive
    so an aborted run still leaves its partial diagnostics on disk."""

    def __init__(self, path):
        self._fh = open(path, "w")
        self._fh.write(",".join(LEDGER_COLUMNS) + "\n")
        self._fh.flush()
        self.rows = 0

    def write(self, row: MassLedgerRow) -> None:
        step, time, *floats = row.astuple()
        self._fh.write(f"{step},{float(time)!r}," + ",".join(repr(float(v)) for v in floats) + "\n")
        self._fh.flush()
        self.rows += 1

    def close(self) -> None:
        self._fh.close()


def write_mass_compare(path, times, mass_be, mass_midpoint, mass_exact=None) -> None:
    """``mass_compare.csv``; the exact column appears only when supplied."""
    with open(path, "w") as fh:
        if mass_exact is None:
            fh.write("time,mass_be,mass_midpoint\n")
            for t, b, m in zip(times, mass_be, mass_midpoint):
                fh.write(f"{float(t)!r},{float(b)!r},{float(m)!r}\n")
        else:
            fh.write("time,mass_exact,mass_be,mass_midpoint\n")
            for t, e, b, m in zip(times, mass_exact, mass_be, mass_midpoint):
                fh.write(f"{float(t)!r},{float(e)!r},{float(b)!r},{float(m)!r}\n")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
