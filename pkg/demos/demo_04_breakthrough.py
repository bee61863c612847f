"""Concentration front moving through an adsorptive membrane column.

Solute enters at concentration 1 on the inflow side of a [0, 2] x [0, 10]
channel with the parabolic velocity u = (0, 2x(x - 2)), and adsorbs onto the
membrane with a saturating law.  The front advances as upstream capacity
saturates; the outflow-boundary mean concentration traces the breakthrough
curve.  A scaled-down resolution keeps the demo fast.
"""

import numpy as np

from chromfem.diagnostics import ledger_row, positivity_check
from chromfem.fem import ProblemSpec
from chromfem.isotherm import Langmuir
from chromfem.mesh import BoundaryTag, build_rect_mesh, tag_boundary
from chromfem.stepper import SchemeConfig, TransportOperators, run_transient

Lx, Ly = 2.0, 10.0


def velocity(x, y):
    return np.zeros_like(x), 2.0 * x * (x - Lx)


mesh = tag_boundary(build_rect_mesh(16, 80, Lx, Ly), velocity)
spec = ProblemSpec(
    omega=0.5, rho_s=1.0, D=np.eye(2), u=velocity,
    g=lambda x, y, t: np.ones_like(x),    # feed concentration
    C0=lambda x, y: np.zeros_like(x),     # clean column
    f=lambda x, y, t: np.zeros_like(x),
    isotherm=Langmuir(1.0, 1.0),
)
ops = TransportOperators(mesh, spec)

out_edges = mesh.edges_with_tag(BoundaryTag.OUTFLOW)
lengths = mesh.edge_lengths()[out_edges]
curve = []


def watch(state, ops_):
    vals = 0.5 * (state.C[mesh.edge_nodes[out_edges, 0]]
                  + state.C[mesh.edge_nodes[out_edges, 1]])
    curve.append((state.t, float(np.sum(vals * lengths) / lengths.sum())))


snaps, diag = run_transient(mesh, spec, SchemeConfig("midpoint_extrapolated", dt=1 / 8),
                            T=6.0, observers=[watch], stride=4)
print(f"{diag.steps} steps, {diag.solves} linear solves")
print("\n  t     outflow mean   stored mass   min nodal")
for (t, c_out), s in zip(curve, snaps):
    row = ledger_row(mesh, spec, s, ops.geom)
    print(f"{t:5.1f}   {c_out:11.5f}   {row.total_mass:11.5f}   {row.min_nodal:9.2e}")

report = positivity_check(snaps[-1])
print(f"\nfinal positivity: min {report.min_value:.3e}, "
      f"{report.violations} negative nodes (reported, never clipped)")
