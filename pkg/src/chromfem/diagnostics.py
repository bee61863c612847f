"""Mass-balance ledger and positivity monitoring.

The ledger reports the physically interpretable terms of the transport
balance: stored mass, squared-concentration boundary fluxes, their
Q-weighted counterparts, and the diffusive dissipation.  Nonlinear
integrands are evaluated pointwise at quadrature nodes from the P1 field;
volume terms use the order-4 rule, boundary terms 2-point Gauss per edge.

Positivity is reported, never enforced; discrete solutions can undershoot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chromfem.fem import ElementGeometry, ProblemSpec, _TRI6_LAMBDA, _TRI6_W, _broadcast
from chromfem.mesh import BoundaryTag, Mesh
from chromfem.stepper import SimState

LEDGER_COLUMNS = ("step", "time", "total_mass", "inflow_flux", "outflow_flux",
                  "inflow_Q_flux", "outflow_Q_flux", "dissipation", "min_nodal")

# 2-point Gauss rule on [0, 1] (shared with the assembly routines)
_EDGE_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_EDGE_W = np.array([0.5, 0.5])


@dataclass(frozen=True)
class MassLedgerRow:
    step: int
    time: float
    total_mass: float      # integral of omega*C + (1-omega)*rho_s*q(C)
    inflow_flux: float     # integral over inflow of g^2 (u.n), nonpositive
    outflow_flux: float    # integral over outflow of C^2 (u.n), nonnegative
    inflow_Q_flux: float   # integral over inflow of Q(g) (u.n)
    outflow_Q_flux: float  # integral over outflow of Q(C) (u.n)
    dissipation: float     # integral of |D^(1/2) grad C|^2
    min_nodal: float

    def astuple(self):
        return tuple(getattr(self, k) for k in LEDGER_COLUMNS)


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    violations: int


def _edge_quantities(mesh: Mesh, tag: BoundaryTag):
    idx = mesh.edges_with_tag(tag)
    an = mesh.edge_nodes[idx, 0]
    bn = mesh.edge_nodes[idx, 1]
    pa, pb = mesh.nodes[an], mesh.nodes[bn]
    length = np.hypot(*(pb - pa).T)
    normal = mesh.edge_normals()[idx] if idx.size else np.empty((0, 2))
    return an, bn, pa, pb, length, normal


def _boundary_integrals(mesh: Mesh, spec: ProblemSpec, values_at, tag: BoundaryTag):
    """Integrals of v^2 (u.n) and Q(v) (u.n) over the edges tagged ``tag``.

    ``values_at`` maps edge quadrature data to the integrand values v.
    """
    an, bn, pa, pb, length, normal = _edge_quantities(mesh, tag)
    if length.size == 0:
        return 0.0, 0.0
    sq_total = 0.0
    q_total = 0.0
    for s, wq in zip(_EDGE_S, _EDGE_W):
        xq = pa + s * (pb - pa)
        ux, uy = spec.u(xq[:, 0], xq[:, 1])
        un = _broadcast(ux, length.shape) * normal[:, 0] \
            + _broadcast(uy, length.shape) * normal[:, 1]
        v = values_at(xq, an, bn, s)
        sample = spec.isotherm.sample(v)
        sq_total += float(np.sum(wq * length * un * v * v))
        q_total += float(np.sum(wq * length * un * sample.Q))
    return sq_total, q_total


def ledger_row(mesh: Mesh, spec: ProblemSpec, state: SimState,
               geom: ElementGeometry | None = None) -> MassLedgerRow:
    """Evaluate every ledger column for the current state."""
    geom = geom or ElementGeometry.from_mesh(mesh)
    C = state.C

    cq = geom.field_at(C, _TRI6_LAMBDA)
    sample = spec.isotherm.sample(cq)
    stored = spec.omega * cq + (1.0 - spec.omega) * spec.rho_s * sample.q
    total_mass = float(np.sum(geom.area * (stored @ _TRI6_W)))

    grad = geom.gradient_field(C)
    dgrad = grad @ spec.D.T
    dissipation = float(np.sum(geom.area * np.einsum("td,td->t", grad, dgrad)))

    def field_trace(xq, an, bn, s):
        return (1.0 - s) * C[an] + s * C[bn]

    def datum_trace(xq, an, bn, s):
        return _broadcast(spec.g(xq[:, 0], xq[:, 1], state.t), (an.size,))

    outflow_flux, outflow_Q = _boundary_integrals(mesh, spec, field_trace, BoundaryTag.OUTFLOW)
    inflow_flux, inflow_Q = _boundary_integrals(mesh, spec, datum_trace, BoundaryTag.INFLOW)

    return MassLedgerRow(
        step=state.step,
        time=state.t,
        total_mass=total_mass,
        inflow_flux=inflow_flux,
        outflow_flux=outflow_flux,
        inflow_Q_flux=inflow_Q,
        outflow_Q_flux=outflow_Q,
        dissipation=dissipation,
        min_nodal=float(C.min()),
    )


def positivity_check(state: SimState) -> PositivityReport:
    """Report the minimum nodal value and the number of negative nodes."""
    C = state.C
    return PositivityReport(min_value=float(C.min()), violations=int(np.sum(C < 0.0)))


def total_mass_of(mesh: Mesh, spec: ProblemSpec, values,
                  geom: ElementGeometry | None = None) -> float:
    """Stored mass of an arbitrary field: nodal array or callable (x, y)."""
    geom = geom or ElementGeometry.from_mesh(mesh)
    if callable(values):
        xq = geom.qpoints(_TRI6_LAMBDA)
        cq = _broadcast(values(xq[..., 0], xq[..., 1]), xq[..., 0].shape)
    else:
        cq = geom.field_at(np.asarray(values, dtype=np.float64), _TRI6_LAMBDA)
    sample = spec.isotherm.sample(cq)
    stored = spec.omega * cq + (1.0 - spec.omega) * spec.rho_s * sample.q
    return float(np.sum(geom.area * (stored @ _TRI6_W)))
