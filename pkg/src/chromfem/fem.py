"""P1 Lagrange finite-element machinery on triangulated rectangles.

Bilinear forms that are polynomial for P1 fields (mass, stiffness, convection)
use a 3-point order-2 triangle rule, which integrates them exactly.  Loads and
any integrand containing the adsorption law go through a 6-point order-4 rule
because isotherm nonlinearities are not polynomial.  Boundary integrals use
2-point Gauss quadrature per edge.

Nodal coefficient vectors are plain 1-D numpy arrays of length
``mesh.num_nodes``; no wrapper type is introduced for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from chromfem import linalg
from chromfem.mesh import BoundaryTag, Mesh

# order-2 rule at edge midpoints, exact for quadratics
_TRI3_LAMBDA = np.array([[0.5, 0.5, 0.0],
                         [0.0, 0.5, 0.5],
                         [0.5, 0.0, 0.5]])
_TRI3_W = np.full(3, 1.0 / 3.0)

# order-4 Dunavant rule, exact for quartics
_a1, _b1 = 0.816847572980459, 0.091576213509771
_a2, _b2 = 0.108103018168070, 0.445948490915965
_TRI6_LAMBDA = np.array([[_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
                         [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2]])
_TRI6_W = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)

# 2-point Gauss rule on the unit interval, exact for cubics
_EDGE_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_EDGE_W = np.array([0.5, 0.5])


def _broadcast(values, shape):
    out = np.asarray(values, dtype=np.float64)
    return np.broadcast_to(out, shape)


@dataclass(frozen=True)
class ElementGeometry:
    """Per-triangle quantities shared by all assembly routines."""

    tri: np.ndarray      # (nt, 3) node indices
    pts: np.ndarray      # (nt, 3, 2) vertex coordinates
    area: np.ndarray     # (nt,)
    grads: np.ndarray    # (nt, 3, 2) constant P1 basis gradients
    rows: np.ndarray     # scatter pattern for 3x3 element matrices
    cols: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "ElementGeometry":
        tri = mesh.triangles
        pts = mesh.nodes[tri]
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0.0):
            raise ValueError("mesh contains non-CCW or degenerate triangles")
        x, y = pts[..., 0], pts[..., 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        grads = np.stack([b, c], axis=2) / det[:, None, None]
        return cls(
            tri=tri,
            pts=pts,
            area=0.5 * det,
            grads=grads,
            rows=np.repeat(tri, 3, axis=1).ravel(),
            cols=np.tile(tri, (1, 3)).ravel(),
        )

    def qpoints(self, lam: np.ndarray) -> np.ndarray:
        """Physical coordinates of barycentric points ``lam``, shape (nt, nq, 2)."""
        return np.einsum("qi,tid->tqd", lam, self.pts)

    def field_at(self, coeffs: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Evaluate the P1 field ``coeffs`` at barycentric points, shape (nt, nq)."""
        return np.einsum("ti,qi->tq", coeffs[self.tri], lam)

    def gradient_field(self, coeffs: np.ndarray) -> np.ndarray:
        """Piecewise-constant gradient of the P1 field, shape (nt, 2)."""
        return np.einsum("ti,tid->td", coeffs[self.tri], self.grads)

    def scatter(self, n: int, element_matrices: np.ndarray) -> sp.csr_matrix:
        A = sp.coo_matrix((element_matrices.ravel(), (self.rows, self.cols)),
                          shape=(n, n)).tocsr()
        A.sort_indices()
        return A


@dataclass
class ProblemSpec:
    """Physical data of the transport problem.

    Parameters
    ----------
    omega : float
        Membrane porosity, in (0, 1].
    rho_s : float
        Membrane density, positive.
    D : (2, 2) array
        Constant symmetric positive definite diffusion tensor.
    u : callable (x, y) -> (ux, uy)
        Divergence-free velocity field; must accept numpy arrays.
    g : callable (x, y, t) -> values
        Inflow boundary datum.
    C0 : callable (x, y) -> values
        Initial concentration.
    f : callable (x, y, t) -> values
        Forcing term.
    isotherm : Constant | Affine | Langmuir
        Adsorption law.
    neumann_flux : callable (x, y, t, nx, ny) -> values, optional
        Prescribed diffusive flux (D grad C).n on outflow/no-flow edges.
        The physical problem has zero flux there (leave as None); a
        manufactured solution generally does not.
    """

    omega: float
    rho_s: float
    D: np.ndarray
    u: object
    g: object
    C0: object
    f: object
    isotherm: object
    neumann_flux: object = None
    lambda_min: float = field(init=False)
    beta1: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.omega <= 1.0):
            raise ValueError(f"porosity must be in (0, 1], got {self.omega}")
        if not self.rho_s > 0.0:
            raise ValueError(f"membrane density must be positive, got {self.rho_s}")
        D = np.asarray(self.D, dtype=np.float64)
        if D.shape != (2, 2):
            raise ValueError("diffusion tensor must be 2x2")
        if abs(D[0, 1] - D[1, 0]) > 1e-14 * max(1.0, np.abs(D).max()):
            raise ValueError("diffusion tensor must be symmetric")
        lam = np.linalg.eigvalsh(D)
        if lam[0] <= 0.0:
            raise ValueError("diffusion tensor must be positive definite")
        self.D = D
        self.lambda_min = float(lam[0])
        self.beta1 = float(np.abs(D).max())

    def storage_coefficient(self, c):
        """omega + (1 - omega) * rho_s * q'(c), the factor multiplying dC/dt."""
        return self.omega + (1.0 - self.omega) * self.rho_s * self.isotherm.sample(c).dq


@dataclass(frozen=True)
class DofMap:
    """One degree of freedom per mesh node; inflow nodes carry Dirichlet data."""

    num_dofs: int
    dirichlet_dofs: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        idx = mesh.edges_with_tag(BoundaryTag.INFLOW)
        if idx.size:
            dofs = np.unique(mesh.edge_nodes[idx].ravel())
        else:
            dofs = np.empty(0, dtype=np.int64)
        return cls(num_dofs=mesh.num_nodes, dirichlet_dofs=dofs)


def assemble_mass(mesh: Mesh, weight: float = 1.0, geom: ElementGeometry | None = None) -> sp.csr_matrix:
    """Mass matrix ``weight * integral(phi_i phi_j)``, exact for P1."""
    if not weight > 0.0:
        raise ValueError("mass weight must be positive")
    geom = geom or ElementGeometry.from_mesh(mesh)
    local = np.einsum("q,qi,qj->ij", _TRI3_W, _TRI3_LAMBDA, _TRI3_LAMBDA)
    elems = weight * geom.area[:, None, None] * local[None, :, :]
    return geom.scatter(mesh.num_nodes, elems)


def assemble_weighted_mass(mesh: Mesh, weight, geom: ElementGeometry | None = None) -> sp.csr_matrix:
    """Mass matrix with a spatially varying coefficient.

    ``weight`` is a callable ``(x, y) -> values`` or a precomputed ``(nt, 6)``
    array of values at the order-4 quadrature points of every triangle.  Used
    for the adsorption storage coefficient, whose integrand is not polynomial.
    """
    geom = geom or ElementGeometry.from_mesh(mesh)
    nt = geom.tri.shape[0]
    if callable(weight):
        xq = geom.qpoints(_TRI6_LAMBDA)
        w = _broadcast(weight(xq[..., 0], xq[..., 1]), (nt, 6))
    else:
        w = np.asarray(weight, dtype=np.float64)
        if w.shape != (nt, 6):
            raise ValueError(f"expected quadrature values of shape ({nt}, 6), got {w.shape}")
    elems = np.einsum("q,tq,qi,qj->tij", _TRI6_W, w, _TRI6_LAMBDA, _TRI6_LAMBDA)
    elems *= geom.area[:, None, None]
    return geom.scatter(mesh.num_nodes, elems)


def assemble_stiffness(mesh: Mesh, D, geom: ElementGeometry | None = None) -> sp.csr_matrix:
    """Diffusion matrix ``integral((D grad phi_j) . grad phi_i)``, exact for P1."""
    geom = geom or ElementGeometry.from_mesh(mesh)
    D = np.asarray(D, dtype=np.float64)
    Dg = np.einsum("de,tje->tjd", D, geom.grads)
    elems = np.einsum("tid,tjd->tij", geom.grads, Dg) * geom.area[:, None, None]
    return geom.scatter(mesh.num_nodes, elems)


def assemble_convection(mesh: Mesh, u, geom: ElementGeometry | None = None) -> sp.csr_matrix:
    """Convection matrix ``integral((u . grad phi_j) phi_i)`` by the order-2 rule."""
    geom = geom or ElementGeometry.from_mesh(mesh)
    nt = geom.tri.shape[0]
    xq = geom.qpoints(_TRI3_LAMBDA)
    ux, uy = u(xq[..., 0], xq[..., 1])
    ux = _broadcast(ux, (nt, 3))
    uy = _broadcast(uy, (nt, 3))
    udotgrad = ux[:, :, None] * geom.grads[:, None, :, 0] + uy[:, :, None] * geom.grads[:, None, :, 1]
    elems = np.einsum("q,qi,tqj->tij", _TRI3_W, _TRI3_LAMBDA, udotgrad)
    elems *= geom.area[:, None, None]
    return geom.scatter(mesh.num_nodes, elems)


def assemble_boundary_mass(mesh: Mesh, weight, edges: np.ndarray | None = None) -> sp.csr_matrix:
    """Boundary mass matrix ``integral_bnd(w phi_i phi_j ds)``.

    ``weight`` is a callable ``(x, y, nx, ny) -> values`` evaluated at the
    2-point Gauss nodes of each boundary edge; pass ``u.n`` to obtain the
    matrix appearing in the discrete Green identity.  ``edges`` restricts the
    integration to a subset of boundary-edge indices.
    """
    if edges is None:
        edges = np.arange(mesh.num_boundary_edges)
    n = mesh.num_nodes
    if edges.size == 0:
        return sp.csr_matrix((n, n))
    an = mesh.edge_nodes[edges, 0]
    bn = mesh.edge_nodes[edges, 1]
    pa, pb = mesh.nodes[an], mesh.nodes[bn]
    length = np.hypot(*(pb - pa).T)
    normal = mesh.edge_normals()[edges]
    rows, cols, vals = [], [], []
    for s, wq in zip(_EDGE_S, _EDGE_W):
        xq = pa + s * (pb - pa)
        w = _broadcast(weight(xq[:, 0], xq[:, 1], normal[:, 0], normal[:, 1]), length.shape)
        phi = np.array([1.0 - s, s])
        for i, ni in enumerate((an, bn)):
            for j, nj in enumerate((an, bn)):
                rows.append(ni)
                cols.append(nj)
                vals.append(wq * length * w * phi[i] * phi[j])
    B = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    B.sort_indices()
    return B


def assemble_rhs(mesh: Mesh, f, neumann_flux=None, geom: ElementGeometry | None = None) -> np.ndarray:
    """Load vector ``integral(f phi_i)`` plus an optional boundary flux term.

    ``f`` is a callable ``(x, y) -> values`` at a fixed time, integrated with
    the order-4 volume rule.  When ``neumann_flux`` is given (callable
    ``(x, y, nx, ny) -> values``, the value of ``(D grad C).n``), it is
    integrated over every outflow and no-flow edge with 2-point Gauss
    quadrature.  Inflow edges never receive a flux term; they carry Dirichlet
    data.
    """
    geom = geom or ElementGeometry.from_mesh(mesh)
    nt = geom.tri.shape[0]
    b = np.zeros(mesh.num_nodes)
    xq = geom.qpoints(_TRI6_LAMBDA)
    fq = _broadcast(f(xq[..., 0], xq[..., 1]), (nt, 6))
    be = np.einsum("q,tq,qi->ti", _TRI6_W, fq, _TRI6_LAMBDA) * geom.area[:, None]
    np.add.at(b, geom.tri.ravel(), be.ravel())

    if neumann_flux is not None:
        edges = np.flatnonzero(mesh.edge_tags != BoundaryTag.INFLOW)
        if edges.size:
            an = mesh.edge_nodes[edges, 0]
            bn = mesh.edge_nodes[edges, 1]
            pa, pb = mesh.nodes[an], mesh.nodes[bn]
            length = np.hypot(*(pb - pa).T)
            normal = mesh.edge_normals()[edges]
            for s, wq in zip(_EDGE_S, _EDGE_W):
                xq = pa + s * (pb - pa)
                flux = _broadcast(neumann_flux(xq[:, 0], xq[:, 1], normal[:, 0], normal[:, 1]),
                                  length.shape)
                np.add.at(b, an, wq * length * flux * (1.0 - s))
                np.add.at(b, bn, wq * length * flux * s)
    return b


def l2_project(mesh: Mesh, target, solver: linalg.SolverConfig | None = None,
               geom: ElementGeometry | None = None) -> np.ndarray:
    """L2-orthogonal projection of ``target`` onto the P1 space.

    ``target`` is a callable ``(x, y) -> values`` or a nodal coefficient
    array (interpreted as a P1 field).  Solves ``M c = (target, phi_i)``.
    """
    geom = geom or ElementGeometry.from_mesh(mesh)
    nt = geom.tri.shape[0]
    M = assemble_mass(mesh, 1.0, geom)
    if callable(target):
        xq = geom.qpoints(_TRI6_LAMBDA)
        tq = _broadcast(target(xq[..., 0], xq[..., 1]), (nt, 6))
    else:
        coeffs = np.asarray(target, dtype=np.float64)
        if coeffs.shape != (mesh.num_nodes,):
            raise ValueError("nodal target must have one value per mesh node")
        tq = geom.field_at(coeffs, _TRI6_LAMBDA)
    b = np.zeros(mesh.num_nodes)
    be = np.einsum("q,tq,qi->ti", _TRI6_W, tq, _TRI6_LAMBDA) * geom.area[:, None]
    np.add.at(b, geom.tri.ravel(), be.ravel())
    return linalg.solve(M, b, solver)


def interpolate_boundary(mesh: Mesh, g, t: float) -> dict:
    """Nodal interpolant of the inflow datum: ``{inflow node: g(x, y, t)}``."""
    dofmap = DofMap.from_mesh(mesh)
    dofs = dofmap.dirichlet_dofs
    if dofs.size == 0:
        return {}
    xy = mesh.nodes[dofs]
    vals = _broadcast(g(xy[:, 0], xy[:, 1], t), (dofs.size,))
    return {int(d): float(v) for d, v in zip(dofs, vals)}


def lift_dirichlet(mesh: Mesh, spec: ProblemSpec, g_h: dict,
                   solver: linalg.SolverConfig | None = None,
                   geom: ElementGeometry | None = None) -> np.ndarray:
    """Discrete extension of inflow data into the domain.

    Solves ``(D grad Chat, grad v) + (Chat, v) = 0`` for all test functions
    vanishing on the inflow boundary, with ``Chat = g_h`` at the inflow nodes
    and natural zero-flux conditions elsewhere.
    """
    geom = geom or ElementGeometry.from_mesh(mesh)
    K = assemble_stiffness(mesh, spec.D, geom) + assemble_mass(mesh, 1.0, geom)
    b = np.zeros(mesh.num_nodes)
    K, b = constrain(K, b, g_h)
    return linalg.solve(K, b, solver)


def constrain(A: sp.csr_matrix, b: np.ndarray, fixed: dict) -> tuple:
    """Apply Dirichlet values by symmetric-consistent row/column elimination.

    Fixed rows become identity rows with the prescribed value on the right;
    fixed-column contributions move to the right-hand side.  The
    unconstrained block is returned unchanged.
    """
    b = np.array(b, dtype=np.float64)
    if not fixed:
        return A.copy(), b
    n = A.shape[0]
    idx = np.fromiter(sorted(fixed), dtype=np.int64, count=len(fixed))
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError("fixed dof index out of range")
    vals = np.array([fixed[int(i)] for i in idx], dtype=np.float64)
    x0 = np.zeros(n)
    x0[idx] = vals
    b -= A @ x0
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    coo = A.tocoo()
    keep = ~(mask[coo.row] | mask[coo.col])
    rows = np.concatenate([coo.row[keep], idx])
    cols = np.concatenate([coo.col[keep], idx])
    data = np.concatenate([coo.data[keep], np.ones(idx.size)])
    A2 = sp.coo_matrix((data, (rows, cols)), shape=A.shape).tocsr()
    A2.sort_indices()
    b[idx] = vals
    return A2, b
