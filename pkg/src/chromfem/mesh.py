"""Structured conforming triangulations of axis-aligned rectangles.

Every grid cell is split along the same lower-left to upper-right diagonal so
that refinement studies see a fixed mesh family.  Boundary edges are stored in
the counterclockwise orientation of their owning triangle, which makes the
outward normal of edge ``(a, b)`` equal to ``(dy, -dx) / length``.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, replace

import numpy as np


class BoundaryTag(enum.Enum):
    """Classification of a boundary edge by the sign of u.n at its midpoint."""

    INFLOW = "inflow"
    OUTFLOW = "outflow"
    NOFLOW = "noflow"


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a rectangle.

    Attributes
    ----------
    nodes : (nn, 2) float array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Vertex indices per triangle, counterclockwise.
    edge_nodes : (nb, 2) int array
        Boundary edge endpoints, oriented CCW within the owning triangle.
    edge_tri : (nb,) int array
        Owning triangle of each boundary edge.
    edge_tags : (nb,) object array of BoundaryTag
        One tag per boundary edge.
    h : float
        Maximum edge length over the triangulation.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edge_nodes: np.ndarray
    edge_tri: np.ndarray
    edge_tags: np.ndarray
    h: float

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_boundary_edges(self) -> int:
        return self.edge_nodes.shape[0]

    def signed_areas(self) -> np.ndarray:
        """Signed area per triangle (positive for CCW orientation)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        """Length of each boundary edge."""
        d = self.nodes[self.edge_nodes[:, 1]] - self.nodes[self.edge_nodes[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edge_midpoints(self) -> np.ndarray:
        """Midpoint of each boundary edge, shape (nb, 2)."""
        return 0.5 * (self.nodes[self.edge_nodes[:, 0]] + self.nodes[self.edge_nodes[:, 1]])

    def edge_normals(self) -> np.ndarray:
        """Outward unit normal of each boundary edge, shape (nb, 2)."""
        d = self.nodes[self.edge_nodes[:, 1]] - self.nodes[self.edge_nodes[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack((d[:, 1], -d[:, 0])) / length[:, None]

    def edges_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        """Indices into the boundary edge list carrying ``tag``."""
        return np.flatnonzero(self.edge_tags == tag)


def build_rect_mesh(nx: int, ny: int, Lx: float, Ly: float) -> Mesh:
    """Triangulate ``[0, Lx] x [0, Ly]`` on a uniform ``nx`` by ``ny`` grid.

    Each cell is split along its lower-left to upper-right diagonal, giving
    ``2*nx*ny`` CCW triangles on ``(nx+1)*(ny+1)`` nodes.  Boundary edges are
    returned untagged (``NOFLOW`` placeholder); apply :func:`tag_boundary`
    once the velocity field is known.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    if not (Lx > 0.0 and Ly > 0.0):
        raise ValueError(f"domain lengths must be positive, got Lx={Lx}, Ly={Ly}")

    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row index j -> y, column index i -> x
    nodes = np.column_stack((X.ravel(), Y.ravel()))

    def nid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            n00 = nid(i, j)
            n10 = nid(i + 1, j)
            n01 = nid(i, j + 1)
            n11 = nid(i + 1, j + 1)
            tris[k] = (n00, n10, n11)      # lower triangle
            tris[k + 1] = (n00, n11, n01)  # upper triangle
            k += 2

    # Boundary edges in the CCW orientation of the owning triangle.  The
    # lower triangle of cell (i, j) is index 2*(j*nx + i), the upper one +1.
    edges = []
    owners = []
    for i in range(nx):  # bottom, y = 0
        edges.append((nid(i, 0), nid(i + 1, 0)))
        owners.append(2 * i)
    for j in range(ny):  # right, x = Lx
        edges.append((nid(nx, j), nid(nx, j + 1)))
        owners.append(2 * (j * nx + nx - 1))
    for i in range(nx):  # top, y = Ly
        edges.append((nid(i + 1, ny), nid(i, ny)))
        owners.append(2 * ((ny - 1) * nx + i) + 1)
    for j in range(ny):  # left, x = 0
        edges.append((nid(0, j + 1), nid(0, j)))
        owners.append(2 * (j * nx) + 1)

    dx, dy = Lx / nx, Ly / ny
    return Mesh(
        nodes=nodes,
        triangles=tris,
        edge_nodes=np.asarray(edges, dtype=np.int64),
        edge_tri=np.asarray(owners, dtype=np.int64),
        edge_tags=np.full(len(edges), BoundaryTag.NOFLOW, dtype=object),
        h=float(np.hypot(dx, dy)),
    )


def tag_boundary(mesh: Mesh, u, tol: float = 1e-12) -> Mesh:
    """Return a copy of ``mesh`` with boundary edges tagged by the sign of u.n.

    ``u`` is evaluated at edge midpoints and must accept array arguments,
    ``u(x, y) -> (ux, uy)``.  Edges with ``|u.n| <= tol`` become ``NOFLOW``.
    """
    mid = mesh.edge_midpoints()
    normal = mesh.edge_normals()
    ux, uy = u(mid[:, 0], mid[:, 1])
    un = np.broadcast_to(ux, mid[:, 0].shape) * normal[:, 0] \
        + np.broadcast_to(uy, mid[:, 1].shape) * normal[:, 1]
    tags = np.full(mesh.num_boundary_edges, BoundaryTag.NOFLOW, dtype=object)
    tags[un < -tol] = BoundaryTag.INFLOW
    tags[un > tol] = BoundaryTag.OUTFLOW
    return replace(mesh, edge_tags=tags)


def dump_mesh_csv(mesh: Mesh, outdir) -> None:
    """Write ``nodes.csv``, ``tris.csv``, and ``bedges.csv`` into ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "nodes.csv"), "w") as fh:
        fh.write("id,x,y\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i},{float(x)!r},{float(y)!r}\n")
    with open(os.path.join(outdir, "tris.csv"), "w") as fh:
        fh.write("id,n0,n1,n2\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i},{a},{b},{c}\n")
    with open(os.path.join(outdir, "bedges.csv"), "w") as fh:
        fh.write("n0,n1,tag\n")
        for (a, b), tag in zip(mesh.edge_nodes, mesh.edge_tags):
            fh.write(f"{a},{b},{tag.value}\n")
