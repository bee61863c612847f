"""Finite-element solver for advection-diffusion-adsorption transport in
membrane chromatography columns.

The package provides structured triangulations of rectangles (:mod:`~chromfem.mesh`),
P1 Lagrange assembly and boundary handling (:mod:`~chromfem.fem`), adsorption
isotherms (:mod:`~chromfem.isotherm`), Backward Euler and implicit-midpoint
time integrators (:mod:`~chromfem.stepper`), mass-balance diagnostics
(:mod:`~chromfem.diagnostics`), and a manufactured-solution convergence
harness (:mod:`~chromfem.mms`).  Batch workflows are exposed through the
``chromfem`` command line tool (:mod:`~chromfem.cli`).
"""

from chromfem.mesh import BoundaryTag, Mesh, build_rect_mesh, tag_boundary
from chromfem.isotherm import Affine, Constant, Langmuir
from chromfem.fem import ProblemSpec
from chromfem.stepper import SchemeConfig, SimState, init_state, run_transient

__all__ = [
    "Affine",
    "BoundaryTag",
    "Constant",
    "Langmuir",
    "Mesh",
    "ProblemSpec",
    "SchemeConfig",
    "SimState",
    "build_rect_mesh",
    "init_state",
    "run_transient",
    "tag_boundary",
]

__version__ = "0.1.0"
