import numpy as np
import pytest

from chromfem.isotherm import Langmuir
from chromfem.mesh import build_rect_mesh, tag_boundary
from chromfem.mms import cubic_cosine_solution, problem_spec_from_solution


def const_velocity(ux, uy):
    def u(x, y):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, ux), np.full_like(x, uy)
    return u


def channel_velocity(Lx):
    def u(x, y):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x), 2.0 * x * (x - Lx)
    return u


@pytest.fixture(scope="session")
def diag_velocity():
    return const_velocity(1.0, 1.0)


@pytest.fixture(scope="session")
def unit_mesh_8(diag_velocity):
    return tag_boundary(build_rect_mesh(8, 8, 1.0, 1.0), diag_velocity)


@pytest.fixture(scope="session")
def unit_mesh_16(diag_velocity):
    return tag_boundary(build_rect_mesh(16, 16, 1.0, 1.0), diag_velocity)


@pytest.fixture(scope="session")
def mms_langmuir_spec(diag_velocity):
    """The convergence-test configuration: Langmuir law, unit parameters,
    diagonal unit velocity, identity diffusion."""
    ms = cubic_cosine_solution()
    spec = problem_spec_from_solution(ms, omega=0.5, rho_s=1.0,
                                      u=diag_velocity, isotherm=Langmuir(1.0, 1.0))
    return ms, spec
