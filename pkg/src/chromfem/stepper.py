"""Time integration of the adsorption transport system.

Three schemes over the same assembled operators:

``be_lagged``
    Backward Euler with the storage coefficient lagged at the previous
    time level; first-order accurate, one linear solve per step.

``midpoint_extrapolated``
    Implicit midpoint in refactorized form: a Backward Euler half-step to
    ``t_{n+1/2}`` followed by the linear extrapolation
    ``C^{n+1} = 2 C^{n+1/2} - C^n``.  The storage coefficient is evaluated at
    the second-order extrapolant ``(3 C^n - C^{n-1}) / 2``, so each step
    still costs a single linear solve.

``midpoint_picard``
    Same half-step, but the storage coefficient is made self-consistent with
    the midpoint value by fixed-point iteration (one linear solve per
    iterate).

The storage coefficient ``omega + (1 - omega) rho_s q'(.)`` enters as a
weighted mass matrix reassembled every step from quadrature-point values of
the P1-interpolated argument, which keeps the mass block symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chromfem import linalg
from chromfem.fem import (DofMap, ElementGeometry, ProblemSpec, _TRI6_LAMBDA,
                          assemble_convection, assemble_mass, assemble_rhs,
                          assemble_stiffness, assemble_weighted_mass, constrain)
from chromfem.mesh import Mesh


class ConfigurationError(ValueError):
    """Inconsistent run configuration (bad scheme name, non-integer step count, ...)."""


class StepError(RuntimeError):
    """A time step failed; carries the step index and chains the cause."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class PicardNonConvergence(StepError):
    """Fixed-point iteration exhausted its budget; carries the last increment."""

    def __init__(self, step: int, iterations: int, increment: float):
        super().__init__(step, f"Picard iteration did not converge in {iterations} "
                               f"iterations (last increment {increment:.3e})")
        self.iterations = iterations
        self.increment = increment


_SCHEMES = ("be_lagged", "midpoint_extrapolated", "midpoint_picard")


@dataclass
class SchemeConfig:
    scheme: str
    dt: float
    picard_tol: float = 1e-10
    picard_max: int = 50

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {_SCHEMES}")
        if not self.dt > 0.0:
            raise ConfigurationError("time step must be positive")
        if not self.picard_tol > 0.0:
            raise ConfigurationError("Picard tolerance must be positive")
        if self.picard_max < 1:
            raise ConfigurationError("Picard iteration budget must be at least 1")


@dataclass
class SimState:
    """Nodal concentration at time level n (and n-1 for extrapolation)."""

    t: float
    step: int
    C: np.ndarray
    C_prev: np.ndarray | None = None


@dataclass
class RunDiagnostics:
    steps: int = 0
    solves: int = 0
    picard_iterations: int = 0


class TransportOperators:
    """Mesh-bound operators reused across time steps and runs.

    Holds the convection and stiffness matrices (velocity and diffusion are
    constant in time), the plain mass matrix for norms, and the quadrature
    machinery for the per-step weighted mass.  Counts linear solves.
    """

    def __init__(self, mesh: Mesh, spec: ProblemSpec,
                 solver: linalg.SolverConfig | None = None):
        self.mesh = mesh
        self.spec = spec
        self.geom = ElementGeometry.from_mesh(mesh)
        self.dofmap = DofMap.from_mesh(mesh)
        self.convection = assemble_convection(mesh, spec.u, self.geom)
        self.stiffness = assemble_stiffness(mesh, spec.D, self.geom)
        self.mass = assemble_mass(mesh, 1.0, self.geom)
        self.solver = solver if solver is not None else linalg.SolverConfig()
        self.solve_count = 0

    def storage_mass(self, coeff_field: np.ndarray):
        """Weighted mass matrix with the storage coefficient evaluated from
        the nodal field ``coeff_field`` at the order-4 quadrature points."""
        cq = self.geom.field_at(np.asarray(coeff_field, dtype=np.float64), _TRI6_LAMBDA)
        wq = self.spec.storage_coefficient(cq)
        return assemble_weighted_mass(self.mesh, wq, self.geom)

    def rhs(self, t: float) -> np.ndarray:
        spec = self.spec
        flux = None
        if spec.neumann_flux is not None:
            flux = lambda x, y, nx, ny: spec.neumann_flux(x, y, t, nx, ny)
        return assemble_rhs(self.mesh, lambda x, y: spec.f(x, y, t), flux, self.geom)

    def dirichlet(self, t: float) -> dict:
        dofs = self.dofmap.dirichlet_dofs
        if dofs.size == 0:
            return {}
        xy = self.mesh.nodes[dofs]
        vals = np.broadcast_to(np.asarray(self.spec.g(xy[:, 0], xy[:, 1], t),
                                          dtype=np.float64), (dofs.size,))
        return {int(d): float(v) for d, v in zip(dofs, vals)}

    def apply_dirichlet(self, t: float, C: np.ndarray) -> None:
        for dof, val in self.dirichlet(t).items():
            C[dof] = val

    def solve(self, A, b) -> np.ndarray:
        self.solve_count += 1
        return linalg.solve(A, b, self.solver)

    def l2_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(v @ (self.mass @ v)))


def assemble_operators(mesh: Mesh, spec: ProblemSpec,
                       solver: linalg.SolverConfig | None = None) -> TransportOperators:
    return TransportOperators(mesh, spec, solver)


def init_state(mesh: Mesh, spec: ProblemSpec, ops: TransportOperators | None = None) -> SimState:
    """Initial state: nodal interpolation of C0, inflow nodes set to g(., 0)."""
    C = np.broadcast_to(np.asarray(spec.C0(mesh.nodes[:, 0], mesh.nodes[:, 1]),
                                   dtype=np.float64), (mesh.num_nodes,)).copy()
    ops = ops or TransportOperators(mesh, spec)
    ops.apply_dirichlet(0.0, C)
    return SimState(t=0.0, step=0, C=C, C_prev=None)


def be_step(state: SimState, spec: ProblemSpec, scheme: SchemeConfig,
            ops: TransportOperators) -> SimState:
    """One Backward Euler step with the storage coefficient lagged at C^n."""
    dt = scheme.dt
    t1 = state.t + dt
    try:
        Mw = ops.storage_mass(state.C)
        K = Mw * (1.0 / dt) + ops.convection + ops.stiffness
        b = ops.rhs(t1) + (Mw @ state.C) / dt
        K, b = constrain(K, b, ops.dirichlet(t1))
        C1 = ops.solve(K, b)
    except linalg.LinearSolverError as err:
        raise StepError(state.step + 1, str(err)) from err
    return SimState(t=t1, step=state.step + 1, C=C1, C_prev=state.C)


def _half_step_solve(state: SimState, scheme: SchemeConfig, ops: TransportOperators,
                     coeff_field: np.ndarray) -> np.ndarray:
    """Backward Euler half-step to t_{n+1/2} with a frozen storage coefficient."""
    half = 0.5 * scheme.dt
    th = state.t + half
    Mw = ops.storage_mass(coeff_field)
    K = Mw * (1.0 / half) + ops.convection + ops.stiffness
    b = ops.rhs(th) + (Mw @ state.C) / half
    K, b = constrain(K, b, ops.dirichlet(th))
    return ops.solve(K, b)


def midpoint_step(state: SimState, spec: ProblemSpec, scheme: SchemeConfig,
                  ops: TransportOperators,
                  diagnostics: RunDiagnostics | None = None) -> SimState:
    """One implicit-midpoint step in refactorized half-step form.

    The half-step value never requires a second solve to reach ``t_{n+1}``:
    the forward half is the exact linear extrapolation
    ``C^{n+1} = 2 C^{n+1/2} - C^n``, after which inflow nodes are reset to
    the boundary datum at ``t_{n+1}``.
    """
    t1 = state.t + scheme.dt
    try:
        if scheme.scheme == "midpoint_extrapolated":
            if state.C_prev is None:
                cstar = state.C
            else:
                cstar = 1.5 * state.C - 0.5 * state.C_prev
            chalf = _half_step_solve(state, scheme, ops, cstar)
        elif scheme.scheme == "midpoint_picard":
            cmid = state.C.copy()
            increment = np.inf
            for k in range(scheme.picard_max):
                cnew = _half_step_solve(state, scheme, ops, cmid)
                increment = ops.l2_norm(cnew - cmid)
                cmid = cnew
                if diagnostics is not None:
                    diagnostics.picard_iterations += 1
                if increment <= scheme.picard_tol:
                    break
            else:
                raise PicardNonConvergence(state.step + 1, scheme.picard_max, increment)
            chalf = cmid
        else:
            raise ConfigurationError(f"midpoint_step cannot run scheme {scheme.scheme!r}")
    except linalg.LinearSolverError as err:
        raise StepError(state.step + 1, str(err)) from err

    C1 = 2.0 * chalf - state.C
    ops.apply_dirichlet(t1, C1)
    return SimState(t=t1, step=state.step + 1, C=C1, C_prev=state.C)


def advance(state: SimState, spec: ProblemSpec, scheme: SchemeConfig,
            ops: TransportOperators, diagnostics: RunDiagnostics | None = None) -> SimState:
    """Dispatch one step of the configured scheme."""
    if scheme.scheme == "be_lagged":
        return be_step(state, spec, scheme, ops)
    return midpoint_step(state, spec, scheme, ops, diagnostics)


def run_transient(mesh: Mesh, spec: ProblemSpec, scheme: SchemeConfig, T: float,
                  observers=(), stride: int = 1,
                  solver: linalg.SolverConfig | None = None,
                  ops: TransportOperators | None = None):
    """Advance from the initial state to time ``T``.

    ``T`` must be an integer multiple of the time step.  Snapshots are
    collected every ``stride`` steps (the initial and final states always
    included), and each observer is called as ``observer(state, ops)`` at the
    same points.  Returns ``(snapshots, RunDiagnostics)``.
    """
    if T < 0.0:
        raise ConfigurationError("final time must be nonnegative")
    if stride < 1:
        raise ConfigurationError("snapshot stride must be at least 1")
    nsteps_real = T / scheme.dt
    nsteps = int(round(nsteps_real))
    if abs(nsteps_real - nsteps) > 1e-9 * max(1.0, nsteps_real):
        raise ConfigurationError(
            f"final time {T} is not an integer multiple of dt {scheme.dt}")

    if ops is None:
        ops = TransportOperators(mesh, spec, solver)
    diagnostics = RunDiagnostics()
    solves_before = ops.solve_count

    state = init_state(mesh, spec, ops)
    snapshots = [state]
    for obs in observers:
        obs(state, ops)

    for n in range(nsteps):
        state = advance(state, spec, scheme, ops, diagnostics)
        diagnostics.steps += 1
        if state.step % stride == 0 or state.step == nsteps:
            snapshots.append(state)
            for obs in observers:
                obs(state, ops)

    diagnostics.solves = ops.solve_count - solves_before
    return snapshots, diagnostics
