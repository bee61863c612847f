"""Manufactured-solution harness: forcing synthesis, error norms, and
temporal convergence studies.

A manufactured solution supplies closed-form derivatives alongside the value;
they are cross-checked against finite differences on construction, so a study
never runs against an inconsistent forcing term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from chromfem import linalg
from chromfem.fem import ElementGeometry, ProblemSpec, _TRI6_LAMBDA, _TRI6_W, _broadcast
from chromfem.mesh import Mesh, build_rect_mesh, tag_boundary
from chromfem.stepper import (ConfigurationError, SchemeConfig, TransportOperators,
                              run_transient)

RATE_COLUMNS = {"linf_l2": "rate_linf_l2", "l2_l2": "rate_l2_l2",
                "l2_h1semi": "rate_h1semi", "l2_h1": "rate_h1"}


@dataclass
class ManufacturedSolution:
    """Exact solution with closed-form time derivative, gradient, and div(D grad).

    ``value``, ``d_t`` are callables ``(x, y, t) -> values``; ``gradient``
    returns the pair ``(dC/dx, dC/dy)``; ``divDgrad`` is ``div(D grad C)``
    for the tensor ``D`` stored on the object.  All are spot-checked against
    central finite differences at 20 deterministic sample points.
    """

    value: object
    d_t: object
    gradient: object
    divDgrad: object
    D: np.ndarray

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=np.float64)
        rng = np.random.default_rng(20260809)
        x = rng.uniform(0.05, 0.95, 20)
        y = rng.uniform(0.05, 0.95, 20)
        t = rng.uniform(0.25, 1.0, 20)
        v = self.value

        def check(name, got, ref):
            tol = 1e-6 * np.maximum(1.0, np.abs(ref))
            if np.any(np.abs(np.asarray(got) - ref) > tol):
                raise ValueError(f"manufactured solution: {name} disagrees with "
                                 f"finite differences of value()")

        e = 1e-6
        check("d_t", self.d_t(x, y, t), (v(x, y, t + e) - v(x, y, t - e)) / (2 * e))
        gx, gy = self.gradient(x, y, t)
        check("gradient[0]", gx, (v(x + e, y, t) - v(x - e, y, t)) / (2 * e))
        check("gradient[1]", gy, (v(x, y + e, t) - v(x, y - e, t)) / (2 * e))
        e2 = 1e-4
        cxx = (v(x + e2, y, t) - 2 * v(x, y, t) + v(x - e2, y, t)) / e2**2
        cyy = (v(x, y + e2, t) - 2 * v(x, y, t) + v(x, y - e2, t)) / e2**2
        cxy = (v(x + e2, y + e2, t) - v(x + e2, y - e2, t)
               - v(x - e2, y + e2, t) + v(x - e2, y - e2, t)) / (4 * e2**2)
        d = self.D
        check("divDgrad", self.divDgrad(x, y, t),
              d[0, 0] * cxx + 2 * d[0, 1] * cxy + d[1, 1] * cyy)


def cubic_cosine_solution(D=None) -> ManufacturedSolution:
    """Built-in default: C(x, y, t) = t^2 (x^3 - 1.5 x^2 + 1) cos(pi y / 4)."""
    D = np.eye(2) if D is None else np.asarray(D, dtype=np.float64)
    k = math.pi / 4.0

    def phi(x):
        return x**3 - 1.5 * x**2 + 1.0

    def value(x, y, t):
        return t**2 * phi(x) * np.cos(k * y)

    def d_t(x, y, t):
        return 2.0 * t * phi(x) * np.cos(k * y)

    def gradient(x, y, t):
        gx = t**2 * (3.0 * x**2 - 3.0 * x) * np.cos(k * y)
        gy = -t**2 * phi(x) * k * np.sin(k * y)
        return gx, gy

    def divDgrad(x, y, t):
        cxx = t**2 * (6.0 * x - 3.0) * np.cos(k * y)
        cxy = -t**2 * (3.0 * x**2 - 3.0 * x) * k * np.sin(k * y)
        cyy = -t**2 * phi(x) * k**2 * np.cos(k * y)
        return D[0, 0] * cxx + 2.0 * D[0, 1] * cxy + D[1, 1] * cyy

    return ManufacturedSolution(value=value, d_t=d_t, gradient=gradient,
                                divDgrad=divDgrad, D=D)


def forcing_from_exact(ms: ManufacturedSolution, spec: ProblemSpec):
    """Forcing matching the single-unknown transport form of the model:
    ``(omega + (1 - omega) rho_s q'(C)) dC/dt + u . grad C - div(D grad C)``."""
    def f(x, y, t):
        c = ms.value(x, y, t)
        gx, gy = ms.gradient(x, y, t)
        ux, uy = spec.u(x, y)
        return (spec.storage_coefficient(c) * ms.d_t(x, y, t)
                + ux * gx + uy * gy - ms.divDgrad(x, y, t))
    return f


def normal_flux(ms: ManufacturedSolution):
    """Diffusive flux datum ``(D grad C) . n`` of the exact solution."""
    D = ms.D

    def flux(x, y, t, nx, ny):
        gx, gy = ms.gradient(x, y, t)
        return (D[0, 0] * gx + D[0, 1] * gy) * nx + (D[1, 0] * gx + D[1, 1] * gy) * ny
    return flux


def problem_spec_from_solution(ms: ManufacturedSolution, omega: float, rho_s: float,
                               u, isotherm) -> ProblemSpec:
    """ProblemSpec whose data (g, C0, f, boundary flux) all derive from ``ms``.

    The exact trace is imposed on the inflow boundary only; on the remaining
    boundary the exact diffusive flux enters as a Neumann load, since a
    manufactured solution generally violates the homogeneous flux condition.
    """
    spec = ProblemSpec(
        omega=omega, rho_s=rho_s, D=ms.D, u=u,
        g=lambda x, y, t: ms.value(x, y, t),
        C0=lambda x, y: ms.value(x, y, 0.0),
        f=lambda x, y, t: 0.0,
        isotherm=isotherm,
        neumann_flux=normal_flux(ms),
    )
    spec.f = forcing_from_exact(ms, spec)
    return spec


@dataclass(frozen=True)
class ErrorReport:
    """Spacetime error norms of a run against the exact solution.

    ``linf_l2`` is the max over snapshot times of the spatial L2 error;
    ``l2_l2`` and ``l2_h1semi`` are discrete L2-in-time aggregates
    ``sqrt(dt * sum_n ||.||^2)`` over n >= 1; ``l2_h1`` combines them into
    the full H1 norm.
    """

    linf_l2: float
    l2_l2: float
    l2_h1semi: float
    l2_h1: float

    def astuple(self):
        return (self.linf_l2, self.l2_l2, self.l2_h1semi, self.l2_h1)


def spatial_errors(mesh: Mesh, ms: ManufacturedSolution, C: np.ndarray, t: float,
                   geom: ElementGeometry | None = None):
    """L2 and H1-seminorm errors of the nodal field ``C`` at time ``t``."""
    geom = geom or ElementGeometry.from_mesh(mesh)
    xq = geom.qpoints(_TRI6_LAMBDA)
    shape = xq[..., 0].shape
    diff = _broadcast(ms.value(xq[..., 0], xq[..., 1], t), shape) - geom.field_at(C, _TRI6_LAMBDA)
    l2sq = float(np.sum(geom.area * ((diff * diff) @ _TRI6_W)))
    gx, gy = ms.gradient(xq[..., 0], xq[..., 1], t)
    gh = geom.gradient_field(C)
    dx = _broadcast(gx, shape) - gh[:, None, 0]
    dy = _broadcast(gy, shape) - gh[:, None, 1]
    h1sq = float(np.sum(geom.area * ((dx * dx + dy * dy) @ _TRI6_W)))
    return math.sqrt(l2sq), math.sqrt(h1sq)


def error_norms(snapshots, ms: ManufacturedSolution, mesh: Mesh,
                geom: ElementGeometry | None = None) -> ErrorReport:
    """Aggregate spatial errors over a snapshot sequence at uniform dt."""
    if len(snapshots) < 1:
        raise ConfigurationError("error norms need at least one snapshot")
    for s in snapshots:
        if s.C.shape != (mesh.num_nodes,):
            raise ConfigurationError("snapshot vector length does not match the mesh")
    times = np.array([s.t for s in snapshots])
    if len(times) > 1:
        steps = np.diff(times)
        if np.any(np.abs(steps - steps[0]) > 1e-9 * max(1.0, abs(steps[0]))):
            raise ConfigurationError("snapshots are not uniformly spaced in time")
        dt = float(steps[0])
    else:
        dt = 0.0

    geom = geom or ElementGeometry.from_mesh(mesh)
    l2 = np.empty(len(snapshots))
    h1 = np.empty(len(snapshots))
    for i, s in enumerate(snapshots):
        l2[i], h1[i] = spatial_errors(mesh, ms, s.C, s.t, geom)
    l2_l2 = math.sqrt(dt * float(np.sum(l2[1:] ** 2)))
    l2_h1semi = math.sqrt(dt * float(np.sum(h1[1:] ** 2)))
    return ErrorReport(
        linf_l2=float(l2.max()),
        l2_l2=l2_l2,
        l2_h1semi=l2_h1semi,
        l2_h1=math.sqrt(l2_l2**2 + l2_h1semi**2),
    )


@dataclass
class ConvergenceRow:
    h: float
    dt: float
    errors: ErrorReport
    rates: dict | None = None  # keyed by error-report field name; None on first row


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def add(self, h: float, dt: float, errors: ErrorReport):
        rates = None
        if self.rows:
            prev = self.rows[-1]
            if prev.h == h and abs(prev.dt / dt - 2.0) < 1e-9:
                rates = {}
                for name in RATE_COLUMNS:
                    e_coarse = getattr(prev.errors, name)
                    e_fine = getattr(errors, name)
                    rates[name] = math.log2(e_coarse / e_fine) if e_fine > 0.0 else math.nan
        self.rows.append(ConvergenceRow(h=h, dt=dt, errors=errors, rates=rates))

    def rates_for(self, name: str):
        """Observed rates of one norm down the ladder (skips the first row)."""
        return [r.rates[name] for r in self.rows if r.rates is not None]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            header = ["h", "dt"]
            for name, rate in RATE_COLUMNS.items():
                header += [name, rate]
            fh.write(",".join(header) + "\n")
            for row in self.rows:
                cells = [repr(float(row.h)), repr(float(row.dt))]
                for name in RATE_COLUMNS:
                    cells.append(repr(float(getattr(row.errors, name))))
                    cells.append("" if row.rates is None else repr(float(row.rates[name])))
                fh.write(",".join(cells) + "\n")

    def __str__(self):
        cols = ["h", "dt"]
        for name, rate in RATE_COLUMNS.items():
            cols += [name, rate]
        widths = [max(len(c), 12) for c in cols]
        out = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
        for row in self.rows:
            cells = [f"{row.h:.6g}", f"{row.dt:.6g}"]
            for name in RATE_COLUMNS:
                cells.append(f"{getattr(row.errors, name):.6e}")
                cells.append("" if row.rates is None else f"{row.rates[name]:.4f}")
            out.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
        return "\n".join(out)


def convergence_study(spec: ProblemSpec, ms: ManufacturedSolution, scheme: str,
                      h: float, dt_list, T: float = 1.0, domain=(1.0, 1.0),
                      solver: linalg.SolverConfig | None = None,
                      picard_tol: float = 1e-10, picard_max: int = 50,
                      csv_path=None) -> ConvergenceTable:
    """Temporal refinement study at fixed mesh size ``h``.

    ``dt_list`` must decrease strictly by factors of two.  Every run advances
    to ``T`` and is measured in all four norms; rates are appended between
    consecutive ladder rows.  Writes the table to ``csv_path`` when given.
    """
    dt_list = [float(dt) for dt in dt_list]
    if not dt_list:
        raise ConfigurationError("empty dt ladder")
    for a, b in zip(dt_list, dt_list[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ConfigurationError(f"dt ladder must halve at each rung, got {a} -> {b}")

    Lx, Ly = domain
    nx = int(round(Lx / h))
    ny = int(round(Ly / h))
    mesh = tag_boundary(build_rect_mesh(nx, ny, Lx, Ly), spec.u)
    ops = TransportOperators(mesh, spec, solver)

    table = ConvergenceTable()
    for dt in dt_list:
        cfg = SchemeConfig(scheme=scheme, dt=dt, picard_tol=picard_tol,
                           picard_max=picard_max)
        snapshots, _ = run_transient(mesh, spec, cfg, T, ops=ops)
        table.add(h, dt, error_norms(snapshots, ms, mesh, ops.geom))
    if csv_path is not None:
        table.to_csv(csv_path)
    return table
