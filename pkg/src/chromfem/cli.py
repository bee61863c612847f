"""Batch front-end: ``chromfem {converge,simulate,compare} --config FILE``.

Configuration is a flat ``key = value`` text format with dotted section keys
(diff-friendly and language neutral), for example::

    domain.Lx = 1.0
    domain.Ly = 1.0
    mesh.nx = 128
    mesh.ny = 128
    physics.omega = 0.5
    physics.rho_s = 1.0
    physics.d11 = 1.0
    physics.d12 = 0.0
    physics.d22 = 1.0
    velocity.preset = constant          # or channel_parabolic
    velocity.ux = 1.0
    velocity.uy = 1.0
    isotherm.type = langmuir            # constant | affine | langmuir
    isotherm.q_max = 1.0
    isotherm.K_eq = 1.0
    scheme = midpoint_extrapolated      # be_lagged | midpoint_*
    dt = 0.125
    dt_ladder = 0.5,0.25,0.125          # converge subcommand only
    T = 1.0
    g = mms                             # mms | constant number
    output.stride = 1

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from chromfem import linalg, output
from chromfem.diagnostics import ledger_row, total_mass_of
from chromfem.fem import ProblemSpec
from chromfem.isotherm import from_config as isotherm_from_config
from chromfem.mesh import build_rect_mesh, dump_mesh_csv, tag_boundary
from chromfem.mms import (ConvergenceTable, ManufacturedSolution,
                          cubic_cosine_solution, error_norms,
                          problem_spec_from_solution)
from chromfem.stepper import (ConfigurationError, SchemeConfig, StepError,
                              TransportOperators, run_transient)

_KNOWN_KEYS = {
    "domain.Lx", "domain.Ly", "mesh.nx", "mesh.ny", "mesh.h",
    "physics.omega", "physics.rho_s", "physics.d11", "physics.d12", "physics.d22",
    "velocity.preset", "velocity.ux", "velocity.uy",
    "isotherm.type", "isotherm.K", "isotherm.K1", "isotherm.K2",
    "isotherm.q_max", "isotherm.K_eq",
    "scheme", "dt", "dt_ladder", "T", "picard.tol", "picard.max",
    "g", "C0", "f", "output.dir", "output.stride",
    "solver.method", "solver.tol", "solver.max_iter", "solver.restart",
    "solver.preconditioner",
}


def parse_config(path) -> dict:
    """Parse flat ``key = value`` configuration; '#' starts a comment."""
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _KNOWN_KEYS:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigurationError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = val
    return values


@dataclass
class RunConfig:
    """Validated run configuration assembled from a config file."""

    Lx: float = 1.0
    Ly: float = 1.0
    nx: int = 0
    ny: int = 0
    omega: float = 0.5
    rho_s: float = 1.0
    D: np.ndarray = field(default_factory=lambda: np.eye(2))
    velocity_preset: str = "constant"
    ux: float = 1.0
    uy: float = 1.0
    isotherm_params: dict = field(default_factory=lambda: {"type": "langmuir"})
    scheme: str = "midpoint_extrapolated"
    dt: float = 0.125
    dt_ladder: list = field(default_factory=list)
    T: float = 1.0
    picard_tol: float = 1e-10
    picard_max: int = 50
    g_mode: str = "mms"      # "mms" or "constant"
    g_value: float = 0.0
    C0_value: float = 0.0
    f_value: float = 0.0
    outdir: str = "out"
    stride: int = 1
    solver: linalg.SolverConfig = field(default_factory=linalg.SolverConfig)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        raw = parse_config(path)
        cfg = cls()
        try:
            cfg._apply(raw)
        except (ValueError, ConfigurationError) as err:
            raise ConfigurationError(f"{path}: {err}") from err
        return cfg

    def _apply(self, raw: dict) -> None:
        get = raw.get
        self.Lx = float(get("domain.Lx", self.Lx))
        self.Ly = float(get("domain.Ly", self.Ly))
        if "mesh.h" in raw:
            if "mesh.nx" in raw or "mesh.ny" in raw:
                raise ConfigurationError("give either mesh.h or mesh.nx/mesh.ny, not both")
            h = float(raw["mesh.h"])
            if not h > 0.0:
                raise ConfigurationError("mesh.h must be positive")
            self.nx = max(1, int(round(self.Lx / h)))
            self.ny = max(1, int(round(self.Ly / h)))
        else:
            self.nx = int(get("mesh.nx", 32))
            self.ny = int(get("mesh.ny", 32))
        self.omega = float(get("physics.omega", self.omega))
        self.rho_s = float(get("physics.rho_s", self.rho_s))
        d11 = float(get("physics.d11", 1.0))
        d12 = float(get("physics.d12", 0.0))
        d22 = float(get("physics.d22", 1.0))
        self.D = np.array([[d11, d12], [d12, d22]])
        self.velocity_preset = get("velocity.preset", self.velocity_preset)
        if self.velocity_preset not in ("constant", "channel_parabolic"):
            raise ConfigurationError(f"unknown velocity preset {self.velocity_preset!r}")
        self.ux = float(get("velocity.ux", self.ux))
        self.uy = float(get("velocity.uy", self.uy))
        iso = {"type": get("isotherm.type", "langmuir")}
        for p in ("K", "K1", "K2", "q_max", "K_eq"):
            key = f"isotherm.{p}"
            if key in raw:
                iso[p] = raw[key]
        self.isotherm_params = iso
        self.scheme = get("scheme", self.scheme)
        self.dt = float(get("dt", self.dt))
        if "dt_ladder" in raw:
            self.dt_ladder = [float(v) for v in raw["dt_ladder"].split(",") if v.strip()]
        self.T = float(get("T", self.T))
        self.picard_tol = float(get("picard.tol", self.picard_tol))
        self.picard_max = int(get("picard.max", self.picard_max))
        gval = get("g", "mms")
        if gval == "mms":
            self.g_mode = "mms"
        else:
            self.g_mode = "constant"
            self.g_value = float(gval)
        self.C0_value = float(get("C0", self.C0_value))
        self.f_value = float(get("f", self.f_value))
        self.outdir = get("output.dir", self.outdir)
        self.stride = int(get("output.stride", self.stride))
        self.solver = linalg.SolverConfig(
            method=get("solver.method", "auto"),
            tol=float(get("solver.tol", 1e-12)),
            max_iter=int(get("solver.max_iter", 2000)),
            restart=int(get("solver.restart", 50)),
            preconditioner=get("solver.preconditioner", "ilu0"),
        )

    def velocity(self):
        if self.velocity_preset == "constant":
            ux, uy = self.ux, self.uy
            return lambda x, y: (np.full_like(np.asarray(x, dtype=float), ux),
                                 np.full_like(np.asarray(y, dtype=float), uy))
        Lx = self.Lx
        return lambda x, y: (np.zeros_like(np.asarray(x, dtype=float)),
                             2.0 * np.asarray(x, dtype=float) * (np.asarray(x, dtype=float) - Lx))

    def manufactured(self) -> ManufacturedSolution | None:
        return cubic_cosine_solution(self.D) if self.g_mode == "mms" else None

    def problem_spec(self) -> ProblemSpec:
        iso = isotherm_from_config(self.isotherm_params)
        u = self.velocity()
        if self.g_mode == "mms":
            return problem_spec_from_solution(self.manufactured(), self.omega,
                                              self.rho_s, u, iso)
        g0, c0, f0 = self.g_value, self.C0_value, self.f_value
        return ProblemSpec(
            omega=self.omega, rho_s=self.rho_s, D=self.D, u=u,
            g=lambda x, y, t: np.full_like(np.asarray(x, dtype=float), g0),
            C0=lambda x, y: np.full_like(np.asarray(x, dtype=float), c0),
            f=lambda x, y, t: np.full_like(np.asarray(x, dtype=float), f0),
            isotherm=iso,
        )

    def build_mesh(self, u):
        return tag_boundary(build_rect_mesh(self.nx, self.ny, self.Lx, self.Ly), u)

    def scheme_config(self, dt=None) -> SchemeConfig:
        return SchemeConfig(scheme=self.scheme, dt=self.dt if dt is None else dt,
                            picard_tol=self.picard_tol, picard_max=self.picard_max)


def cmd_converge(cfg: RunConfig, quiet: bool) -> int:
    if cfg.g_mode != "mms":
        raise ConfigurationError("the converge workflow requires g = mms")
    ladder = cfg.dt_ladder or [cfg.dt]
    spec = cfg.problem_spec()
    h = cfg.Lx / cfg.nx
    outdir = output.ensure_dir(cfg.outdir)
    current = {"dt": ladder[0]}

    # run rung by rung so a failure can name the offending dt
    mesh = cfg.build_mesh(spec.u)
    ops = TransportOperators(mesh, spec, cfg.solver)
    table = ConvergenceTable()
    ms = cfg.manufactured()
    for a, b in zip(ladder, ladder[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ConfigurationError(f"dt_ladder must halve at each rung, got {a} -> {b}")
    try:
        for dt in ladder:
            current["dt"] = dt
            snapshots, _ = run_transient(mesh, spec, cfg.scheme_config(dt), cfg.T, ops=ops)
            table.add(h, dt, error_norms(snapshots, ms, mesh, ops.geom))
    except (linalg.LinearSolverError, StepError) as err:
        print(f"error: run at dt={current['dt']} failed: {err}", file=sys.stderr)
        return 3
    table.to_csv(os.path.join(outdir, "convergence.csv"))
    if not quiet:
        print(table)
    return 0


def cmd_simulate(cfg: RunConfig, quiet: bool) -> int:
    spec = cfg.problem_spec()
    mesh = cfg.build_mesh(spec.u)
    outdir = output.ensure_dir(cfg.outdir)
    dump_mesh_csv(mesh, outdir)
    ledger = output.LedgerWriter(os.path.join(outdir, "mass_ledger.csv"))

    def observe(state, ops):
        ledger.write(ledger_row(mesh, spec, state, ops.geom))
        output.write_vtk(os.path.join(outdir, f"field_{state.step}.vtk"), mesh, state.C)
        output.write_field_csv(os.path.join(outdir, f"field_{state.step}.csv"), mesh, state.C)

    try:
        snapshots, diag = run_transient(mesh, spec, cfg.scheme_config(), cfg.T,
                                        observers=[observe], stride=cfg.stride,
                                        solver=cfg.solver)
    except (linalg.LinearSolverError, StepError) as err:
        ledger.close()
        print(f"error: {err}", file=sys.stderr)
        return 3
    ledger.close()
    if not quiet:
        final = snapshots[-1]
        print(f"advanced {diag.steps} steps to t={final.t!r} "
              f"({diag.solves} linear solves); ledger rows: {ledger.rows}")
    return 0


def cmd_compare(cfg: RunConfig, quiet: bool) -> int:
    spec = cfg.problem_spec()
    mesh = cfg.build_mesh(spec.u)
    outdir = output.ensure_dir(cfg.outdir)
    ops = TransportOperators(mesh, spec, cfg.solver)
    ms = cfg.manufactured()

    masses = {}
    times = None
    try:
        for scheme in ("be_lagged", "midpoint_extrapolated"):
            run_cfg = SchemeConfig(scheme=scheme, dt=cfg.dt, picard_tol=cfg.picard_tol,
                                   picard_max=cfg.picard_max)
            snapshots, _ = run_transient(mesh, spec, run_cfg, cfg.T, ops=ops)
            masses[scheme] = [total_mass_of(mesh, spec, s.C, ops.geom) for s in snapshots]
            times = [s.t for s in snapshots]
    except (linalg.LinearSolverError, StepError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3

    mass_exact = None
    if ms is not None:
        mass_exact = [total_mass_of(mesh, spec, lambda x, y, tt=t: ms.value(x, y, tt), ops.geom)
                      for t in times]
    output.write_mass_compare(os.path.join(outdir, "mass_compare.csv"), times,
                              masses["be_lagged"], masses["midpoint_extrapolated"],
                              mass_exact)
    if not quiet:
        if mass_exact is not None:
            dev_be = masses["be_lagged"][-1] - mass_exact[-1]
            dev_mp = masses["midpoint_extrapolated"][-1] - mass_exact[-1]
            print(f"terminal mass deviation: be_lagged {dev_be!r}, midpoint {dev_mp!r}")
        else:
            gap = masses["be_lagged"][-1] - masses["midpoint_extrapolated"][-1]
            print(f"terminal mass gap (be - midpoint): {gap!r}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chromfem",
        description="Finite-element solver for adsorption transport in membrane chromatography")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("converge", "temporal convergence study against the built-in exact solution"),
                            ("simulate", "transient run with field snapshots and mass ledger"),
                            ("compare", "run BE and midpoint on identical data and compare total mass")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to key = value config file")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--stride", type=int, default=None,
                       help="snapshot/ledger stride in steps (overrides output.stride)")
        p.add_argument("--quiet", action="store_true", help="suppress normal output")
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig.from_file(args.config)
        if args.out is not None:
            cfg.outdir = args.out
        if args.stride is not None:
            cfg.stride = args.stride
        handler = {"converge": cmd_converge, "simulate": cmd_simulate,
                   "compare": cmd_compare}[args.command]
        return handler(cfg, args.quiet)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except (linalg.LinearSolverError, StepError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
