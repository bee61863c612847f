"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see every line.  The
criteria pin their tolerances here; nothing is deferred to calibration.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from chromfem import linalg
from chromfem.cli import main
from chromfem.diagnostics import total_mass_of
from chromfem.fem import ProblemSpec, assemble_boundary_mass, assemble_convection
from chromfem.isotherm import Affine, Constant, Langmuir
from chromfem.mesh import build_rect_mesh, tag_boundary
from chromfem.mms import (ManufacturedSolution, convergence_study,
                          cubic_cosine_solution, problem_spec_from_solution)
from chromfem.stepper import (SchemeConfig, TransportOperators, run_transient)

from conftest import const_velocity

NORMS = ("linf_l2", "l2_l2", "l2_h1semi", "l2_h1")


def report(num, name, ok, detail=""):
    print(f"\nACCEPTANCE {num} ({name}): {'PASS' if ok else 'FAIL'}"
          + (f" - {detail}" if detail else ""))
    return ok


@pytest.fixture(scope="module")
def study_spec():
    ms = cubic_cosine_solution()
    spec = problem_spec_from_solution(ms, omega=0.5, rho_s=1.0,
                                      u=const_velocity(1.0, 1.0),
                                      isotherm=Langmuir(1.0, 1.0))
    return ms, spec


@pytest.fixture(scope="module")
def table2_midpoint(study_spec):
    ms, spec = study_spec
    return convergence_study(spec, ms, "midpoint_extrapolated", h=1 / 128,
                             dt_list=[1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32], T=1.0)


@pytest.fixture(scope="module")
def table1_be(study_spec):
    ms, spec = study_spec
    return convergence_study(spec, ms, "be_lagged", h=1 / 128,
                             dt_list=[1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32], T=1.0)


def test_criterion_1_midpoint_table(table2_midpoint):
    table = table2_midpoint
    failures = []
    for name in NORMS:
        rates = table.rates_for(name)[-3:]  # three finest refinements
        for r in rates:
            if not (1.85 <= r <= 2.15):
                failures.append(f"{name} rate {r:.4f} outside [1.85, 2.15]")
    finest = table.rows[-1].errors.linf_l2
    target = 0.000153313
    if not (target / 2.0 <= finest <= 2.0 * target):
        failures.append(f"linf_l2 {finest:.6e} not within 2x of {target}")
    ok = not failures
    detail = "; ".join(failures) if failures else \
        f"linf_l2(dt=1/32)={finest:.3e}, rates within [1.85, 2.15]"
    report(1, "midpoint temporal order 2, Langmuir", ok, detail)
    print(table)
    assert ok, detail


def test_criterion_2_be_table(table1_be):
    table = table1_be
    failures = []
    for name in NORMS:
        rates = table.rates_for(name)
        for r in rates:
            if not (0.70 <= r <= 1.05):
                failures.append(f"{name} rate {r:.4f} outside [0.70, 1.05]")
        for a, b in zip(rates, rates[1:]):
            if b < a:
                failures.append(f"{name} rates not nondecreasing: {a:.4f} -> {b:.4f}")
    finest = table.rows[-1].errors.linf_l2
    target = 0.00558454
    if not (target / 2.0 <= finest <= 2.0 * target):
        failures.append(f"linf_l2 {finest:.6e} not within 2x of {target}")
    ok = not failures
    detail = "; ".join(failures) if failures else f"linf_l2(dt=1/32)={finest:.3e}"
    report(2, "backward Euler temporal order 1, Langmuir", ok, detail)
    print(table)
    assert ok, detail


def test_criterion_3_mass_comparison(study_spec):
    ms, spec = study_spec
    mesh = tag_boundary(build_rect_mesh(128, 128, 1.0, 1.0), spec.u)
    ops = TransportOperators(mesh, spec)
    mass_exact = total_mass_of(mesh, spec, lambda x, y: ms.value(x, y, 1.0), ops.geom)
    masses = {}
    for scheme in ("be_lagged", "midpoint_extrapolated"):
        snaps, _ = run_transient(mesh, spec, SchemeConfig(scheme, dt=1 / 8), 1.0, ops=ops)
        masses[scheme] = total_mass_of(mesh, spec, snaps[-1].C, ops.geom)
    dev_be = masses["be_lagged"] - mass_exact
    dev_mp = masses["midpoint_extrapolated"] - mass_exact
    checks = {
        "BE overestimates": dev_be > 0.0,
        "midpoint deviation <= 0.25 BE deviation": abs(dev_mp) <= 0.25 * abs(dev_be),
    }
    ok = all(checks.values())
    detail = (f"dev_be={dev_be:+.3e}, dev_mp={dev_mp:+.3e}; "
              + "; ".join(f"{k}: {v}" for k, v in checks.items()))
    report(3, "total-mass comparison at (h, dt) = (1/128, 1/8)", ok, detail)
    assert ok, detail


def test_criterion_4_integrator_exactness():
    def shape(x):
        return np.ones_like(np.asarray(x, dtype=float))
    ms = ManufacturedSolution(
        value=lambda x, y, t: t * (1.0 + x + y),
        d_t=lambda x, y, t: (1.0 + x + y) * shape(x),
        gradient=lambda x, y, t: (t * shape(x), t * shape(x)),
        divDgrad=lambda x, y, t: np.zeros(np.broadcast(x, y, t).shape),
        D=np.eye(2),
    )
    u = const_velocity(1.0, 1.0)
    spec = problem_spec_from_solution(ms, omega=0.5, rho_s=1.0, u=u,
                                      isotherm=Constant(0.0))
    mesh = tag_boundary(build_rect_mesh(8, 8, 1.0, 1.0), u)
    worst = 0.0
    for scheme in ("midpoint_extrapolated", "midpoint_picard", "be_lagged"):
        for dt in (1 / 2, 1 / 4):
            snaps, _ = run_transient(mesh, spec, SchemeConfig(scheme, dt=dt), 1.0)
            for s in snaps:
                exact = ms.value(mesh.nodes[:, 0], mesh.nodes[:, 1], s.t)
                worst = max(worst, float(np.abs(s.C - exact).max()))
    ok = worst <= 1e-8
    report(4, "exact integration of linear-in-time solution", ok,
           f"max nodal error {worst:.3e} (tol 1e-8)")
    assert ok


def test_criterion_5_energy_decay():
    u = const_velocity(1.0, 1.0)
    z = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    rng = np.random.default_rng(20240501)
    mesh = tag_boundary(build_rect_mesh(16, 16, 1.0, 1.0), u)
    C0 = rng.uniform(0.0, 1.0, mesh.num_nodes)
    spec = ProblemSpec(omega=0.5, rho_s=1.0, D=np.eye(2), u=u,
                       g=lambda x, y, t: z(x, y), C0=lambda x, y: C0,
                       f=lambda x, y, t: z(x, y), isotherm=Affine(0.0, 1.0))
    ops = TransportOperators(mesh, spec)
    snaps, diag = run_transient(mesh, spec, SchemeConfig("midpoint_extrapolated", dt=0.02),
                                1.0, ops=ops)
    assert diag.steps == 50
    norms = [ops.l2_norm(s.C) for s in snaps]
    worst = max((b - a) for a, b in zip(norms, norms[1:]))
    ok = worst <= 1e-12
    report(5, "unconditional L2 decay, affine law, zero data", ok,
           f"max norm increase {worst:.3e} over 50 steps (tol 1e-12)")
    assert ok


def test_criterion_6_green_identity():
    u = const_velocity(1.0, 1.0)
    worst = 0.0
    for n in (4, 16):
        mesh = tag_boundary(build_rect_mesh(n, n, 1.0, 1.0), u)
        N = assemble_convection(mesh, u)
        B = assemble_boundary_mass(mesh, lambda x, y, nx, ny: nx + ny)
        worst = max(worst, float(np.abs((N + N.T - B).toarray()).max()))
    ok = worst <= 1e-12
    report(6, "discrete Green identity N + N^T = B(u.n)", ok,
           f"max entry defect {worst:.3e} (tol 1e-12)")
    assert ok


def test_criterion_7_isotherm_calculus():
    iso = Langmuir(1.0, 1.0)
    cs = np.linspace(0.0, 10.0, 101)
    eps = 1e-5
    rel = lambda a, b: np.abs(a - b) / np.maximum(1.0, np.abs(b))
    s = iso.sample(cs)
    worst = 0.0
    worst = max(worst, rel((iso.sample(cs + eps).q - iso.sample(cs - eps).q) / (2 * eps), s.dq).max())
    worst = max(worst, rel((iso.sample(cs + eps).dq - iso.sample(cs - eps).dq) / (2 * eps), s.d2q).max())
    worst = max(worst, rel((iso.sample(cs + eps).Q - iso.sample(cs - eps).Q) / (2 * eps), s.q).max())
    for c in (0.5, 2.0, 10.0):
        Q_ref, _ = quad(lambda t: float(iso.sample(t).q), 0.0, c, epsabs=1e-13)
        A_ref, _ = quad(lambda t: t * float(iso.sample(t).dq), 0.0, c, epsabs=1e-13)
        worst = max(worst, abs(float(iso.sample(c).Q) - Q_ref) / max(1.0, abs(Q_ref)))
        worst = max(worst, abs(float(iso.sample(c).A) - A_ref) / max(1.0, abs(A_ref)))
    a1_defect = abs(float(iso.sample(1.0).A) - (math.log(2.0) - 0.5))
    ok = worst <= 1e-6 and a1_defect <= 1e-12
    report(7, "Langmuir calculus vs finite differences and quadrature", ok,
           f"max relative defect {worst:.3e} (tol 1e-6); |A(1) - (ln 2 - 1/2)| = {a1_defect:.3e}")
    assert ok


def test_criterion_8_picard_vs_extrapolated(study_spec):
    ms, spec = study_spec
    mesh = tag_boundary(build_rect_mesh(32, 32, 1.0, 1.0), spec.u)
    ops = TransportOperators(mesh, spec)
    gaps = []
    for dt in (1 / 4, 1 / 8, 1 / 16):
        se, _ = run_transient(mesh, spec, SchemeConfig("midpoint_extrapolated", dt=dt), 1.0, ops=ops)
        sp_, _ = run_transient(mesh, spec, SchemeConfig("midpoint_picard", dt=dt), 1.0, ops=ops)
        gaps.append(max(ops.l2_norm(a.C - b.C) for a, b in zip(se, sp_)))
    ratios = [gaps[i] / gaps[i + 1] for i in range(2)]
    ok = all(r >= 3.5 for r in ratios)
    report(8, "Picard-extrapolated trajectory gap is O(dt^2)", ok,
           "gaps " + ", ".join(f"{g:.3e}" for g in gaps)
           + "; ratios " + ", ".join(f"{r:.2f}" for r in ratios) + " (need >= 3.5)")
    assert ok


def test_criterion_9_linear_solver_oracle():
    rng = np.random.default_rng(123456)
    cfg = linalg.SolverConfig(method="gmres", preconditioner="ilu0")
    worst = 0.0
    for _ in range(100):
        A = rng.uniform(-1.0, 1.0, (50, 50))
        A[np.diag_indices(50)] = np.abs(A).sum(axis=1) + 1.0
        b = rng.uniform(-1.0, 1.0, 50)
        expected = np.linalg.solve(A, b)  # dense elimination oracle
        x = linalg.solve(linalg.csr_from_triplets(50, tuple(
            np.broadcast_arrays(*np.meshgrid(np.arange(50), np.arange(50), indexing="ij"), A)
            [i].ravel() for i in range(3))), b, cfg)
        worst = max(worst, np.linalg.norm(x - expected) / np.linalg.norm(expected))
    ok = worst <= 1e-9
    report(9, "GMRES+ILU(0) vs dense elimination on 100 random systems", ok,
           f"worst relative error {worst:.3e} (tol 1e-9)")
    assert ok


def test_criterion_10_breakthrough_run(tmp_path):
    cfg_text = """
domain.Lx = 2.0
domain.Ly = 10.0
mesh.h = 0.03125
physics.omega = 0.5
physics.rho_s = 1.0
velocity.preset = channel_parabolic
isotherm.type = langmuir
isotherm.q_max = 1.0
isotherm.K_eq = 1.0
scheme = midpoint_extrapolated
dt = 0.03125
T = 3.0
g = 1.0
C0 = 0.0
f = 0.0
"""
    cfg = tmp_path / "profile.cfg"
    cfg.write_text(cfg_text)
    out = tmp_path / "out"
    stride = 4
    code = main(["simulate", "--config", str(cfg), "--out", str(out),
                 "--stride", str(stride), "--quiet"])
    steps = 96
    ledger_lines = (out / "mass_ledger.csv").read_text().strip().splitlines()
    rows = len(ledger_lines) - 1
    expected_rows = steps // stride + 1

    # outflow (y = 0) mean concentration from the emitted snapshots
    means = []
    for step in range(0, steps + 1, stride):
        data = np.loadtxt(out / f"field_{step}.csv", delimiter=",", skiprows=1)
        outflow = data[data[:, 1] == 0.0]
        means.append(outflow[:, 2].mean())
    increments = np.diff(means)
    monotone = bool(np.all(increments >= -1e-10))

    checks = {
        "exit 0": code == 0,
        f"ledger rows {rows} == steps/stride + 1 = {expected_rows}": rows == expected_rows,
        "outflow mean nondecreasing": monotone,
    }
    ok = all(checks.values())
    detail = ("; ".join(k for k, v in checks.items() if not v) if not ok
              else f"final outflow mean {means[-1]:.4f}, rows {rows}")
    report(10, "scaled breakthrough run, channel velocity", ok, detail)
    assert ok, detail
