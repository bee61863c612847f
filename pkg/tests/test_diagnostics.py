import numpy as np
import pytest

from chromfem.diagnostics import ledger_row, positivity_check, total_mass_of
from chromfem.fem import ProblemSpec
from chromfem.isotherm import Affine, Constant, Langmuir
from chromfem.mesh import build_rect_mesh, tag_boundary
from chromfem.stepper import (SchemeConfig, SimState, TransportOperators,
                              run_transient)

from conftest import const_velocity


def make_spec(isotherm, u=None, g=None):
    z = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    return ProblemSpec(omega=0.5, rho_s=1.0, D=np.eye(2),
                       u=u or const_velocity(1.0, 1.0),
                       g=g or (lambda x, y, t: z(x, y)),
                       C0=z, f=lambda x, y, t: z(x, y), isotherm=isotherm)


def state_of(mesh, values):
    return SimState(t=0.0, step=0, C=np.broadcast_to(values, (mesh.num_nodes,)).astype(float))


def test_total_mass_constant_isotherm(unit_mesh_8):
    # 0.5 * 1 + 0.5 * 1 * 2 over the unit square
    spec = make_spec(Constant(2.0))
    row = ledger_row(unit_mesh_8, spec, state_of(unit_mesh_8, 1.0))
    assert row.total_mass == pytest.approx(1.5, abs=1e-12)


def test_zero_state_ledger(unit_mesh_8):
    g_one = lambda x, y, t: np.ones_like(np.asarray(x, dtype=float))
    spec = make_spec(Langmuir(1.0, 1.0), g=g_one)
    row = ledger_row(unit_mesh_8, spec, state_of(unit_mesh_8, 0.0))
    assert row.total_mass == 0.0
    assert row.outflow_flux == 0.0
    assert row.outflow_Q_flux == 0.0
    assert row.dissipation == 0.0
    assert row.min_nodal == 0.0
    # inflow terms survive with g != 0: integral of g^2 (u.n) over both
    # inflow sides of the unit square equals -2 for u = (1, 1)
    assert row.inflow_flux == pytest.approx(-2.0, abs=1e-12)
    assert row.inflow_Q_flux == pytest.approx(-2.0 * (1.0 - np.log(2.0)), abs=1e-12)


def test_total_mass_langmuir_quadrature_oracle(unit_mesh_8):
    spec = make_spec(Langmuir(1.0, 1.0))
    row = ledger_row(unit_mesh_8, spec, state_of(unit_mesh_8, 1.0))
    assert row.total_mass == pytest.approx(0.75, abs=1e-12)

    # nonuniform field against a midpoint-rule oracle on a fine grid
    u_field = unit_mesh_8.nodes[:, 0] + 0.25
    row = ledger_row(unit_mesh_8, spec, state_of(unit_mesh_8, u_field))
    xs = np.linspace(0.0, 1.0, 4001)
    xm = 0.5 * (xs[:-1] + xs[1:])
    c = xm + 0.25
    oracle = np.mean(0.5 * c + 0.5 * c / (1.0 + c))
    assert row.total_mass == pytest.approx(oracle, abs=1e-7)


def test_constant_state_mass_formula(unit_mesh_8):
    # stored mass of the zero state for Constant{K} is (1-omega) rho_s K |domain|
    spec = make_spec(Constant(3.0))
    row = ledger_row(unit_mesh_8, spec, state_of(unit_mesh_8, 0.0))
    assert row.total_mass == pytest.approx(0.5 * 3.0, abs=1e-12)


def test_flux_signs_on_running_state(unit_mesh_16, mms_langmuir_spec):
    _, spec = mms_langmuir_spec
    snaps, _ = run_transient(unit_mesh_16, spec, SchemeConfig("midpoint_extrapolated", dt=0.25), 1.0)
    row = ledger_row(unit_mesh_16, spec, snaps[-1])
    assert row.dissipation >= 0.0
    assert row.outflow_flux >= 0.0
    assert row.inflow_flux <= 0.0


def test_positivity_report():
    mesh = build_rect_mesh(2, 2, 1.0, 1.0)
    ok = positivity_check(state_of(mesh, 1.0))
    assert ok.violations == 0 and ok.min_value == 1.0
    values = np.ones(mesh.num_nodes)
    values[3] = -0.1
    report = positivity_check(SimState(t=0.0, step=0, C=values))
    assert report.violations == 1
    assert report.min_value == pytest.approx(-0.1)


def test_positivity_never_mutates(unit_mesh_8):
    values = np.linspace(-1.0, 1.0, unit_mesh_8.num_nodes)
    state = SimState(t=0.0, step=0, C=values.copy())
    positivity_check(state)
    assert np.array_equal(state.C, values)


def test_midpoint_balance_self_consistency(unit_mesh_8, diag_velocity):
    """Affine isotherm, f = 0, g = 0: per step the midpoint trajectory obeys
    w_bar/2 (||C1||^2 - ||C0||^2) + dt/2 outflow(Cmid) + dt (D grad Cmid, grad Cmid) = 0
    with every term computed from the same quadrature as the operators."""
    spec = make_spec(Affine(0.0, 1.0), u=diag_velocity)
    rng = np.random.default_rng(7)
    C0 = rng.uniform(0.0, 1.0, unit_mesh_8.num_nodes)
    spec.C0 = lambda x, y: C0
    w_bar = 0.5 + 0.5 * 1.0
    ops = TransportOperators(unit_mesh_8, spec)
    snaps, _ = run_transient(unit_mesh_8, spec, SchemeConfig("midpoint_extrapolated", dt=0.05),
                             0.5, ops=ops)
    A = ops.stiffness
    for prev, cur in zip(snaps, snaps[1:]):
        cmid = 0.5 * (prev.C + cur.C)
        mid_state = SimState(t=0.5 * (prev.t + cur.t), step=cur.step, C=cmid)
        row = ledger_row(unit_mesh_8, spec, mid_state, ops.geom)
        dt = cur.t - prev.t
        balance = (0.5 * w_bar * (ops.l2_norm(cur.C) ** 2 - ops.l2_norm(prev.C) ** 2)
                   + 0.5 * dt * row.outflow_flux
                   + dt * (cmid @ (A @ cmid)))
        assert abs(balance) <= 1e-10
        # ledger dissipation agrees with the assembled bilinear form (D = I)
        assert row.dissipation == pytest.approx(cmid @ (A @ cmid), abs=1e-12)


def test_midpoint_mass_deviation_second_order(mms_langmuir_spec):
    # halving dt shrinks the midpoint terminal-mass deviation roughly 4x
    ms, spec = mms_langmuir_spec
    mesh = tag_boundary(build_rect_mesh(64, 64, 1.0, 1.0), spec.u)
    ops = TransportOperators(mesh, spec)
    exact = total_mass_of(mesh, spec, lambda x, y: ms.value(x, y, 1.0), ops.geom)
    devs = []
    for dt in (1 / 8, 1 / 16):
        snaps, _ = run_transient(mesh, spec, SchemeConfig("midpoint_extrapolated", dt=dt),
                                 1.0, ops=ops)
        devs.append(abs(total_mass_of(mesh, spec, snaps[-1].C, ops.geom) - exact))
    assert 3.0 <= devs[0] / devs[1] <= 5.0


def test_total_mass_of_callable_matches_field(unit_mesh_16, mms_langmuir_spec):
    ms, spec = mms_langmuir_spec
    nodal = ms.value(unit_mesh_16.nodes[:, 0], unit_mesh_16.nodes[:, 1], 1.0)
    m_field = total_mass_of(unit_mesh_16, spec, nodal)
    m_callable = total_mass_of(unit_mesh_16, spec, lambda x, y: ms.value(x, y, 1.0))
    # interpolation gap only
    assert m_field == pytest.approx(m_callable, abs=1e-4)
