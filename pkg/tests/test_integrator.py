import numpy as np
import pytest

from mhd_rv import assembly as asm
from mhd_rv import fe_space as fs
from mhd_rv import integrator as ti
from mhd_rv import mesh as mesh_mod
from mhd_rv.errors import ConfigurationError


def periodic_wave_solver(n=12, degree=1, stab="rv", amp=0.5):
    L = 2 * np.pi
    msh = mesh_mod.with_periodic(
        mesh_mod.build_structured_mesh([0, 0], [L, L], (n, n)), (0, 1))
    sp = fs.FESpace(msh, degree)
    x, y = sp.dof_coords[:, 0], sp.dof_coords[:, 1]
    rho = 1 + amp * np.sin(x + y)
    U = asm.ConservedField(sp)
    U.data[0] = rho
    U.data[1] = rho
    U.data[2] = rho
    U.data[3] = 2.5 + rho + 0.01
    U.data[4] = 0.1
    U.data[5] = 0.1
    cfg = ti.IntegratorConfig(gamma=1.4, stabilization=stab)
    return ti.TimeIntegrator(U, cfg,
                             ti.BoundaryConditionSet.all_periodic(2))


def constant_solver(n=8):
    msh = mesh_mod.with_periodic(
        mesh_mod.build_structured_mesh([0, 0], [1, 1], (n, n)), (0, 1))
    sp = fs.FESpace(msh, 1)
    U = asm.ConservedField(sp)
    U.data[0] = 1.0
    U.data[1] = 0.3
    U.data[2] = -0.2
    U.data[3] = 3.0
    U.data[4] = 0.5
    U.data[5] = 0.1
    cfg = ti.IntegratorConfig(gamma=1.4)
    return ti.TimeIntegrator(U, cfg,
                             ti.BoundaryConditionSet.all_periodic(2))


# --------------------------------------------------------------------------
# tableau and the generic RK step
# --------------------------------------------------------------------------

def test_tableau_validation():
    rk4 = ti.ButcherTableau.classical_rk4()
    assert rk4.stages == 4
    assert np.allclose(rk4.b, [1 / 6, 1 / 3, 1 / 3, 1 / 6])
    with pytest.raises(ConfigurationError):
        ti.ButcherTableau(a=np.zeros((2, 2)), b=np.array([0.6, 0.6]),
                          c=np.array([0.0, 0.5]))
    with pytest.raises(ConfigurationError):
        ti.ButcherTableau(a=np.array([[0.0, 1.0], [0.0, 0.0]]),
                          b=np.array([0.5, 0.5]), c=np.array([0.0, 1.0]))


def test_rk4_linear_decay_equals_taylor_polynomial():
    y0 = np.array([1.0])
    y1 = ti.runge_kutta_step(y0, 0.1, lambda y: -y,
                             ti.ButcherTableau.classical_rk4())
    expected = 1 - 0.1 + 0.005 - 1 / 6 * 1e-3 + 1 / 24 * 1e-4
    assert y1[0] == pytest.approx(expected, abs=1e-16)
    assert y1[0] == pytest.approx(0.90483750, abs=1e-8)


def test_rk4_fourth_order_convergence():
    tableau = ti.ButcherTableau.classical_rk4()

    def solve(n_steps):
        y = np.array([1.0])
        tau = 1.0 / n_steps
        for _ in range(n_steps):
            y = ti.runge_kutta_step(y, tau, lambda v: -v, tableau)
        return abs(y[0] - np.exp(-1.0))

    e1, e2 = solve(16), solve(32)
    assert e1 / e2 == pytest.approx(16.0, rel=0.1)


def test_identity_rhs_keeps_state():
    y0 = np.array([2.0, -1.0])
    y1 = ti.runge_kutta_step(y0, 0.3, lambda y: 0.0 * y,
                             ti.ButcherTableau.classical_rk4())
    assert np.array_equal(y0, y1)


# --------------------------------------------------------------------------
# CFL step
# --------------------------------------------------------------------------

def test_cfl_timestep_arithmetic():
    h = np.array([0.01, 0.02])
    lam = np.array([2.0, 1.0])
    assert ti.cfl_timestep(h, lam, 0.3) == pytest.approx(0.0015)
    assert ti.cfl_timestep(h, lam, 0.6) == pytest.approx(0.003)


def test_cfl_rejects_static_vacuum():
    with pytest.raises(ConfigurationError):
        ti.cfl_timestep(np.array([0.1]), np.array([0.0]), 0.3)


def test_final_step_clipping():
    solver = constant_solver()
    solver.run_until(0.0123456)
    assert solver.t == pytest.approx(0.0123456, abs=1e-14)


def test_cfl_monotonicity_under_refinement():
    tau = {}
    for n in (8, 16):
        solver = periodic_wave_solver(n, stab="none")
        tau[n] = solver.tau
    assert tau[16] <= tau[8] / 2 * (1 + 1e-12)


# --------------------------------------------------------------------------
# boundary conditions
# --------------------------------------------------------------------------

def test_slip_projection_axis_aligned():
    msh = mesh_mod.build_structured_mesh([0, 0], [1, 1], (4, 4))
    sp = fs.FESpace(msh, 1)
    U = asm.ConservedField(sp)
    U.data[1] = 1.0
    U.data[2] = 1.0
    bcs = ti.BoundaryConditionSet({"top": ti.BoundaryCondition("slip")})
    ti.apply_boundary_conditions(U, bcs, 0.0)
    top = sp.boundary_dofs["top"]
    assert np.allclose(U.m[0][top], 1.0)
    assert np.allclose(U.m[1][top], 0.0)
    interior = np.setdiff1d(np.arange(sp.n_dofs), top)
    assert np.allclose(U.m[1][interior], 1.0)


def test_slip_projection_formula_oblique_normal():
    # m - (m.n) n for n at 45 degrees
    m = np.array([1.0, 0.0])
    n = np.array([np.sqrt(2) / 2, np.sqrt(2) / 2])
    projected = m - (m @ n) * n
    assert np.allclose(projected, [0.5, -0.5])


def test_dirichlet_overwrites_boundary_nodes():
    msh = mesh_mod.build_structured_mesh([0.0], [1.0], 10, dim=1)
    sp = fs.FESpace(msh, 1)
    U = asm.ConservedField(sp)
    U.data[0] = 1.0
    U.data[3] = 2.0

    def right_state(coords, t):
        out = np.zeros((6, len(coords)))
        out[0] = 0.125
        out[3] = 0.88125
        out[4] = 0.75
        out[5] = -1.0
        return out

    bcs = ti.BoundaryConditionSet(
        {"right": ti.BoundaryCondition("dirichlet", right_state)})
    ti.apply_boundary_conditions(U, bcs, 0.0)
    right = sp.boundary_dofs["right"]
    assert np.allclose(U.rho[right], 0.125)
    assert np.allclose(U.B[1][right], -1.0)
    assert U.rho[0] == 1.0


def test_periodic_requires_pairs():
    with pytest.raises(ConfigurationError):
        ti.BoundaryConditionSet(
            {"left": ti.BoundaryCondition("periodic"),
             "right": ti.BoundaryCondition("neumann")})


def test_dirichlet_needs_data():
    with pytest.raises(ConfigurationError):
        ti.BoundaryCondition("dirichlet")


# --------------------------------------------------------------------------
# advance loop
# --------------------------------------------------------------------------

def test_constant_state_unchanged_and_muh_zero_after_startup():
    solver = constant_solver()
    base = solver.U.data.copy()
    modes = []
    for _ in range(4):
        row = solver.advance()
        modes.append(row.visc_mode)
        assert row.visc_evaluations == 1
    drift = np.abs(solver.U.data - base).max()
    assert drift <= 1e-13 * np.abs(base).max()
    assert solver._last_visc.mu_high.max() <= 1e-12
    assert modes == ["galerkin-init", "bdf1", "bdf2", "bdf2"]


def test_startup_protocol_trace():
    solver = periodic_wave_solver(10)
    rows = [solver.advance() for _ in range(3)]
    assert [r.visc_mode for r in rows] == ["galerkin-init", "bdf1", "bdf2"]
    # the startup step is shortened
    assert rows[0].tau < rows[1].tau / 5


def test_single_advance_bounded_by_floor():
    solver = periodic_wave_solver(10)
    solver.advance()
    row = solver.advance()
    visc = solver._last_visc
    assert np.all(visc.mu <= visc.mu_low * (1 + 1e-14))
    assert row.max_mu <= visc.mu_low.max()


def test_determinism_bitwise():
    def trajectory():
        solver = periodic_wave_solver(8)
        for _ in range(5):
            solver.advance()
        return solver.U.data.copy()

    a = trajectory()
    b = trajectory()
    assert np.array_equal(a, b)


def test_mass_conservation_drift():
    solver = periodic_wave_solver(10)
    lumped = asm.assemble_mass(solver.space, lumped=True).diag
    total0 = float(lumped @ solver.U.rho)
    solver.run_until(0.05)
    total1 = float(lumped @ solver.U.rho)
    assert abs(total1 - total0) <= 1e-11 * abs(total0)


def test_positivity_abort_reports_stage():
    from mhd_rv.errors import PositivityError

    solver = periodic_wave_solver(8, amp=0.999999)
    solver.U.data[3] *= 0.0  # wreck the energy so a stage faults
    solver.U.data[3] += 0.01 + 0.5 * (
        solver.U.m[0] ** 2 + solver.U.m[1] ** 2) / solver.U.rho \
        + 0.5 * (solver.U.B[0] ** 2 + solver.U.B[1] ** 2)
    with pytest.raises(PositivityError) as err:
        for _ in range(60):
            solver.advance()
    assert err.value.stage is not None
