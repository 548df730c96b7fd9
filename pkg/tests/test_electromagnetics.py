import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mphs.electromagnetics import (
    EmGrid1D,
    EmGrid2D,
    EmMaterial,
    Phasor,
    assemble_maxwell_ph,
    discrete_divergence,
    eddy_harmonic_solve,
    eddy_steady_solve,
    eddy_transient_rhs,
    maxwell_rhs_periodic3d,
    poynting_boundary_flow,
    solve_potential,
    total_current,
)
from mphs.errors import (
    ConfigError,
    EmptyRegion,
    PeriodicBoundary,
    SingularSystem,
    UnsupportedBoundary,
    ZeroConductivity,
)
from mphs.grid import PeriodicGrid3D
from mphs.ph import check_structure, simulate


def standing_wave(grid, system):
    x0 = np.zeros(system.n_state)
    x0[: grid.n_E] = np.sin(math.pi * grid.node_x() / grid.length)
    return x0


def test_material_validation():
    with pytest.raises(ValueError):
        EmMaterial(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        EmMaterial(1.0, 1.0, -1.0)


def test_grid_validation():
    with pytest.raises(ConfigError):
        EmGrid1D(1.0, 1)
    with pytest.raises(UnsupportedBoundary):
        EmGrid1D(1.0, 8, "periodic", "pec")
    with pytest.raises(UnsupportedBoundary):
        EmGrid2D(1.0, 1.0, 4, 4, boundary="dirichlet")


def test_phasor():
    p = Phasor(2.0, 3.0, 0.5)
    assert p(0.7) == pytest.approx(2.0 * math.sin(3.0 * 0.7 + 0.5))
    assert p.complex == pytest.approx(2.0 * complex(math.cos(0.5), math.sin(0.5)))
    with pytest.raises(ValueError):
        Phasor(1.0, -1.0, 0.0)


def test_conservative_1d():
    grid = EmGrid1D(1.0, 64)
    s = assemble_maxwell_ph(grid, EmMaterial(1.0, 1.0, 0.0))
    _, trace = simulate(s, standing_wave(grid, s), None, 10.0, 0.01)
    H = trace.hamiltonian
    assert len(H) == 1001
    assert np.max(np.abs(H - H[0])) / H[0] <= 1e-10


def test_lossy_1d_residual_matches_ohmic_loss():
    grid = EmGrid1D(1.0, 32)
    s = assemble_maxwell_ph(grid, EmMaterial(1.0, 1.0, 0.3))
    x0 = standing_wave(grid, s)
    traj, trace = simulate(s, x0, None, 2.0, 0.01)
    H = trace.hamiltonian
    assert np.all(np.diff(H) < 0)
    eps_h = np.full(grid.n_E, grid.h)
    for k in (1, 50, 200):
        Em = 0.5 * (traj[k - 1][: grid.n_E] + traj[k][: grid.n_E])
        ohmic = 0.3 * float(np.sum(Em**2 * eps_h))
        assert H[k] - H[k - 1] == pytest.approx(-0.01 * ohmic, abs=1e-10 * H[0])


def test_structure_1d_and_2d(rng):
    cases = [
        (EmGrid1D(1.0, 12), EmMaterial(rng.random(12) + 0.5, rng.random(12) + 0.5, rng.random(12))),
        (EmGrid1D(1.0, 12, "periodic", "periodic"), EmMaterial(1.0, 2.0, 0.1)),
        (EmGrid2D(1.0, 2.0, 5, 4, "pec", "TE"), EmMaterial(1.0, 1.0, 0.2)),
        (EmGrid2D(1.0, 2.0, 5, 4, "periodic", "TM"), EmMaterial(2.0, 1.0, 0.0)),
    ]
    for grid, mat in cases:
        s = assemble_maxwell_ph(grid, mat)
        J = s.J.toarray()
        for _ in range(100):
            e = rng.standard_normal(s.n_state)
            assert abs(e @ J @ e) <= 1e-12 * (e @ e)
        rep = check_structure(s, [rng.standard_normal(s.n_state)])
        assert rep["psd_min_eig"] >= 0


def test_2d_requires_uniform_material():
    with pytest.raises(ConfigError):
        assemble_maxwell_ph(EmGrid2D(1.0, 1.0, 4, 4), EmMaterial(np.ones((4, 4)), 1.0, 0.0))


@pytest.mark.parametrize("boundary", ["periodic", "pec"])
def test_tm_divergence_of_b_invariant(boundary, rng):
    grid = EmGrid2D(1.0, 1.0, 8, 6, boundary, "TM")
    s = assemble_maxwell_ph(grid, EmMaterial(1.0, 1.0, 0.1))
    traj, trace = simulate(s, rng.standard_normal(s.n_state), None, 0.5, 0.01)
    d = [discrete_divergence(grid, x, "B") for x in traj]
    steps = np.max(np.abs(np.diff(d, axis=0)), axis=1)
    assert np.max(steps) <= 1e-12
    assert trace.max_abs_residual <= 1e-10 * trace.hamiltonian[0]


def test_te_divergence_of_e_invariant_without_conduction(rng):
    grid = EmGrid2D(1.0, 1.0, 6, 7, "periodic", "TE")
    s = assemble_maxwell_ph(grid, EmMaterial(1.0, 1.0, 0.0))
    traj, _ = simulate(s, rng.standard_normal(s.n_state), None, 0.3, 0.01)
    d = np.array([discrete_divergence(grid, x, "E") for x in traj])
    assert np.max(np.abs(d - d[0])) <= 1e-12
    # the 2D TE magnetic field has a single out-of-plane component, so div B vanishes identically
    assert not np.any(discrete_divergence(grid, traj[-1], "B"))


def test_poynting_pec_zero(rng):
    grid = EmGrid1D(1.0, 10)
    s = assemble_maxwell_ph(grid, EmMaterial(1.0, 1.0, 0.0))
    flow = poynting_boundary_flow(rng.standard_normal(s.n_state), grid, EmMaterial(1.0, 1.0, 0.0))
    assert flow.power == 0.0 and not flow.periodic


def test_poynting_periodic_flag():
    grid = EmGrid1D(1.0, 10, "periodic", "periodic")
    mat = EmMaterial(1.0, 1.0, 0.0)
    x = np.ones(assemble_maxwell_ph(grid, mat).n_state)
    assert poynting_boundary_flow(x, grid, mat) == (0.0, True)
    with pytest.raises(PeriodicBoundary):
        poynting_boundary_flow(x, grid, mat, strict=True)


def test_poynting_hand_evaluation():
    grid = EmGrid1D(1.0, 4, "dirichlet", "dirichlet")
    mat = EmMaterial(1.0, 2.0, 0.0)
    x = np.zeros(assemble_maxwell_ph(grid, mat).n_state)
    (EL, BL), (ER, BR) = (0.7, -1.1), (0.3, 0.4)
    expected = 0.0
    for E, B, nu in ((EL, BL, -1.0), (ER, BR, 1.0)):
        Ev = np.array([0.0, E, 0.0])
        Bv = np.array([0.0, 0.0, B])
        expected += np.cross(Bv, Ev) @ np.array([nu, 0.0, 0.0]) / 2.0
    got = poynting_boundary_flow(x, grid, mat, ((EL, BL), (ER, BR)))
    assert got.power == pytest.approx(expected, abs=1e-15)


def test_dirichlet_supply_equals_poynting_inflow():
    grid = EmGrid1D(1.0, 16, "dirichlet", "pec")
    mat = EmMaterial(1.0, 1.0, 0.0)
    s = assemble_maxwell_ph(grid, mat)
    drive = Phasor(1.0, 2 * math.pi, 0.0)
    traj, trace = simulate(s, np.zeros(s.n_state), lambda t: np.array([drive(t)]), 1.0, 0.01)
    assert trace.max_abs_residual <= 1e-12
    k = 37
    xm = 0.5 * (traj[k - 1] + traj[k])
    flow = poynting_boundary_flow(xm, grid, mat, (drive(trace.times[k - 1] + 0.005), 0.0))
    assert flow.power == pytest.approx(trace.supplied_power[k], rel=1e-12, abs=1e-14)


def test_potential_1d_closed_form():
    for eps in (1.0, 2.5):
        sol = solve_potential(EmGrid1D(1.0, 16), EmMaterial(eps, 1.0, 0.5), 3.0, {"left": 0.0, "right": 0.0})
        x = np.linspace(0, 1, 17)
        assert np.max(np.abs(sol.Phi - 3.0 * x * (1 - x) / (2 * eps))) < 1e-12
        assert sol.Phi[8] == pytest.approx(3.0 / (8 * eps), abs=1e-12)
        assert np.allclose(sol.J, 0.5 * sol.E)
        assert np.allclose(sol.D, eps * sol.E)


def test_potential_constant_solution():
    grid = EmGrid2D(1.0, 1.0, 6, 5)
    sol = solve_potential(grid, EmMaterial(1.0, 1.0, 0.0), 0.0,
                          {f: 2.5 for f in ("left", "right", "bottom", "top")})
    assert np.allclose(sol.Phi, 2.5, atol=1e-13)
    assert np.max(np.abs(sol.E)) < 1e-12


def dense_poisson_2d(nx, ny, lx, ly, eps, rho, dirichlet_faces, values):
    """Plain 5-point stencil with mirror ghosts on insulated faces."""
    hx, hy = lx / nx, ly / ny
    mx, my = nx + 1, ny + 1
    N = mx * my
    A = np.zeros((N, N))
    b = np.zeros(N)
    for i in range(mx):
        for j in range(my):
            k = i * my + j
            face = ("left" if i == 0 else "right" if i == nx else None,
                    "bottom" if j == 0 else "top" if j == ny else None)
            fixed = [f for f in face if f in dirichlet_faces]
            if fixed:
                A[k, k] = 1.0
                b[k] = values[fixed[0]]
                continue
            for di, dj, h in ((1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)):
                ii, jj = i + di, j + dj
                if ii < 0 or ii > nx:
                    ii = i - di
                if jj < 0 or jj > ny:
                    jj = j - dj
                A[k, k] -= eps / h**2
                A[k, ii * my + jj] += eps / h**2
            b[k] = -rho[i, j]
    return np.linalg.solve(A, b).reshape(mx, my)


def test_potential_2d_dense_oracle(rng):
    rho = rng.standard_normal((9, 9))
    vals = {"left": 1.0, "right": -0.5, "bottom": 0.0, "top": 0.0}
    sol = solve_potential(EmGrid2D(1.0, 1.0, 8, 8), EmMaterial(1.5, 1.0, 0.0), rho, vals)
    ref = dense_poisson_2d(8, 8, 1.0, 1.0, 1.5, rho, set(vals), vals)
    # corner nodes are shared by two Dirichlet faces; compare away from them
    assert np.max(np.abs(sol.Phi[1:-1, :] - ref[1:-1, :])) < 1e-10
    vals2 = {"left": 1.0, "right": 0.0}
    sol2 = solve_potential(EmGrid2D(1.0, 2.0, 8, 8), EmMaterial(1.5, 1.0, 0.0), rho, vals2)
    ref2 = dense_poisson_2d(8, 8, 1.0, 2.0, 1.5, rho, set(vals2), vals2)
    assert np.max(np.abs(sol2.Phi - ref2)) < 1e-10


def test_potential_needs_dirichlet():
    with pytest.raises(SingularSystem):
        solve_potential(EmGrid1D(1.0, 8), EmMaterial(1.0, 1.0, 0.0), 1.0, {})


def test_potential_second_order():
    errs = []
    for n in (16, 32):
        sol = solve_potential(EmGrid1D(1.0, n), EmMaterial(1.0, 1.0, 0.0),
                              np.sin(math.pi * np.linspace(0, 1, n + 1)), {"left": 0.0, "right": 0.0})
        x = np.linspace(0, 1, n + 1)
        errs.append(np.max(np.abs(sol.Phi - np.sin(math.pi * x) / math.pi**2)))
    assert 3.0 <= errs[0] / errs[1] <= 5.0


def eigen_mode(n):
    x = np.linspace(0, 1, n + 1)
    return np.outer(np.sin(math.pi * x), np.sin(math.pi * x))


def test_eddy_eigenfunction_second_order():
    errs = []
    for n in (16, 32):
        grid = EmGrid2D(1.0, 1.0, n, n)
        A = eigen_mode(n)
        d = eddy_transient_rhs(A, grid, EmMaterial(1.0, 1.0, 1.0), 0.0)
        errs.append(np.max(np.abs(d + 2 * math.pi**2 * A)))
    assert 4 * 0.75 <= errs[0] / errs[1] <= 4 * 1.25
    # leading truncation term is pi^4 h^2 / 6
    assert errs[1] <= 1.05 * math.pi**4 / 6 / 32**2


def test_eddy_zero_and_conductivity():
    grid = EmGrid2D(1.0, 1.0, 6, 6)
    assert not np.any(eddy_transient_rhs(np.zeros((7, 7)), grid, EmMaterial(1.0, 1.0, 1.0), 0.0))
    with pytest.raises(ZeroConductivity):
        eddy_transient_rhs(np.zeros((7, 7)), grid, EmMaterial(1.0, 1.0, 0.0), 1.0)


def dense_helmholtz(nx, ny, lx, ly, mu, sig, eps, omega, g):
    hx, hy = lx / nx, ly / ny
    ix, iy = nx - 1, ny - 1
    N = ix * iy
    M = np.zeros((N, N), dtype=complex)
    rhs = np.zeros(N, dtype=complex)
    for i in range(ix):
        for j in range(iy):
            k = i * iy + j
            kap = sig + 1j * omega * eps
            M[k, k] = 2 / (mu * hx**2) + 2 / (mu * hy**2) + 1j * omega * kap
            for di, dj, h in ((1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)):
                ii, jj = i + di, j + dj
                if 0 <= ii < ix and 0 <= jj < iy:
                    M[k, ii * iy + jj] = -1 / (mu * h**2)
            rhs[k] = -kap * g[i + 1, j + 1]
    out = np.zeros((nx + 1, ny + 1), dtype=complex)
    out[1:-1, 1:-1] = np.linalg.solve(M, rhs).reshape(ix, iy)
    return out


def test_eddy_harmonic_dense_oracle(rng):
    grid = EmGrid2D(1.0, 1.5, 8, 8)
    g = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    mat = EmMaterial(0.3, 1.2, 2.0)
    A = eddy_harmonic_solve(grid, mat, 3.0, g)
    ref = dense_helmholtz(8, 8, 1.0, 1.5, 1.2, 2.0, 0.3, 3.0, g)
    assert np.max(np.abs(A - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_eddy_harmonic_trivial_and_static():
    grid = EmGrid2D(1.0, 1.0, 8, 8)
    mat = EmMaterial(1.0, 1.0, 1.0)
    assert not np.any(eddy_harmonic_solve(grid, mat, 5.0, 0.0))
    A = eddy_harmonic_solve(grid, mat, 0.0, np.linspace(0, 1, 81).reshape(9, 9))
    assert np.max(np.abs(A.imag)) <= 1e-12


def test_eddy_steady_is_transient_fixed_point():
    grid = EmGrid2D(1.0, 1.0, 10, 10)
    mat = EmMaterial(1.0, 2.0, 3.0)
    A = eddy_steady_solve(grid, mat, 1.5)
    assert np.max(np.abs(eddy_transient_rhs(A, grid, mat, 1.5))) < 1e-10
    ref = dense_helmholtz(10, 10, 1.0, 1.0, 2.0, 3.0, 0.0, 0.0, np.full((11, 11), 1.5))
    assert np.max(np.abs(A - ref.real)) < 1e-12


def test_total_current_cases():
    grid = EmGrid2D(2.0, 1.0, 4, 4)
    mat = EmMaterial(0.5, 1.0, 3.0)
    I0 = total_current(grid, mat, 0.0, 0.0, 1.5, True)
    assert I0 == pytest.approx(-3.0 * 1.5 * 2.0, abs=1e-12)
    omega = 4.0
    I1 = total_current(grid, mat, omega, 0.0, 1.5, True)
    want = math.atan2(omega * 0.5, 3.0) + math.pi
    got = math.atan2(I1.imag, I1.real) % (2 * math.pi)
    assert got == pytest.approx(want, abs=1e-12)
    half = np.zeros((4, 4), bool)
    half[:2] = True
    assert total_current(grid, mat, 0.0, 0.0, 1.5, half) == pytest.approx(0.5 * I0)
    with pytest.raises(EmptyRegion):
        total_current(grid, mat, 0.0, 0.0, 1.0, np.zeros((4, 4), bool))


def test_periodic3d_rhs_plane_wave():
    grid = PeriodicGrid3D(8, 1.0 / 8)
    x = np.arange(8) / 8
    X = np.broadcast_to(x[:, None, None], grid.shape)
    E = np.zeros(grid.shape + (3,))
    B = np.zeros(grid.shape + (3,))
    E[..., 1] = np.sin(2 * math.pi * X)
    Edot, Bdot = maxwell_rhs_periodic3d(grid, E, B, EmMaterial(1.0, 1.0, 0.5))
    assert np.allclose(Edot, -0.5 * E)
    assert np.allclose(Bdot[..., :2], 0.0)
    assert np.max(np.abs(Bdot[..., 2])) > 1.0


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.0, 2.0))
def test_skew_property_1d(n, eps, mu, sigma):
    s = assemble_maxwell_ph(EmGrid1D(1.0, n), EmMaterial(eps, mu, sigma))
    J = s.J.toarray()
    assert np.max(np.abs(J + J.T)) == 0.0
    assert np.all(s.R.diagonal() >= 0)
