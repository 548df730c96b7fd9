import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import lc_oscillator
from mphs.errors import NonConvergence, PortMismatch, StepError, StructureError
from mphs.ph import (
    EnergyTrace,
    build_ph_system,
    check_structure,
    interconnect,
    simulate,
    step_implicit_midpoint,
)


def scalar_decay():
    return build_ph_system(1, 0, np.eye(1), lambda x: x, np.zeros((1, 1)), np.eye(1), np.zeros((1, 0)),
                           lambda x: 0.5 * float(x @ x), lambda x: x.copy(), effort_jacobian=np.eye(1), linear=True)


def damper(d=0.7):
    return build_ph_system(1, 1, np.eye(1), lambda x: x, np.zeros((1, 1)), d * np.eye(1), np.ones((1, 1)),
                           lambda x: 0.5 * float(x @ x), lambda x: x.copy(), effort_jacobian=np.eye(1), linear=True)


def test_lc_accepted():
    s = lc_oscillator()
    rep = check_structure(s, [np.array([0.3, -1.2])])
    assert rep["skew_max_sym"] == 0.0
    assert rep["grad_rel_err"] < 1e-12


def test_symmetric_J_rejected():
    with pytest.raises(StructureError) as info:
        build_ph_system(2, 0, np.eye(2), lambda x: x, np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros((2, 2)),
                        np.zeros((2, 0)), lambda x: 0.5 * float(x @ x))
    assert info.value.check == "skew"


def test_negative_R_rejected():
    with pytest.raises(StructureError) as info:
        build_ph_system(2, 0, np.eye(2), lambda x: x, np.zeros((2, 2)), np.diag([-1.0, 0.0]),
                        np.zeros((2, 0)), lambda x: 0.5 * float(x @ x))
    assert info.value.check == "psd"


def test_dimension_mismatch():
    with pytest.raises(StructureError) as info:
        build_ph_system(2, 1, np.eye(2), lambda x: x, np.zeros((2, 2)), np.zeros((2, 2)),
                        np.zeros((3, 1)), lambda x: 0.5 * float(x @ x))
    assert info.value.check == "dims"


def test_wrong_gradient_rejected():
    with pytest.raises(StructureError) as info:
        build_ph_system(1, 0, np.eye(1), lambda x: 2 * x, np.zeros((1, 1)), np.zeros((1, 1)),
                        np.zeros((1, 0)), lambda x: 0.5 * float(x @ x), sample_states=[np.array([1.0])])
    assert info.value.check == "gradient"


def test_scalar_midpoint_step():
    x1 = step_implicit_midpoint(scalar_decay(), np.array([1.0]), dt=0.1)
    assert x1[0] == pytest.approx(0.95 / 1.05, abs=1e-15)


def test_lc_conservation_1000_steps():
    s = lc_oscillator()
    x0 = np.array([1.0, 0.5])
    traj, trace = simulate(s, x0, None, 10.0, 0.01)
    assert traj.shape == (1001, 2)
    H = trace.hamiltonian
    assert np.max(np.abs(H - H[0])) <= 1e-12 * H[0]
    assert trace.max_abs_residual <= 1e-12


def test_damped_oscillator_strictly_decreasing():
    s = lc_oscillator(R=np.diag([0.0, 0.5]))
    _, trace = simulate(s, np.array([1.0, 0.0]), None, 5.0, 0.01)
    assert np.all(np.diff(trace.hamiltonian) < 0)
    assert np.all(trace.dissipated_power >= -1e-12)
    assert trace.max_abs_residual <= 1e-12


def test_trace_length_and_last_step():
    s = lc_oscillator()
    traj, trace = simulate(s, np.array([1.0, 0.0]), None, 0.25, 0.1)
    assert len(traj) == math.ceil(0.25 / 0.1) + 1
    assert trace.times[-1] == pytest.approx(0.25, abs=1e-15)


def test_bad_dt():
    s = lc_oscillator()
    with pytest.raises(ValueError):
        simulate(s, np.zeros(2), None, 1.0, 0.0)
    with pytest.raises(ValueError):
        step_implicit_midpoint(s, np.zeros(2), dt=0.0)


def test_trace_lengths_checked():
    with pytest.raises(ValueError):
        EnergyTrace(np.zeros(3), np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(3))


def test_trace_csv_header(tmp_path):
    _, trace = simulate(lc_oscillator(), np.array([1.0, 0.0]), None, 0.1, 0.05)
    p = tmp_path / "e.csv"
    trace.to_csv(p)
    assert p.read_text().splitlines()[0] == "t,H,P_diss,P_supplied,residual"


def test_driven_supply_accounted():
    s = lc_oscillator(R=np.diag([0.0, 0.2]), with_input=True)
    _, trace = simulate(s, np.zeros(2), lambda t: np.array([math.sin(3 * t)]), 3.0, 0.01)
    assert trace.max_abs_residual <= 1e-12
    assert np.any(trace.supplied_power != 0)


def test_order_two():
    s = lc_oscillator()
    x0 = np.array([1.0, 0.0])
    T = 1.0
    ref, _ = simulate(s, x0, None, T, 0.1 / 8)
    errs = []
    for dt in (0.1, 0.05):
        tr, _ = simulate(s, x0, None, T, dt)
        errs.append(np.linalg.norm(tr[-1] - ref[-1]))
    assert 4 * 0.8 <= errs[0] / errs[1] <= 4 * 1.2


def test_nonlinear_newton():
    # pendulum: H = p^2/2 + (1 - cos q)
    s = build_ph_system(2, 0, np.eye(2), lambda x: np.array([math.sin(x[0]), x[1]]),
                        np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros((2, 2)), np.zeros((2, 0)),
                        lambda x: 0.5 * x[1] ** 2 + 1 - math.cos(x[0]),
                        lambda x: np.array([math.sin(x[0]), x[1]]))
    _, trace = simulate(s, np.array([1.0, 0.0]), None, 5.0, 0.01)
    H = trace.hamiltonian
    assert np.max(np.abs(H - H[0])) < 1e-4
    _, tr2 = simulate(s, np.array([1.0, 0.0]), None, 5.0, 0.01, method="discrete_gradient")
    assert np.max(np.abs(tr2.hamiltonian - H[0])) < 1e-11


def test_nonconvergence_reported_with_step():
    s = build_ph_system(1, 0, np.eye(1), lambda x: x**3, np.zeros((1, 1)), np.eye(1), np.zeros((1, 0)),
                        lambda x: 0.25 * float(x[0] ** 4), lambda x: x**3)
    with pytest.raises(StepError) as info:
        simulate(s, np.array([50.0]), None, 1.0, 10.0, newton_max=2)
    assert info.value.step == 0
    assert isinstance(info.value.__cause__, NonConvergence)


def test_interconnect_two_lc():
    a = lc_oscillator(with_input=True)
    b = lc_oscillator(with_input=True)
    c = interconnect(a, b, [0], [0])
    assert c.n_state == 4 and c.n_input == 0
    rep = check_structure(c, [np.arange(4.0)])
    assert rep["skew_max_sym"] == 0.0
    _, trace = simulate(c, np.array([1.0, 0.0, 0.0, 0.5]), None, 10.0, 0.01)
    H = trace.hamiltonian
    assert np.max(np.abs(H - H[0])) <= 1e-12 * H[0]


def test_interconnect_with_damper_nonincreasing():
    c = interconnect(lc_oscillator(with_input=True), damper(), [0], [0])
    _, trace = simulate(c, np.array([1.0, 0.3, 0.2]), None, 5.0, 0.01)
    assert np.all(np.diff(trace.hamiltonian) <= 1e-14)


def test_port_mismatch():
    with pytest.raises(PortMismatch):
        interconnect(lc_oscillator(with_input=True), damper(), [0], [])


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.floats(0.0, 2.0),
    st.floats(1e-3, 0.5),
)
def test_discrete_dissipation_inequality(x0, r, dt):
    s = lc_oscillator(R=np.diag([0.0, r]))
    _, trace = simulate(s, np.array(x0), None, 20 * dt, dt)
    H = trace.hamiltonian
    assert np.all(H[1:] <= H[:-1] + 1e-10 * np.maximum(1.0, H[:-1]))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_random_skew_psd_accepted(n, seed):
    g = np.random.default_rng(seed)
    A = g.standard_normal((n, n))
    L = g.standard_normal((n, n))
    s = build_ph_system(n, 0, np.eye(n), lambda x: x, A - A.T, L @ L.T, np.zeros((n, 0)),
                        lambda x: 0.5 * float(x @ x), lambda x: x.copy(), effort_jacobian=np.eye(n), linear=True)
    e = g.standard_normal(n)
    assert abs(e @ (s.J @ e)) <= 1e-12 * (e @ e)
