import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mphs.circuit import (
    MachineParams,
    flux_linkage,
    slip,
    slip_sweep,
    solve_phasors,
    torque_power,
    total_loss,
    winding_losses,
)
from mphs.errors import AsymmetricInductance, ConfigError, NegativeLoss, SingularCircuit, ZeroSlip

BASE = MachineParams(R1=0.2, X1=0.8, X3=12.0, R2p=0.15, X2p=0.9, Np=3, U1=230.0 + 0j, ns=25.0)


def random_params(g):
    return MachineParams(R1=g.uniform(0.01, 2), X1=g.uniform(0, 3), X3=g.uniform(0, 50), R2p=g.uniform(0.01, 2),
                         X2p=g.uniform(0, 3), Np=int(g.integers(1, 7)), U1=complex(*g.uniform(-400, 400, 2)),
                         U2p=complex(*g.uniform(-10, 10, 2)), ns=g.uniform(5, 60))


def dense_currents(p, s):
    A = np.array([[p.R1 + 1j * (p.X1 + p.X3), -1j * p.X3], [1j * p.X3, -(p.R2p / s) - 1j * (p.X2p + p.X3)]])
    return np.linalg.solve(A, np.array([p.U1, p.U2p]))


def test_slip_values():
    assert slip(25.0, 25.0) == 0.0
    assert slip(0.0, 25.0) == 1.0
    assert slip(0.97 * 25.0, 25.0) == pytest.approx(0.03, abs=1e-15)
    with pytest.raises(ValueError):
        slip(1.0, 0.0)


def test_phasors_dense_oracle(rng):
    for _ in range(100):
        p = random_params(rng)
        s = rng.choice([0.05, rng.uniform(-1, 1)])
        I1, I2 = solve_phasors(p, s)
        ref = dense_currents(p, s)
        assert abs(I1 - ref[0]) <= 1e-12 * abs(ref[0])
        assert abs(I2 - ref[1]) <= 1e-12 * max(abs(ref[1]), 1e-300)


def test_decoupled_closed_form():
    p = MachineParams(R1=0.5, X1=2.0, X3=0.0, R2p=0.3, X2p=1.0, U1=100 + 20j, ns=50.0)
    I1, I2 = solve_phasors(p, 0.04)
    assert abs(I1 - (100 + 20j) / (0.5 + 2.0j)) <= 1e-15 * abs(I1)
    assert I2 == 0


def test_zero_slip_limit():
    I1, I2 = solve_phasors(BASE, 0.0)
    assert I2 == 0j
    assert I1 == pytest.approx(BASE.U1 / (BASE.R1 + 1j * (BASE.X1 + BASE.X3)), rel=1e-15)
    with pytest.raises(SingularCircuit):
        solve_phasors(MachineParams(R1=0.0, X1=0.0, X3=0.0, R2p=0.0, X2p=0.0), 0.0)


def test_singular_determinant():
    with pytest.raises(SingularCircuit):
        solve_phasors(MachineParams(R1=0.0, X1=0.0, X3=0.0, R2p=0.0, X2p=0.0), 0.1)


def test_winding_losses():
    p = MachineParams(R1=1.0, X1=0.0, X3=0.0, R2p=0.5, X2p=0.0, Np=3)
    assert winding_losses(p, 2.0 + 0j, 0j) == (12.0, 0.0)
    assert winding_losses(p, 4.0, 0)[0] == 4 * winding_losses(p, 2.0, 0)[0]
    assert winding_losses(p, 1.2 - 1.6j, 0)[0] == pytest.approx(12.0)


def test_total_loss():
    z = total_loss(0, 0, 0, 0, 0, 0)
    assert z.P_V == 0
    b = total_loss(12.0, 3.0, 5.0, 2.0, 0.1, 10.0)
    assert b.P_Z == 1.0 and b.P_V == 23.0
    assert total_loss(0, 0, 0, 0, 0.005, 10_000.0).P_Z == pytest.approx(50.0)
    with pytest.raises(NegativeLoss):
        total_loss(-1.0, 0, 0, 0, 0, 0)
    with pytest.raises(NegativeLoss):
        total_loss(0, 0, 0, 0, 1.5, 1.0)


def test_torque_power():
    p = MachineParams(R1=0.1, X1=0.1, X3=1.0, R2p=0.5, X2p=0.1, Np=3, ns=25.0)
    assert torque_power(p, 0.05, 0j) == (0.0, 0.0)
    Pag, Te = torque_power(p, 0.05, 10.0)
    assert Pag == pytest.approx(3000.0, rel=1e-15)
    assert Te == pytest.approx(3000.0 / (50 * math.pi), rel=1e-15)
    assert Te == pytest.approx(19.0986, abs=1e-4)
    assert torque_power(p, -0.05, 10.0)[0] < 0
    with pytest.raises(ZeroSlip):
        torque_power(p, 0.0, 1.0)


def test_flux_linkage(rng):
    assert np.array_equal(flux_linkage(np.eye(3), np.zeros(3), 0.4), np.full(3, 0.4))
    assert flux_linkage([[2.0]], [3.0], 0.5) == pytest.approx([6.5])
    A = rng.standard_normal((5, 5))
    L = A + A.T
    I = rng.standard_normal(5)
    naive = [L[i, i] * I[i] + sum(L[i, j] * I[j] for j in range(5) if j != i) + 0.2 for i in range(5)]
    assert np.max(np.abs(flux_linkage(L, I, 0.2) - naive)) <= 1e-14
    with pytest.raises(AsymmetricInductance):
        flux_linkage(A, I, 0.0)


def test_power_bookkeeping(rng):
    for _ in range(50):
        p = random_params(rng)
        p = MachineParams(**{**p.__dict__, "U2p": 0j})
        s = rng.uniform(0.001, 1.0)
        I1, I2 = solve_phasors(p, s)
        pin = p.Np * (p.U1 * I1.conjugate()).real
        pw1, pw2 = winding_losses(p, I1, I2)
        pag, _ = torque_power(p, s, I2)
        assert pin >= pw1 + pag - 1e-9 * max(1.0, abs(pin))
        assert pin >= pw1 + pw2 - 1e-9 * max(1.0, abs(pin))


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.001, 1.0))
def test_homogeneous_in_voltage(ar, ai, s):
    alpha = complex(ar, ai)
    I1, I2 = solve_phasors(BASE, s)
    p2 = MachineParams(**{**BASE.__dict__, "U1": alpha * BASE.U1})
    J1, J2 = solve_phasors(p2, s)
    assert abs(J1 - alpha * I1) <= 1e-13 * max(1.0, abs(alpha * I1))
    assert abs(J2 - alpha * I2) <= 1e-13 * max(1.0, abs(alpha * I2))


def test_torque_slip_curve():
    slips = np.concatenate([np.logspace(-8, -2, 20), np.linspace(0.02, 1.0, 100)])
    rows = slip_sweep(BASE, slips)
    Te = np.array([r[6] for r in rows])
    assert Te[0] < 1e-5 * Te.max()
    assert np.all(Te > 0)
    k = int(np.argmax(Te))
    assert np.all(np.diff(Te[: k + 1]) > 0) and np.all(np.diff(Te[k:]) < 0)
    assert slip_sweep(BASE, [0.0])[0][5:] == (0.0, 0.0)


def test_params_validation_and_json():
    with pytest.raises(ValueError):
        MachineParams(R1=-1.0, X1=0, X3=0, R2p=0, X2p=0)
    back = MachineParams.from_dict(BASE.to_dict())
    assert back == BASE
    with pytest.raises(ConfigError):
        MachineParams.from_dict({"R1": 1.0})
    assert BASE.with_temperature_factor(1.2).R1 == pytest.approx(0.24)
