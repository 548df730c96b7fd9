"""Fully coupled electro-magneto-thermo-mechanical model in Lagrangian form.

All fields live on a :class:`~mphs.grid.PeriodicGrid3D`; vector fields have
shape ``(n, n, n, 3)``, ``F`` has shape ``(n, n, n, 3, 3)`` and ``theta``
``(n, n, n)``.  Polarization and magnetization are neglected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NonPositiveJacobianDet, NonPositiveTemperature, SingularF
from .grid import PeriodicGrid3D
from .mechanics import IsotropicTensor4, MechMaterial, elastic_energy_and_gradient, kelvin_voigt_stress
from .ph import build_ph_system, simulate
from .thermal import ThermalMaterial

__all__ = [
    "CoupledMaterial",
    "CoupledState",
    "intensities",
    "coupled_stress",
    "total_hamiltonian",
    "coupled_rhs",
    "assemble_coupled_ph",
    "coupled_simulate",
    "coupled_energy_balance",
    "entropy_production",
    "piola",
    "piola_inverse",
    "covector",
    "to_eulerian",
    "det_derivative",
    "d_ftf_over_det",
    "cross_identity_deviation",
    "triple_dyad_deviation",
]

I3 = np.eye(3)


def _T(A):
    return np.swapaxes(A, -1, -2)


def _mv(A, x):
    return np.einsum("...ij,...j->...i", A, x)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


@dataclass(frozen=True)
class CoupledMaterial:
    """Material data of the coupled model.

    ``J_c`` and ``q_c`` take ``(Ecal, B, gradv, F, theta, grad_theta)``;
    when omitted, Ohm's law ``sigma * Ecal`` and Fourier's law
    ``-kappa grad_theta`` are used.  ``body_force(t, state)`` returns an
    acceleration field and ``heat_source(t, state)`` a specific heating
    rate; constants are accepted too.
    """

    eps0: float
    mu0: float
    rho: object
    hooke: IsotropicTensor4
    viscosity: IsotropicTensor4
    psi0: Callable
    dpsi0: Optional[Callable] = None
    d2psi0: Optional[Callable] = None
    energy: Optional[Callable] = None
    sigma: float = 0.0
    kappa: object = 0.0
    J_c: Optional[Callable] = None
    q_c: Optional[Callable] = None
    body_force: object = None
    heat_source: object = None

    def __post_init__(self):
        if not (self.eps0 > 0 and self.mu0 > 0):
            raise ValueError("eps0 and mu0 must be positive")
        if np.any(np.asarray(self.rho) <= 0):
            raise ValueError("rho must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim == 2 and np.linalg.eigvalsh(0.5 * (k + k.T))[0] < -1e-12 * max(1.0, np.abs(k).max()):
            raise ValueError("kappa must be positive semidefinite")
        if k.ndim == 0 and k < 0:
            raise ValueError("kappa must be nonnegative")

    @classmethod
    def simple(cls, eps0=1.0, mu0=1.0, rho=1.0, lam1=1.0, lam2=1.0, zeta1=0.0, zeta2=0.0,
               c0=1.0, sigma=0.0, kappa=0.0, **kw):
        """Isotropic material with ``psi0 = -c0 theta ln(theta)`` (constant specific heat)."""
        return cls(
            eps0=eps0, mu0=mu0, rho=rho,
            hooke=IsotropicTensor4.hooke(lam1, lam2),
            viscosity=IsotropicTensor4.viscosity(zeta1, zeta2),
            psi0=lambda t: -c0 * t * np.log(t),
            dpsi0=lambda t: -c0 * (np.log(t) + 1.0),
            d2psi0=lambda t: -c0 / t,
            energy=lambda t: c0 * t,
            sigma=sigma, kappa=kappa, **kw,
        )

    @property
    def mechanical(self):
        return MechMaterial(self.rho, self.hooke, self.viscosity)

    @property
    def thermal(self):
        return ThermalMaterial(rho=self.rho, psi0=self.psi0, dpsi0=self.dpsi0, d2psi0=self.d2psi0, energy=self.energy)

    def current(self, Ecal, B, gradv, F, theta, grad_theta):
        if self.J_c is not None:
            return np.asarray(self.J_c(Ecal, B, gradv, F, theta, grad_theta), dtype=float)
        return self.sigma * np.asarray(Ecal, dtype=float)

    def heat_flux(self, Ecal, B, gradv, F, theta, grad_theta):
        if self.q_c is not None:
            return np.asarray(self.q_c(Ecal, B, gradv, F, theta, grad_theta), dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        g = np.asarray(grad_theta, dtype=float)
        return -(k * g if k.ndim == 0 else _mv(k, g))

    def specific_heat(self, theta):
        return -theta * self.thermal.second(theta)

    def forces(self, t, state, shape):
        """``(f, r)`` fields at time ``t``; zero when no hook is set."""
        def ev(hook, shp):
            if hook is None:
                return np.zeros(shp)
            val = hook(t, state) if callable(hook) else hook
            return np.broadcast_to(np.asarray(val, dtype=float), shp)

        return ev(self.body_force, shape + (3,)), ev(self.heat_source, shape)


@dataclass
class CoupledState:
    E: np.ndarray
    B: np.ndarray
    v: np.ndarray
    F: np.ndarray
    theta: np.ndarray

    FIELDS = ("E", "B", "v", "F", "theta")

    @property
    def shape(self):
        return np.shape(self.theta)

    @classmethod
    def reference(cls, shape, theta0=1.0):
        z3 = np.zeros(tuple(shape) + (3,))
        return cls(z3.copy(), z3.copy(), z3.copy(), np.broadcast_to(I3, tuple(shape) + (3, 3)).copy(),
                   np.full(tuple(shape), float(theta0)))

    def pack(self):
        """Flat vector ordered E, B, v, F (row-major), theta, field by field."""
        return np.concatenate([np.ravel(getattr(self, f)) for f in self.FIELDS])

    @classmethod
    def unpack(cls, x, shape):
        shape = tuple(shape)
        m = int(np.prod(shape))
        sizes = (3 * m, 3 * m, 3 * m, 9 * m, m)
        parts = np.split(np.asarray(x, dtype=float), np.cumsum(sizes)[:-1])
        return cls(parts[0].reshape(shape + (3,)), parts[1].reshape(shape + (3,)), parts[2].reshape(shape + (3,)),
                   parts[3].reshape(shape + (3, 3)), parts[4].reshape(shape))

    def save(self, stem):
        """Write ``stem.json`` (header) and ``stem.csv`` (flat values, one per line)."""
        from .io import fmt

        header = {"shape": list(self.shape), "fields": list(self.FIELDS), "order": "field-major, F row-major"}
        with open(f"{stem}.json", "w") as fh:
            json.dump(header, fh, indent=2, sort_keys=True)
        with open(f"{stem}.csv", "w") as fh:
            fh.write("value\n")
            fh.writelines(fmt(v) + "\n" for v in self.pack())

    @classmethod
    def load(cls, stem):
        with open(f"{stem}.json") as fh:
            header = json.load(fh)
        vals = np.loadtxt(f"{stem}.csv", skiprows=1, ndmin=1)
        return cls.unpack(vals, header["shape"])


# ---------------------------------------------------------------- pointwise


def _det(F):
    det = np.linalg.det(F)
    flat = np.atleast_1d(det).ravel()
    bad = np.flatnonzero(~(flat > 0))
    if bad.size:
        raise NonPositiveJacobianDet(f"det(F) = {flat[bad[0]]:.3e} <= 0 at cell {bad[0]}", cell=int(bad[0]))
    return det


def _check_theta(theta):
    flat = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    bad = np.flatnonzero(~(flat > 0))
    if bad.size:
        raise NonPositiveTemperature(f"theta = {flat[bad[0]]!r} <= 0 at cell {bad[0]}", cell=int(bad[0]))


def intensities(mat: CoupledMaterial, E, B, v, F):
    """Electromotive and magnetomotive intensities ``(Ecal, Hcal)``."""
    E, B, v, F = (np.asarray(a, dtype=float) for a in (E, B, v, F))
    det = _det(F)[..., None]
    FE, FB = _mv(F, E), _mv(F, B)
    Ecal = _mv(_T(F), FE + np.cross(v, FB)) / det
    Hcal = _mv(_T(F), FB / mat.mu0 - mat.eps0 * np.cross(v, FE)) / det
    return Ecal, Hcal


def coupled_stress(mat: CoupledMaterial, E, B, v, gradv, F):
    """First Piola-Kirchhoff stress of the coupled model.

    The viscous part receives ``gradv`` (the Lagrangian velocity gradient,
    equal to ``dF/dt``) as its rate argument.
    """
    E, B, v, gradv, F = (np.asarray(a, dtype=float) for a in (E, B, v, gradv, F))
    det = _det(F)[..., None, None]
    P = kelvin_voigt_stress(mat.mechanical, F, gradv)
    FE, FB = _mv(F, E), _mv(F, B)
    dyads = np.einsum("...i,...j->...ij", B, B) / mat.mu0 + mat.eps0 * np.einsum("...i,...j->...ij", E, E)
    P = P + F @ dyads / det
    w = mat.eps0 * _dot(FE, FE) + _dot(FB, FB) / mat.mu0
    M = mat.eps0 * np.einsum("...i,...j->...ij", np.cross(FE, FB), v) - 0.5 * w[..., None, None] * I3
    return P + M @ _T(np.linalg.inv(F)) / det


def _em_F_derivative(mat, E, B, F, det=None):
    """``d/dF`` of ``(eps0 E^T C E + B^T C B / mu0) / (2 det F)``, ``C = F^T F``."""
    if det is None:
        det = _det(F)
    FE, FB = _mv(F, E), _mv(F, B)
    FinvT = _T(np.linalg.inv(F))
    d = det[..., None, None]
    out = mat.eps0 * (np.einsum("...i,...j->...ij", FE, E) - 0.5 * _dot(FE, FE)[..., None, None] * FinvT) / d
    out = out + (np.einsum("...i,...j->...ij", FB, B) - 0.5 * _dot(FB, FB)[..., None, None] * FinvT) / (mat.mu0 * d)
    return out


def total_hamiltonian(mat: CoupledMaterial, state: CoupledState, vol):
    """Total energy and its variational derivatives (per unit volume).

    Returns ``(H, {"E", "B", "v", "F", "theta"})``; multiply a derivative by
    ``vol`` to get the partial derivative of ``H`` w.r.t. a cell value.
    """
    E, B, v, F, theta = state.E, state.B, state.v, state.F, state.theta
    det = _det(F)
    _check_theta(theta)
    rho = np.broadcast_to(np.asarray(mat.rho, dtype=float), np.shape(theta))
    C = _T(F) @ F
    CE, CB = _mv(C, E), _mv(C, B)
    em = 0.5 * (mat.eps0 * _dot(E, CE) + _dot(B, CB) / mat.mu0) / det
    W, dW = elastic_energy_and_gradient(mat.mechanical, F)
    density = em + rho * mat.thermal.internal_energy(theta) + W + 0.5 * rho * _dot(v, v)
    H = float(np.sum(density) * vol)
    derivs = {
        "E": mat.eps0 * CE / det[..., None],
        "B": CB / (mat.mu0 * det[..., None]),
        "v": rho[..., None] * v,
        "F": _em_F_derivative(mat, E, B, F, det) + dW,
        "theta": rho * mat.specific_heat(theta),
    }
    return H, derivs


# ------------------------------------------------------------------- dynamics


def _parts(mat, grid, s: CoupledState, t):
    """Shared intermediate fields of the right-hand side."""
    _check_theta(s.theta)
    det = _det(s.F)
    Ecal, Hcal = intensities(mat, s.E, s.B, s.v, s.F)
    gradv = grid.grad_vector(s.v)
    gth = grid.grad_scalar(s.theta)
    Jc = mat.current(Ecal, s.B, gradv, s.F, s.theta, gth)
    q = mat.heat_flux(Ecal, s.B, gradv, s.F, s.theta, gth)
    f1 = grid.curl(Hcal) - Jc
    f2 = -grid.curl(Ecal)
    P = coupled_stress(mat, s.E, s.B, s.v, gradv, s.F)
    FinvT = _T(np.linalg.inv(s.F))
    corr = mat.eps0 * (_mv(_T(gradv), _mv(FinvT, np.cross(s.E, s.B))) - np.cross(s.E, f2)) - np.cross(f1, s.B)
    f3 = grid.div_tensor(P) + _mv(FinvT, corr)
    flux = np.einsum("...ji,...j->...i", P, s.v) - q - np.cross(Ecal, Hcal)
    C = _T(s.F) @ s.F
    _, dW = elastic_energy_and_gradient(mat.mechanical, s.F)
    dF = _em_F_derivative(mat, s.E, s.B, s.F, det) + dW
    exchange = (_dot(s.E, _mv(C, f1)) + _dot(s.B, _mv(C, f2)) / mat.mu0) / det
    theta_row = grid.div_vector(flux) - _dot(s.v, f3) - exchange - np.sum(gradv * dF, axis=(-2, -1))
    return f1, f2, f3, gradv, theta_row


def coupled_rhs(mat: CoupledMaterial, grid: PeriodicGrid3D, state: CoupledState, t=0.0):
    """Time derivatives ``(E, B, v, F, theta)`` as a :class:`CoupledState`."""
    if grid.n < 4:
        raise ConfigError("coupled right-hand side needs n >= 4")
    f1, f2, f3, gradv, theta_row = _parts(mat, grid, state, t)
    shape = grid.shape
    rho = np.broadcast_to(np.asarray(mat.rho, dtype=float), shape)
    f, r = mat.forces(t, state, shape)
    f3 = f3 + rho[..., None] * f
    # rho v.f in the supply cancels against -v.f3 once f3 carries rho f
    theta_row = theta_row + rho * r
    rc = rho * mat.specific_heat(state.theta)
    return CoupledState(f1 / mat.eps0, f2, f3 / rho[..., None], gradv, theta_row / rc)


def _transport_matrix(grid, w):
    """Skew operator ``eta -> div(eta w) + w . grad eta`` on flat scalar fields."""
    m = grid.cells
    out = sp.csr_matrix((m, m))
    for b in range(3):
        D = grid.diff_matrix(b)
        Wb = sp.diags(w[..., b].ravel())
        out = out + D @ Wb + Wb @ D
    return out


def assemble_coupled_ph(mat: CoupledMaterial, grid: PeriodicGrid3D, sample_states=None):
    """Descriptor pH form ``E(z) z' = J(z) e(z) + B u`` of the coupled model.

    ``e = (C E / det F, dH/dB, v, dH/dF, 1)``; ``J(z)`` couples every block to
    the temperature block through the fields ``f1, f2, f3, dv/dx`` and
    carries the skew transport operator of the total-energy flux.  The
    inputs ``u = (f, r)`` enter through the constant map
    ``B = diag(rho vol I, rho vol)`` on the velocity and temperature rows.
    """
    if grid.n < 4:
        raise ConfigError("coupled model needs n >= 4")
    shape = grid.shape
    m = grid.cells
    vol = grid.volume
    rho = np.broadcast_to(np.asarray(mat.rho, dtype=float), shape).ravel()
    sizes = np.array([3 * m, 3 * m, 3 * m, 9 * m, m])
    offs = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offs[-1])
    unpack = lambda x: CoupledState.unpack(x, shape)  # noqa: E731

    def E(x):
        s = unpack(x)
        rc = rho * mat.specific_heat(s.theta.ravel())
        d = np.concatenate([np.full(3 * m, mat.eps0), np.ones(3 * m), np.repeat(rho, 3), np.ones(9 * m), rc])
        return sp.diags(vol * d, format="csr")

    def effort(x):
        s = unpack(x)
        det = _det(s.F)[..., None]
        C = _T(s.F) @ s.F
        _, dW = elastic_energy_and_gradient(mat.mechanical, s.F)
        dF = _em_F_derivative(mat, s.E, s.B, s.F) + dW
        return np.concatenate([
            (_mv(C, s.E) / det).ravel(), (_mv(C, s.B) / (mat.mu0 * det)).ravel(),
            s.v.ravel(), dF.ravel(), np.ones(m),
        ])

    def J(x):
        s = unpack(x)
        f1, f2, f3, gradv, _ = _parts(mat, grid, s, 0.0)
        blocks = [f1.reshape(m, 3), f2.reshape(m, 3), f3.reshape(m, 3), gradv.reshape(m, 9)]
        rows, cols, vals = [], [], []
        for k, blk in enumerate(blocks):
            width = blk.shape[1]
            rows.append(offs[k] + np.arange(m * width))
            cols.append(offs[4] + np.repeat(np.arange(m), width))
            vals.append(blk.ravel())
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        Cm = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        Ecal, Hcal = intensities(mat, s.E, s.B, s.v, s.F)
        gth = grid.grad_scalar(s.theta)
        q = mat.heat_flux(Ecal, s.B, gradv, s.F, s.theta, gth)
        P = coupled_stress(mat, s.E, s.B, s.v, gradv, s.F)
        w = np.einsum("...ji,...j->...i", P, s.v) - q - np.cross(Ecal, Hcal)
        T66 = _transport_matrix(grid, w)
        J66 = sp.bmat([[sp.csr_matrix((offs[4], offs[4])), None], [None, T66]], format="csr")
        return vol * (Cm - Cm.T + J66)

    R = sp.csr_matrix((n, n))
    Bm = sp.vstack([
        sp.csr_matrix((6 * m, 4 * m)),
        sp.hstack([sp.kron(sp.diags(rho * vol), sp.identity(3)), sp.csr_matrix((3 * m, m))]),
        sp.csr_matrix((9 * m, 4 * m)),
        sp.hstack([sp.csr_matrix((m, 3 * m)), sp.diags(rho * vol)]),
    ], format="csr")

    def H(x):
        return total_hamiltonian(mat, unpack(x), vol)[0]

    def grad_H(x):
        _, d = total_hamiltonian(mat, unpack(x), vol)
        return vol * np.concatenate([d[f].ravel() for f in CoupledState.FIELDS])

    def direct_flow(x, u):
        s = unpack(x)
        f1, f2, f3, gradv, th = _parts(mat, grid, s, 0.0)
        out = vol * np.concatenate([f1.ravel(), f2.ravel(), f3.ravel(), gradv.ravel(), th.ravel()])
        if u is not None:
            out = out + Bm @ u
        return out

    def flow_jacobian(x, u):
        f0 = direct_flow(x, u)
        cols = np.empty((n, n))
        for i in range(n):
            h = 1.5e-8 * max(1.0, abs(x[i]))
            xh = x.copy()
            xh[i] += h
            cols[:, i] = (direct_flow(xh, u) - f0) / h
        return cols

    if sample_states is None:
        rng = np.random.default_rng(5)
        ref = CoupledState.reference(shape).pack()
        sample_states = [ref + 0.05 * rng.standard_normal(n)]
    system = build_ph_system(
        n, 4 * m, E, effort, J, R, Bm, H, grad_H,
        flow_jacobian=flow_jacobian, name="coupled", sample_states=sample_states,
        meta={"grid": grid, "shape": shape, "direct_flow": direct_flow, "n_e": n},
    )
    return system


def coupled_simulate(mat: CoupledMaterial, grid: PeriodicGrid3D, state0: CoupledState, t_end, dt,
                     newton_tol=1e-11, system=None):
    """Implicit-midpoint run; returns ``(times, states, trace)``."""
    system = system or assemble_coupled_ph(mat, grid)
    shape = grid.shape

    def u(t, x):
        f, r = mat.forces(t, CoupledState.unpack(x, shape), shape)
        return np.concatenate([np.ravel(f), np.ravel(r)])

    has_input = mat.body_force is not None or mat.heat_source is not None
    traj, trace = simulate(system, state0.pack(), u if has_input else None, t_end, dt, newton_tol=newton_tol,
                           newton_max=60, reuse=25)
    return trace.times, [CoupledState.unpack(x, shape) for x in traj], trace


def coupled_energy_balance(mat: CoupledMaterial, grid: PeriodicGrid3D, times, states):
    """``res_k = H_k - H_{k-1} - dt sum rho (v_m . f + r) vol`` with midpoint ``v_m``, ``f``, ``r``."""
    vol = grid.volume
    shape = grid.shape
    rho = np.broadcast_to(np.asarray(mat.rho, dtype=float), shape)
    H = np.array([total_hamiltonian(mat, s, vol)[0] for s in states])
    res = np.zeros(len(states))
    for k in range(1, len(states)):
        dt = times[k] - times[k - 1]
        xm = 0.5 * (states[k - 1].pack() + states[k].pack())
        sm = CoupledState.unpack(xm, shape)
        f, r = mat.forces(times[k - 1] + 0.5 * dt, sm, shape)
        supply = float(np.sum(rho * (_dot(sm.v, f) + r)) * vol)
        res[k] = H[k] - H[k - 1] - dt * supply
    return res, H


def entropy_production(mat: CoupledMaterial, Ecal, B, gradv, F, theta, grad_theta):
    """``J_c . Ecal - q_c . grad(theta) / theta`` (pointwise)."""
    _check_theta(theta)
    _det(np.asarray(F, dtype=float))
    Jc = mat.current(Ecal, B, gradv, F, theta, grad_theta)
    q = mat.heat_flux(Ecal, B, gradv, F, theta, grad_theta)
    return _dot(Jc, np.asarray(Ecal, dtype=float)) - _dot(q, np.asarray(grad_theta, dtype=float)) / np.asarray(theta)


# ------------------------------------------------------------------ transforms


def _safe_det(F):
    F = np.asarray(F, dtype=float)
    det = np.linalg.det(F)
    scale = np.maximum(np.max(np.abs(F), axis=(-2, -1)) ** 3, 1e-300)
    if np.any(np.abs(det) <= 1e-14 * scale):
        raise SingularF("deformation tensor is singular")
    return F, det


def piola(F, k_hat):
    """Pull back ``k = det(F) F^{-1} k_hat``."""
    F, det = _safe_det(F)
    return det[..., None] * np.linalg.solve(F, np.asarray(k_hat, dtype=float)[..., None])[..., 0]


def piola_inverse(F, k):
    F, det = _safe_det(F)
    return _mv(F, np.asarray(k, dtype=float)) / det[..., None]


def covector(F, s_hat):
    """``s = F^T s_hat``."""
    F, _ = _safe_det(F)
    return _mv(_T(F), np.asarray(s_hat, dtype=float))


def to_eulerian(F, E, B):
    """Eulerian fields ``(F E / det F, F B / det F)``."""
    return piola_inverse(F, E), piola_inverse(F, B)


def det_derivative(A):
    """``d det(A) / dA = det(A) A^{-T}``."""
    A, det = _safe_det(A)
    return det[..., None, None] * _T(np.linalg.inv(A))


def d_ftf_over_det(F):
    """Tensor ``D[i, j] = d/dF_ij (F^T F / det F)`` of shape ``(3, 3, 3, 3)``."""
    F, det = _safe_det(F)
    Finv = np.linalg.inv(F)
    C = F.T @ F
    D = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            Eij = np.zeros((3, 3))
            Eij[i, j] = 1.0
            D[i, j] = (Eij.T @ F + F.T @ Eij) / det - C * Finv[j, i] / det
    return D


def cross_identity_deviation(A, b, c):
    """Max deviation of ``(A b) x (A c) = det(A) A^{-T} (b x c)``."""
    A, det = _safe_det(A)
    lhs = np.cross(A @ b, A @ c)
    rhs = det * np.linalg.solve(A.T, np.cross(b, c))
    return float(np.max(np.abs(lhs - rhs)))


def triple_dyad_deviation(a, b, c):
    """Max deviation of ``(a x b) c^T + (c x a) b^T + (b x c) a^T = ((a x b) . c) I``."""
    a, b, c = (np.asarray(z, dtype=float) for z in (a, b, c))
    lhs = np.outer(np.cross(a, b), c) + np.outer(np.cross(c, a), b) + np.outer(np.cross(b, c), a)
    return float(np.max(np.abs(lhs - np.dot(np.cross(a, b), c) * I3)))
