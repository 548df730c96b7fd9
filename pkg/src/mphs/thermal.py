"""Heat conduction in port-Hamiltonian form and lumped thermal networks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, IllPosedBC, NonPositiveTemperature, SingularNetwork, StructureError
from .ph import build_ph_system, simulate

__all__ = [
    "ThermalMaterial",
    "ThermalBC",
    "HeatGrid",
    "HeatModel",
    "ThermalNetwork",
    "heat_coefficients",
    "assemble_heat_ph",
    "heat_steady_state",
    "diffusion_rhs",
    "assemble_network",
    "network_steady_state",
    "network_simulate",
    "log_free_energy",
]


@dataclass(frozen=True)
class ThermalMaterial:
    """Density, deformation-free free energy and conductivity.

    ``dpsi0``/``d2psi0`` are optional analytic derivatives; central
    differences with step ``1e-6*theta`` are used when absent.
    ``energy`` optionally overrides ``psi0 - theta*psi0'`` per unit mass.
    """

    rho: object
    psi0: Callable[[np.ndarray], np.ndarray]
    kappa: object = 1.0
    dpsi0: Optional[Callable] = None
    d2psi0: Optional[Callable] = None
    energy: Optional[Callable] = None

    def __post_init__(self):
        if np.any(np.asarray(self.rho) <= 0):
            raise ValueError("rho must be positive")
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim == 2:
            if not np.allclose(k, k.T, atol=1e-14 * max(1.0, np.abs(k).max())):
                raise ValueError("kappa must be symmetric")
            if np.linalg.eigvalsh(k)[0] < -1e-12 * np.abs(k).max():
                raise ValueError("kappa must be positive semidefinite")
        elif k.ndim == 0 and k < 0:
            raise ValueError("kappa must be nonnegative")

    def first(self, theta):
        if self.dpsi0 is not None:
            return self.dpsi0(theta)
        h = 1e-6 * np.abs(theta)
        return (self.psi0(theta + h) - self.psi0(theta - h)) / (2 * h)

    def second(self, theta):
        if self.d2psi0 is not None:
            return self.d2psi0(theta)
        h = 1e-6 * np.abs(theta)
        if self.dpsi0 is not None:
            return (self.dpsi0(theta + h) - self.dpsi0(theta - h)) / (2 * h)
        h = 1e-4 * np.abs(theta)
        return (self.psi0(theta + h) - 2 * self.psi0(theta) + self.psi0(theta - h)) / h**2

    def internal_energy(self, theta):
        if self.energy is not None:
            return self.energy(theta)
        return self.psi0(theta) - theta * self.first(theta)

    def kappa_axes(self, dim):
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim == 0:
            return np.full(dim, float(k))
        if k.ndim == 1:
            return k[:dim]
        off = k[:dim, :dim] - np.diag(np.diag(k[:dim, :dim]))
        if np.any(off != 0):
            raise ConfigError("cartesian finite volumes need an axis-aligned (diagonal) kappa")
        return np.diag(k)[:dim].copy()


def log_free_energy(c0, rho=1.0, kappa=1.0):
    """Material with ``psi0 = -c0*theta*ln(theta)``, i.e. constant specific heat ``c0``."""
    return ThermalMaterial(
        rho=rho,
        kappa=kappa,
        psi0=lambda t: -c0 * t * np.log(t),
        dpsi0=lambda t: -c0 * (np.log(t) + 1.0),
        d2psi0=lambda t: -c0 / t,
        energy=lambda t: c0 * t,
    )


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    bad = np.flatnonzero(~(theta > 0))
    if bad.size:
        raise NonPositiveTemperature(f"temperature {theta.flat[bad[0]]!r} <= 0", cell=int(bad[0]))
    return theta


def heat_coefficients(material: ThermalMaterial, theta):
    """Specific heat ``c = -theta*psi0''`` and entropy ``s = -psi0'``."""
    theta = _check_theta(theta)
    c = -theta * material.second(theta)
    s = -material.first(theta)
    if np.ndim(theta) == 0:
        return float(c), float(s)
    return c, s


@dataclass(frozen=True)
class ThermalBC:
    """Face condition ``w1*q.nu + w2*theta = gamma``.

    Dirichlet is ``(0, 1, theta_b)``, Neumann is ``(1, 0, q_b)``.
    ``gamma`` may be a number or a callable of time.
    """

    w1: float
    w2: float
    gamma: object = 0.0
    kind: str = "robin"

    def __post_init__(self):
        if self.w1 == 0 and self.w2 == 0:
            raise IllPosedBC("Robin weights (w1, w2) must not both vanish")

    @classmethod
    def dirichlet(cls, theta_b):
        return cls(0.0, 1.0, theta_b, "dirichlet")

    @classmethod
    def neumann(cls, q_b):
        return cls(1.0, 0.0, q_b, "neumann")

    @classmethod
    def robin(cls, w1, w2, gamma):
        return cls(float(w1), float(w2), gamma, "robin")

    def value(self, t):
        return float(self.gamma(t)) if callable(self.gamma) else float(self.gamma)

    @property
    def fixes_level(self):
        return self.w2 != 0


INSULATED = ThermalBC.neumann(0.0)


@dataclass(frozen=True)
class HeatGrid:
    """Uniform cell-centered grid on ``[0, Lx]`` or ``[0, Lx] x [0, Ly]``."""

    extents: tuple
    cells: tuple

    def __post_init__(self):
        if len(self.extents) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ConfigError("heat grids are 1D or 2D")
        if any(n < 2 for n in self.cells) or any(not L > 0 for L in self.extents):
            raise ConfigError("need at least 2 cells and positive extents per axis")

    @property
    def dim(self):
        return len(self.cells)

    @property
    def h(self):
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def n(self):
        return int(np.prod(self.cells))

    @property
    def volume(self):
        return float(np.prod(self.h))

    def centers(self):
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.h)]
        if self.dim == 1:
            return axes[0]
        X, Y = np.meshgrid(*axes, indexing="ij")
        return X, Y

    def faces(self):
        return ("left", "right") if self.dim == 1 else ("left", "right", "bottom", "top")


def _laplacian(grid: HeatGrid, kappa_axes):
    """Symmetric conductance (graph Laplacian) matrix; rows sum to zero."""
    mats = []
    for ax, (n, h) in enumerate(zip(grid.cells, grid.h)):
        area = grid.volume / h
        g = kappa_axes[ax] * area / h
        e = np.ones(n)
        L1 = sp.diags([-e[:-1], 2 * e, -e[:-1]], [-1, 0, 1], format="lil")
        L1[0, 0] = 1.0
        L1[n - 1, n - 1] = 1.0
        mats.append(g * L1.tocsr())
    if grid.dim == 1:
        return mats[0].tocsr()
    nx, ny = grid.cells
    return (sp.kron(mats[0], sp.identity(ny)) + sp.kron(sp.identity(nx), mats[1])).tocsr()


def _boundary_cells(grid: HeatGrid, face):
    if grid.dim == 1:
        return np.array([0]) if face == "left" else np.array([grid.cells[0] - 1])
    nx, ny = grid.cells
    idx = np.arange(nx * ny).reshape(nx, ny)
    return {"left": idx[0, :], "right": idx[-1, :], "bottom": idx[:, 0], "top": idx[:, -1]}[face]


def _face_axis(face):
    return 0 if face in ("left", "right") else 1


def diffusion_rhs(grid: HeatGrid, material: ThermalMaterial, theta):
    """Interior conduction term ``sum_j K_ij (theta_j - theta_i)`` per cell (W)."""
    L = _laplacian(grid, material.kappa_axes(grid.dim))
    return -(L @ np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class HeatModel:
    """Assembled heat-conduction model.

    ``system`` is the pH system with state theta; ``input(t, theta)`` gives
    the per-cell heat supply (W): boundary inflow plus volumetric sources.
    """

    system: object
    grid: HeatGrid
    material: ThermalMaterial
    bcs: dict
    input: Callable
    laplacian: object
    boundary_gain: np.ndarray

    def boundary_inflow(self, t, theta):
        theta = np.asarray(theta, dtype=float)
        q = np.zeros(self.grid.n)
        for face, bc in self.bcs.items():
            cells = _boundary_cells(self.grid, face)
            ax = _face_axis(face)
            h = self.grid.h[ax]
            area = self.grid.volume / h
            g = 2.0 * self.material.kappa_axes(self.grid.dim)[ax] / h
            gamma = bc.value(t)
            if bc.w1 == 0:
                theta_f = gamma / bc.w2
                q[cells] += area * g * (theta_f - theta[cells])
            else:
                den = bc.w2 - bc.w1 * g
                if den == 0:
                    raise IllPosedBC(f"Robin weights degenerate on face {face}")
                theta_f = (gamma - bc.w1 * g * theta[cells]) / den
                q[cells] += area * g * (theta_f - theta[cells])
        return q

    def simulate(self, theta0, t_end, dt, **kw):
        return simulate(self.system, theta0, self.input, t_end, dt, **kw)


def _field(value, t, theta, n):
    if value is None:
        return np.zeros(n)
    if callable(value):
        return np.broadcast_to(np.asarray(value(t, theta), dtype=float), (n,))
    return np.broadcast_to(np.asarray(value, dtype=float), (n,))


def assemble_heat_ph(grid: HeatGrid, material: ThermalMaterial, bcs=None, viscous_heating=None, r=None):
    """Heat conduction as a pH system with state-dependent flow map.

    ``bcs`` maps face names to :class:`ThermalBC` (missing faces are
    insulated).  ``viscous_heating`` (W/m^3) and ``r`` (W/kg) are numbers,
    arrays or callables ``(t, theta)``.
    """
    bcs = dict(bcs or {})
    for face in bcs:
        if face not in grid.faces():
            raise ConfigError(f"unknown face {face!r} for a {grid.dim}D grid")
    for face in grid.faces():
        bcs.setdefault(face, INSULATED)
    n = grid.n
    vol = grid.volume
    rho = np.broadcast_to(np.asarray(material.rho, dtype=float), (n,)).copy()
    kax = material.kappa_axes(grid.dim)
    L = _laplacian(grid, kax)

    gain = np.zeros(n)
    for face, bc in bcs.items():
        cells = _boundary_cells(grid, face)
        ax = _face_axis(face)
        h = grid.h[ax]
        area = vol / h
        g = 2.0 * kax[ax] / h
        if bc.w1 == 0:
            gain[cells] += area * g
        else:
            den = bc.w2 - bc.w1 * g
            if den == 0:
                raise IllPosedBC(f"Robin weights degenerate on face {face}")
            gain[cells] += area * g * (1.0 + bc.w1 * g / den)

    def E(theta):
        c, _ = heat_coefficients(material, theta)
        return sp.diags(rho * c * vol, format="csr")

    ones = np.ones(n)
    rows, cols = L.nonzero()
    off = rows != cols
    rows, cols = rows[off], cols[off]
    kvals = -np.asarray(L[rows, cols]).ravel()

    def J(theta):
        data = kvals * (theta[cols] - theta[rows])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    zero = sp.csr_matrix((n, n))
    Bmat = sp.identity(n, format="csr")

    def H(theta):
        return float(np.sum(rho * material.internal_energy(theta)) * vol)

    def grad_H(theta):
        c, _ = heat_coefficients(material, theta)
        return rho * c * vol

    jac = (-L - sp.diags(gain)).tocsc()

    model_holder = {}

    def u_fun(t, theta):
        src = model_holder["m"].boundary_inflow(t, theta)
        src = src + _field(viscous_heating, t, theta, n) * vol + rho * _field(r, t, theta, n) * vol
        return src

    centers = grid.centers()
    probe = 300.0 + 10.0 * np.sin(np.arange(n))
    system = build_ph_system(
        n,
        n,
        E,
        lambda theta: ones,
        J,
        zero,
        Bmat,
        H,
        grad_H,
        flow_jacobian=lambda x, u: jac,
        name=f"heat{grid.dim}d",
        sample_states=[probe, probe * 1.1],
        meta={"n_e": n, "centers": centers},
    )
    model = HeatModel(system, grid, material, bcs, u_fun, L, gain)
    model_holder["m"] = model
    return model


def heat_steady_state(model: HeatModel, t=0.0):
    """Steady temperature for time-frozen boundary data and sources."""
    if not any(bc.fixes_level for bc in model.bcs.values()):
        raise IllPosedBC("steady state needs at least one Dirichlet or Robin face fixing the level")
    n = model.grid.n
    probe = np.ones(n)
    f0 = -(model.laplacian @ probe) + model.input(t, probe)
    A = -(model.laplacian + sp.diags(model.boundary_gain)).tocsc()
    return probe + spla.spsolve(A, -f0)


# ---------------------------------------------------------------- networks


@dataclass(frozen=True)
class ThermalNetwork:
    """Lumped thermal RC network.

    ``P`` is a constant vector or a callable ``P(t)``.  ``Lambda_of_theta``
    optionally returns ``(Lambda, Lambda0)`` for absolute node temperatures.
    """

    C: np.ndarray
    Lambda: np.ndarray
    Lambda0: np.ndarray
    P: object
    theta0: float = 0.0
    Lambda_of_theta: Optional[Callable] = field(default=None, compare=False)

    @property
    def N(self):
        return len(self.C)

    def P_at(self, t):
        return np.asarray(self.P(t) if callable(self.P) else self.P, dtype=float)

    @classmethod
    def from_dict(cls, d):
        try:
            N = int(d["N"])
            net = cls(
                C=np.asarray(d["C"], dtype=float),
                Lambda=np.asarray(d["Lambda"], dtype=float),
                Lambda0=np.asarray(d["Lambda0"], dtype=float),
                P=np.asarray(d["P"], dtype=float),
                theta0=float(d.get("theta0", 0.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"thermal network missing key {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid thermal network: {exc}") from None
        if net.C.shape != (N,) or net.Lambda.shape != (N, N) or net.Lambda0.shape != (N,) or net.P_at(0).shape != (N,):
            raise ConfigError(f"thermal network arrays inconsistent with N={N}")
        return net

    def to_dict(self):
        return {
            "N": self.N,
            "C": self.C.tolist(),
            "Lambda": self.Lambda.tolist(),
            "Lambda0": self.Lambda0.tolist(),
            "P": self.P_at(0.0).tolist(),
            "theta0": self.theta0,
        }


def _network_A(Lam, Lam0):
    return np.diag(-Lam0 - Lam.sum(axis=1)) + Lam


def _validate_network(net: ThermalNetwork):
    C, Lam, Lam0 = (np.asarray(a, dtype=float) for a in (net.C, net.Lambda, net.Lambda0))
    N = C.size
    if Lam.shape != (N, N) or Lam0.shape != (N,):
        raise StructureError("dims", f"Lambda {Lam.shape} / Lambda0 {Lam0.shape} inconsistent with N={N}")
    if np.any(C <= 0):
        raise StructureError("capacitance", "all C_i must be positive")
    if not np.array_equal(Lam, Lam.T):
        raise StructureError("symmetry", "Lambda must be symmetric")
    if np.any(np.diag(Lam) != 0):
        raise StructureError("diagonal", "Lambda_ii must be zero")
    if np.any(Lam < 0) or np.any(Lam0 < 0):
        raise StructureError("sign", "conductances must be nonnegative")
    return C, Lam, Lam0


def assemble_network(net: ThermalNetwork):
    """pH form ``diag(C) x' = A x + P`` with ``R = -A`` and ``H = x^T diag(C) x / 2``.

    Returns ``(system, {"E": ..., "A": ..., "P": ...})``.
    """
    C, Lam, Lam0 = _validate_network(net)
    A = _network_A(Lam, Lam0)
    N = C.size
    E = np.diag(C)
    if net.Lambda_of_theta is None:
        R = -A
        linear = True
    else:
        def R(x):
            L2, L02 = net.Lambda_of_theta(x + net.theta0)
            return -_network_A(np.asarray(L2, dtype=float), np.asarray(L02, dtype=float))
        linear = False
    system = build_ph_system(
        N,
        N,
        E,
        lambda x: x,
        np.zeros((N, N)),
        R,
        np.identity(N),
        lambda x: 0.5 * float(x @ (C * x)),
        lambda x: C * x,
        effort_jacobian=np.identity(N),
        linear=linear,
        name="thermal_network",
    )
    return system, {"E": E, "A": A, "P": net.P_at(0.0)}


def network_steady_state(net: ThermalNetwork, t=0.0):
    """Solve ``0 = A x + P``; returns ``(theta_abs, x)``."""
    _, m = assemble_network(net)
    A = m["A"]
    P = net.P_at(t)
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= A.shape[0] * np.finfo(float).eps * max(s[0], 1e-300) or s[-1] == 0:
        raise SingularNetwork("network matrix is singular (a component has no path to ambient)")
    x = np.linalg.solve(A, -P)
    return x + net.theta0, x


def network_simulate(net: ThermalNetwork, x0, t_end, dt, **kw):
    """Implicit-midpoint transient; returns ``(times, x_traj, trace)``."""
    system, _ = assemble_network(net)
    u = (lambda t: net.P_at(t)) if callable(net.P) else net.P_at(0.0)
    traj, trace = simulate(system, np.asarray(x0, dtype=float), u, t_end, dt, **kw)
    return trace.times, traj, trace
