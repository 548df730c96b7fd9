"""Kelvin-Voigt constitutive algebra, elastodynamics and rotor models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    ConfigError,
    NonPositiveJacobianDet,
    SingularMass,
    StructureError,
    UnsupportedDomain,
)
from .grid import PeriodicGrid3D
from .ph import build_ph_system, simulate

__all__ = [
    "IsotropicTensor4",
    "MechMaterial",
    "SecondOrderSystem",
    "ElastoModel",
    "apply_isotropic_tensor",
    "kelvin_voigt_stress",
    "elastic_energy_and_gradient",
    "viscous_dissipation_density",
    "linearized_stress",
    "assemble_elastodynamics_ph",
    "elastodynamics_rhs_periodic3d",
    "assemble_linear_nonrotating",
    "assemble_rotor_system",
    "second_order_eigs",
    "second_order_ph",
    "jeffcott_system",
    "rotor_speed_step",
    "rotor_speed_trajectory",
    "rotation",
]

I3 = np.eye(3)


@dataclass(frozen=True)
class IsotropicTensor4:
    """Isotropic fourth-order tensor ``T A = c_trace tr(A) I + 2 c_dev A``."""

    kind: str
    c_trace: float
    c_dev: float

    @classmethod
    def hooke(cls, lam1, lam2):
        if lam1 < 0 or lam2 < 0:
            raise ValueError("Lame parameters must be nonnegative")
        return cls("hooke", float(lam1), float(lam2))

    @classmethod
    def viscosity(cls, zeta1, zeta2):
        if zeta1 < 0 or zeta2 < 0:
            raise ValueError("viscosities must be nonnegative")
        return cls("viscosity", float(zeta1) - 2.0 * float(zeta2) / 3.0, float(zeta2))

    def apply(self, A):
        A = np.asarray(A, dtype=float)
        tr = np.trace(A, axis1=-2, axis2=-1)[..., None, None]
        return self.c_trace * tr * I3 + 2.0 * self.c_dev * A

    def as_array(self):
        """Dense ``T[i, j, k, l]`` with ``(T A)_ij = sum_kl T_ijkl A_kl``."""
        d = np.eye(3)
        return self.c_trace * np.einsum("ij,kl->ijkl", d, d) + 2.0 * self.c_dev * np.einsum("ik,jl->ijkl", d, d)


def apply_isotropic_tensor(T: IsotropicTensor4, A):
    return T.apply(A)


@dataclass(frozen=True)
class MechMaterial:
    rho: object
    hooke: IsotropicTensor4
    viscosity: IsotropicTensor4

    def __post_init__(self):
        if np.any(np.asarray(self.rho) <= 0):
            raise ValueError("rho must be positive")

    @classmethod
    def from_parameters(cls, rho, lam1, lam2, zeta1=0.0, zeta2=0.0):
        return cls(rho, IsotropicTensor4.hooke(lam1, lam2), IsotropicTensor4.viscosity(zeta1, zeta2))

    @property
    def zeta2(self):
        return self.viscosity.c_dev

    @property
    def longitudinal_modulus(self):
        return self.hooke.c_trace + 2.0 * self.hooke.c_dev

    @property
    def longitudinal_viscosity(self):
        return self.viscosity.c_trace + 2.0 * self.viscosity.c_dev


def _det_check(F):
    det = np.linalg.det(F)
    bad = np.flatnonzero(~(np.atleast_1d(det) > 0))
    if bad.size:
        raise NonPositiveJacobianDet(f"det(F) = {np.atleast_1d(det)[bad[0]]:.3e} <= 0", cell=int(bad[0]) if np.ndim(det) else None)
    return det


def _T(A):
    return np.swapaxes(A, -1, -2)


def kelvin_voigt_stress(material: MechMaterial, F1, F2):
    """First Piola-Kirchhoff stress ``1/2 F1 (H(F1^T F1 - I) + V(F2^T F1 + F1^T F2))``."""
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    _det_check(F1)
    inner = material.hooke.apply(_T(F1) @ F1 - I3) + material.viscosity.apply(_T(F2) @ F1 + _T(F1) @ F2)
    return 0.5 * F1 @ inner


def elastic_energy_and_gradient(material: MechMaterial, F):
    """Elastic energy density ``1/8 <H(C - I), C - I>`` and its F-gradient."""
    F = np.asarray(F, dtype=float)
    S = _T(F) @ F - I3
    HS = material.hooke.apply(S)
    W = 0.125 * np.sum(HS * S, axis=(-2, -1))
    return (float(W) if np.ndim(W) == 0 else W), 0.5 * F @ HS


def viscous_dissipation_density(material: MechMaterial, F, Fdot):
    """``1/2 <V(Fdot^T F + F^T Fdot), F^T Fdot>``, nonnegative for admissible V."""
    F = np.asarray(F, dtype=float)
    Fdot = np.asarray(Fdot, dtype=float)
    S = _T(Fdot) @ F + _T(F) @ Fdot
    return 0.5 * np.sum(material.viscosity.apply(S) * (_T(F) @ Fdot), axis=(-2, -1))


def linearized_stress(material: MechMaterial, G, Gdot=None):
    """Small-strain stress ``T_H G + T_V Gdot`` about the reference state.

    ``T A = c_trace tr(A) I + c_dev (A + A^T)`` for both tensors.
    """
    def lin(T, A):
        A = np.asarray(A, dtype=float)
        return T.c_trace * np.trace(A, axis1=-2, axis2=-1)[..., None, None] * I3 + T.c_dev * (A + _T(A))

    out = lin(material.hooke, G)
    if Gdot is not None:
        out = out + lin(material.viscosity, Gdot)
    return out


def rotation(omega, t):
    """Rigid rotation about the third axis and its time derivative."""
    c, s = math.cos(omega * t), math.sin(omega * t)
    H = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    Hd = omega * np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])
    return H, Hd


def _viscous_blocks(material, F):
    """Per-cell 9x9 matrix of ``G -> 1/2 F V(G^T F + F^T G)`` (row-major vec)."""
    F = np.asarray(F, dtype=float)
    out = np.empty(F.shape[:-2] + (9, 9))
    for k in range(9):
        G = np.zeros((3, 3))
        G.flat[k] = 1.0
        S = _T(G) @ F + _T(F) @ G
        out[..., :, k] = (0.5 * F @ material.viscosity.apply(S)).reshape(F.shape[:-2] + (9,))
    return out


# --------------------------------------------------------- elastodynamics


@dataclass(frozen=True)
class ElastoModel:
    """Assembled nonlinear elastodynamics model.

    ``input(t, x)`` returns the port vector for the configured body force and
    tractions; ``pack``/``unpack`` convert between ``(v, F)`` and the state.
    """

    system: object
    domain: str
    n_nodes: int
    weights: np.ndarray
    material: MechMaterial
    input: Callable
    grid: Optional[PeriodicGrid3D] = None
    h: float = 1.0

    def pack(self, v, F):
        return np.concatenate([np.asarray(v, dtype=float).ravel(), np.asarray(F, dtype=float).ravel()])

    def unpack(self, x):
        m = self.n_nodes
        v = x[: 3 * m].reshape(m, 3)
        F = x[3 * m:].reshape(m, 3, 3)
        if self.grid is not None:
            return v.reshape(self.grid.shape + (3,)), F.reshape(self.grid.shape + (3, 3))
        return v, F

    def reference_state(self, v=None):
        m = self.n_nodes
        vv = np.zeros((m, 3)) if v is None else v
        return self.pack(vv, np.broadcast_to(I3, (m, 3, 3)))

    def simulate(self, x0, t_end, dt, **kw):
        return simulate(self.system, x0, self.input, t_end, dt, **kw)


def _sbp_operators(n, h):
    m = n + 1
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    Q = sp.diags([np.full(m - 1, 0.5), np.full(m - 1, -0.5)], [1, -1], format="lil")
    Q[0, 0] = -0.5
    Q[m - 1, m - 1] = 0.5
    return w, Q.tocsr()


def _as_force(value, shape):
    if value is None:
        return lambda t, x: np.zeros(shape)
    if callable(value):
        return lambda t, x: np.broadcast_to(np.asarray(value(t, x), dtype=float), shape)
    const = np.broadcast_to(np.asarray(value, dtype=float), shape)
    return lambda t, x: const


def assemble_elastodynamics_ph(material: MechMaterial, domain="bar", n=16, length=1.0, traction=None, body_force=None):
    """Nonlinear elastodynamics in pH form on a 1D bar or a periodic box.

    ``domain="bar"``: ``n`` cells along ``x1`` on ``[0, length]`` with
    summation-by-parts differences; the two end tractions are ports.
    ``traction`` is ``None`` (free ends), a pair of 3-vectors or a callable
    ``t -> (tau_0, tau_L)``.

    ``domain="periodic3d"``: ``n^3`` cells of edge ``length/n`` with central
    differences.

    ``body_force`` (m/s^2 per node/cell) is ``None``, an array or a callable
    ``(t, x)``.
    """
    if n < 2:
        raise UnsupportedDomain("need at least 2 cells")
    if domain == "bar":
        return _assemble_bar(material, n, length, traction, body_force)
    if domain == "periodic3d":
        if traction is not None:
            raise UnsupportedDomain("periodic domains have no traction boundary")
        return _assemble_periodic(material, n, length, body_force)
    raise UnsupportedDomain(f"unknown domain {domain!r} (use 'bar' or 'periodic3d')")


def _assemble_bar(material, n, length, traction, body_force):
    h = length / n
    m = n + 1
    w, Q = _sbp_operators(n, h)
    rho = np.broadcast_to(np.asarray(material.rho, dtype=float), (m,)).copy()
    # column-0 entries of F (row-major index 3a) carry the x1-derivative
    S = sp.csr_matrix((np.ones(3), ([0, 1, 2], [0, 3, 6])), shape=(3, 9))
    J_vF = -sp.kron(Q.T, S)
    J_Fv = sp.kron(Q, S.T)
    J = sp.bmat([[None, J_vF], [J_Fv, None]], format="csr")
    nv, nF = 3 * m, 9 * m
    E = sp.diags(np.concatenate([np.repeat(rho * w, 3), np.repeat(w, 9)]), format="csr")
    D = sp.kron(sp.diags(1.0 / w) @ Q, sp.identity(3), format="csr")
    Wd = sp.kron(sp.diags(w), sp.identity(3), format="csr")
    zero_FF = sp.csr_matrix((nF, nF))
    has_visc = material.viscosity.c_trace != 0 or material.viscosity.c_dev != 0

    def unpack(x):
        return x[:nv].reshape(m, 3), x[nv:].reshape(m, 3, 3)

    def effort(x):
        v, F = unpack(x)
        _, dW = elastic_energy_and_gradient(material, F)
        return np.concatenate([v.ravel(), dW.ravel()])

    def R(x):
        if not has_visc:
            return sp.csr_matrix((nv + nF, nv + nF))
        _, F = unpack(x)
        Vb = _viscous_blocks(material, F)[:, [0, 3, 6]][:, :, [0, 3, 6]]
        Vm = sp.bsr_matrix((Vb, np.arange(m), np.arange(m + 1)), shape=(nv, nv)).tocsr()
        Rvv = D.T @ Wd @ Vm @ D
        return sp.block_diag([Rvv, zero_FF], format="csr")

    Bf = sp.kron(sp.diags(rho * w), sp.identity(3))
    Bt = sp.lil_matrix((nv, 6))
    for a in range(3):
        Bt[a, a] = 1.0
        Bt[3 * (m - 1) + a, 3 + a] = 1.0
    B = sp.bmat([[sp.hstack([Bf, Bt.tocsr()])], [sp.csr_matrix((nF, nv + 6))]], format="csr")

    def H(x):
        v, F = unpack(x)
        W, _ = elastic_energy_and_gradient(material, F)
        return float(np.sum(w * (0.5 * rho * np.sum(v * v, axis=1) + W)))

    def grad_H(x):
        v, F = unpack(x)
        _, dW = elastic_energy_and_gradient(material, F)
        return np.concatenate([(rho[:, None] * w[:, None] * v).ravel(), (w[:, None, None] * dW).ravel()])

    force = _as_force(body_force, (m, 3))
    if traction is None:
        tr = lambda t: np.zeros(6)  # noqa: E731
    elif callable(traction):
        tr = lambda t: np.concatenate([np.asarray(a, dtype=float) for a in traction(t)])  # noqa: E731
    else:
        const = np.concatenate([np.asarray(a, dtype=float) for a in traction])
        tr = lambda t: const  # noqa: E731

    def u_fun(t, x):
        return np.concatenate([np.asarray(force(t, x)).ravel(), tr(t)])

    rng = np.random.default_rng(1)
    ref = np.concatenate([np.zeros(nv), np.tile(I3.ravel(), m)])
    samples = [ref, ref + 0.05 * rng.standard_normal(ref.size)]
    system = build_ph_system(
        nv + nF, nv + 6, E, effort, J, R, B, H, grad_H,
        name="elastodynamics_bar", sample_states=samples,
    )
    return ElastoModel(system, "bar", m, w, material, u_fun, None, h)


def _tensor_grad_matrix(grid: PeriodicGrid3D):
    """Sparse ``Grad`` with ``(Grad v)[c, a, b] = d_b v[c, a]`` on flat fields."""
    blocks = None
    for a in range(3):
        for b in range(3):
            Sab = sp.csr_matrix(([1.0], ([3 * a + b], [a])), shape=(9, 3))
            term = sp.kron(grid.diff_matrix(b), Sab, format="csr")
            blocks = term if blocks is None else blocks + term
    return blocks.tocsr()


def _assemble_periodic(material, n, length, body_force):
    grid = PeriodicGrid3D(n, length / n)
    m = grid.cells
    vol = grid.volume
    rho = np.broadcast_to(np.asarray(material.rho, dtype=float), grid.shape).reshape(m).copy()
    Grad = _tensor_grad_matrix(grid)
    nv, nF = 3 * m, 9 * m
    J = sp.bmat([[None, -vol * Grad.T], [vol * Grad, None]], format="csr")
    E = sp.diags(np.concatenate([np.repeat(rho * vol, 3), np.full(nF, vol)]), format="csr")
    zero_FF = sp.csr_matrix((nF, nF))
    has_visc = material.viscosity.c_trace != 0 or material.viscosity.c_dev != 0

    def unpack(x):
        return x[:nv].reshape(m, 3), x[nv:].reshape(m, 3, 3)

    def effort(x):
        v, F = unpack(x)
        _, dW = elastic_energy_and_gradient(material, F)
        return np.concatenate([v.ravel(), dW.ravel()])

    def R(x):
        if not has_visc:
            return sp.csr_matrix((nv + nF, nv + nF))
        _, F = unpack(x)
        Vb = _viscous_blocks(material, F)
        Vm = sp.bsr_matrix((Vb, np.arange(m), np.arange(m + 1)), shape=(nF, nF)).tocsr()
        return sp.block_diag([vol * (Grad.T @ Vm @ Grad), zero_FF], format="csr")

    B = sp.vstack([sp.kron(sp.diags(rho * vol), sp.identity(3)), sp.csr_matrix((nF, nv))], format="csr")

    def H(x):
        v, F = unpack(x)
        W, _ = elastic_energy_and_gradient(material, F)
        return float(np.sum(0.5 * rho * np.sum(v * v, axis=1) + W) * vol)

    def grad_H(x):
        v, F = unpack(x)
        _, dW = elastic_energy_and_gradient(material, F)
        return np.concatenate([(rho[:, None] * v * vol).ravel(), (dW * vol).ravel()])

    force = _as_force(body_force, (m, 3))
    rng = np.random.default_rng(2)
    ref = np.concatenate([np.zeros(nv), np.tile(I3.ravel(), m)])
    samples = [ref, ref + 0.05 * rng.standard_normal(ref.size)]
    system = build_ph_system(
        nv + nF, nv, E, effort, J, R, B, H, grad_H,
        name="elastodynamics_periodic3d", sample_states=samples,
    )
    u_fun = lambda t, x: np.asarray(force(t, x)).ravel()  # noqa: E731
    return ElastoModel(system, "periodic3d", m, np.full(m, vol), material, u_fun, grid, grid.h)


def elastodynamics_rhs_periodic3d(material: MechMaterial, grid: PeriodicGrid3D, v, F, body_force=None):
    """Pointwise ``(dv/dt, dF/dt)`` of the nonlinear first-order system."""
    gradv = grid.grad_vector(v)
    P = kelvin_voigt_stress(material, F, gradv)
    rho = np.broadcast_to(np.asarray(material.rho, dtype=float), grid.shape)[..., None]
    rhs = grid.div_tensor(P)
    if body_force is not None:
        rhs = rhs + rho * body_force
    return rhs / rho, gradv


# ------------------------------------------------------ linear systems


def _sym(A, tol=1e-12):
    A = np.asarray(A, dtype=float)
    return np.max(np.abs(A - A.T)) <= tol * max(1.0, np.max(np.abs(A)))


@dataclass(frozen=True)
class SecondOrderSystem:
    """``M s'' + (D + 2 w G) s' + (K - w^2 Z + w^2 K_G) s = f``."""

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    G: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    K_G: Optional[np.ndarray] = None
    omega: float = 0.0

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        n = M.shape[0]
        for name in ("M", "D", "K", "G", "Z", "K_G"):
            A = getattr(self, name)
            if A is not None and np.shape(A) != (n, n):
                raise StructureError("dims", f"{name} has shape {np.shape(A)}, expected ({n}, {n})")
        if not _sym(M):
            raise StructureError("symmetry", "M must be symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise StructureError("spd", "M must be positive definite") from None
        if not _sym(self.D):
            raise StructureError("symmetry", "D must be symmetric")
        wD = np.linalg.eigvalsh(np.asarray(self.D, dtype=float))
        if wD.size and wD[0] < -1e-12 * max(1.0, np.abs(wD).max()):
            raise StructureError("psd", "D must be positive semidefinite")
        if not _sym(self.K):
            raise StructureError("symmetry", "K must be symmetric")
        if self.G is not None:
            G = np.asarray(self.G, dtype=float)
            if np.max(np.abs(G + G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
                raise StructureError("skew", "G must be skew-symmetric")
        for name in ("Z", "K_G"):
            A = getattr(self, name)
            if A is not None and not _sym(A):
                raise StructureError("symmetry", f"{name} must be symmetric")

    @property
    def n(self):
        return np.shape(self.M)[0]

    @property
    def D_eff(self):
        D = np.asarray(self.D, dtype=float)
        if self.G is not None and self.omega:
            D = D + 2.0 * self.omega * np.asarray(self.G, dtype=float)
        return D

    @property
    def K_eff(self):
        K = np.asarray(self.K, dtype=float)
        w2 = self.omega**2
        if self.Z is not None and w2:
            K = K - w2 * np.asarray(self.Z, dtype=float)
        if self.K_G is not None and w2:
            K = K + w2 * np.asarray(self.K_G, dtype=float)
        return K

    def to_dict(self):
        out = {"M": np.asarray(self.M).tolist(), "D": np.asarray(self.D).tolist(), "K": np.asarray(self.K).tolist(), "omega": self.omega}
        for name in ("G", "Z", "K_G"):
            A = getattr(self, name)
            if A is not None:
                out[name] = np.asarray(A).tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            kw = {k: np.asarray(d[k], dtype=float) for k in ("M", "D", "K")}
        except KeyError as exc:
            raise ConfigError(f"second-order system missing key {exc}") from None
        for k in ("G", "Z", "K_G"):
            if k in d:
                kw[k] = np.asarray(d[k], dtype=float)
        return cls(omega=float(d.get("omega", 0.0)), **kw)


def assemble_linear_nonrotating(material: MechMaterial, length, n, rayleigh=None, bc="fixed-fixed"):
    """Longitudinal linear-element model of a bar with ``n`` nodes.

    Stiffness uses the modulus ``lambda1 + 2 lambda2``; damping uses the
    viscous modulus ``zeta1 + 4/3 zeta2`` unless Rayleigh coefficients
    ``(alpha, beta)`` are given (``D = alpha M + beta K``).
    """
    if n < 2:
        raise UnsupportedDomain("need at least 2 nodes")
    h = length / (n - 1)
    rho = float(np.mean(material.rho))
    Me = rho * h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    ke = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    for e in range(n - 1):
        idx = np.ix_([e, e + 1], [e, e + 1])
        M[idx] += Me
        K[idx] += ke
    Dv = material.longitudinal_viscosity * K
    K = material.longitudinal_modulus * K
    keep = {
        "fixed-fixed": slice(1, n - 1),
        "fixed-free": slice(1, n),
        "free-free": slice(0, n),
    }.get(bc)
    if keep is None:
        raise ConfigError(f"unknown boundary condition {bc!r}")
    M, K, Dv = M[keep, keep], K[keep, keep], Dv[keep, keep]
    D = Dv if rayleigh is None else rayleigh[0] * M + rayleigh[1] * K
    return SecondOrderSystem(M, D, K)


def assemble_rotor_system(base: SecondOrderSystem, omega, G, Z, K_G=None):
    """Install gyroscopic, centrifugal and optional stiffening terms."""
    if omega == 0:
        return base
    n = base.n
    G = np.asarray(G, dtype=float) if G is not None else np.zeros((n, n))
    Z = np.asarray(Z, dtype=float) if Z is not None else np.zeros((n, n))
    return replace(base, G=G, Z=Z, K_G=None if K_G is None else np.asarray(K_G, dtype=float), omega=float(omega))


def _merge_clusters(lam, rtol=1e-5):
    """Average tight eigenvalue clusters (defective roots are ill-conditioned
    individually but their mean is not)."""
    lam = np.array(lam, dtype=complex)
    used = np.zeros(lam.size, dtype=bool)
    for i in range(lam.size):
        if used[i]:
            continue
        tol = rtol * max(1.0, abs(lam[i]))
        members = [j for j in range(lam.size) if not used[j] and abs(lam[j] - lam[i]) <= tol]
        if len(members) > 1:
            lam[members] = np.mean(lam[members])
        used[members] = True
    return lam


def second_order_eigs(sysm: SecondOrderSystem):
    """Eigenvalues of the companion linearization sorted by ``(Im, Re)``."""
    M = np.asarray(sysm.M, dtype=float)
    n = M.shape[0]
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= n * np.finfo(float).eps * s[0]:
        raise SingularMass("mass matrix is singular")
    Minv_K = np.linalg.solve(M, sysm.K_eff)
    Minv_D = np.linalg.solve(M, sysm.D_eff)
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-Minv_K, -Minv_D]])
    lam = _merge_clusters(sla.eigvals(A))
    lam = np.where(np.abs(lam.imag) <= 1e-14 * np.maximum(1.0, np.abs(lam)), lam.real + 0j, lam)
    order = np.lexsort((lam.real, lam.imag))
    return lam[order]


def second_order_ph(sysm: SecondOrderSystem):
    """pH form with state ``(s, s')``, ``E = diag(K_eff, M)``, ``J = [[0, K], [-K, -2wG]]``.

    Requires ``K_eff`` symmetric positive definite (energy ``1/2 s'^T M s' + 1/2 s^T K s``).
    """
    M = np.asarray(sysm.M, dtype=float)
    K = sysm.K_eff
    n = M.shape[0]
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        raise StructureError("spd", "effective stiffness must be positive definite for the energy form") from None
    G2 = 2.0 * sysm.omega * np.asarray(sysm.G, dtype=float) if sysm.G is not None else np.zeros((n, n))
    E = sla.block_diag(K, M)
    J = np.block([[np.zeros((n, n)), K], [-K, -G2]])
    R = sla.block_diag(np.zeros((n, n)), np.asarray(sysm.D, dtype=float))
    B = np.vstack([np.zeros((n, n)), np.eye(n)])
    return build_ph_system(
        2 * n, n, E, lambda x: x, J, R, B,
        lambda x: 0.5 * float(x[:n] @ K @ x[:n] + x[n:] @ M @ x[n:]),
        lambda x: E @ x,
        effort_jacobian=np.eye(2 * n), linear=True, name="second_order",
    )


def jeffcott_system(m, d, k):
    """Two real degrees of freedom ``m s'' + d s' + k s = f(t, s)``."""
    I2 = np.eye(2)
    return SecondOrderSystem(m * I2, d * I2, k * I2)


# ---------------------------------------------------------- rotor speed


def _torque(value):
    return value if callable(value) else (lambda t: value)


def rotor_speed_trajectory(theta_inertia, mu_f, T_e, T_L, omega0, t_end, dt):
    """Implicit-midpoint speed history for possibly time-varying torques.

    Returns ``(times, omega)``.
    """
    if not theta_inertia > 0 or mu_f < 0:
        raise ValueError("need theta_inertia > 0 and mu_f >= 0")
    Te, TL = _torque(T_e), _torque(T_L)
    sysm = build_ph_system(
        1, 1, np.array([[theta_inertia]]), lambda x: x, np.zeros((1, 1)), np.array([[mu_f]]), np.ones((1, 1)),
        lambda x: 0.5 * theta_inertia * float(x[0] ** 2), lambda x: theta_inertia * x,
        effort_jacobian=np.eye(1), linear=True, name="rotor_speed",
    )
    traj, trace = simulate(sysm, np.array([float(omega0)]), lambda t: np.array([Te(t) - TL(t)]), t_end, dt)
    return trace.times, traj[:, 0]


def rotor_speed_step(theta_inertia, mu_f, T_e, T_L, omega0, t, dt=1e-3, method="exact"):
    """Rotor speed at time ``t``.

    Constant torques with ``method="exact"`` use the closed form; otherwise
    the torque balance is integrated with implicit midpoint steps ``dt``.
    """
    if not theta_inertia > 0 or mu_f < 0 or t < 0:
        raise ValueError("need theta_inertia > 0, mu_f >= 0 and t >= 0")
    if method == "exact" and not callable(T_e) and not callable(T_L):
        net = T_e - T_L
        if mu_f == 0:
            return omega0 + net * t / theta_inertia
        w_inf = net / mu_f
        return w_inf + (omega0 - w_inf) * math.exp(-mu_f * t / theta_inertia)
    if t == 0:
        return float(omega0)
    _, w = rotor_speed_trajectory(theta_inertia, mu_f, T_e, T_L, omega0, t, dt)
    return float(w[-1])
