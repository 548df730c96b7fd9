"""Maxwell dynamics on staggered grids, potential and eddy-current solvers."""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConfigError,
    EmptyRegion,
    PeriodicBoundary,
    SingularSystem,
    UnsupportedBoundary,
    ZeroConductivity,
)
from .grid import PeriodicGrid3D
from .ph import build_ph_system

__all__ = [
    "EmMaterial",
    "EmGrid1D",
    "EmGrid2D",
    "Phasor",
    "PoyntingFlow",
    "PotentialSolution",
    "assemble_maxwell_ph",
    "poynting_boundary_flow",
    "discrete_divergence",
    "solve_potential",
    "eddy_transient_rhs",
    "eddy_steady_solve",
    "eddy_harmonic_solve",
    "total_current",
    "maxwell_rhs_periodic3d",
]


@dataclass(frozen=True)
class EmMaterial:
    """Permittivity, permeability and conductivity, uniform or per cell."""

    epsilon: object = 1.0
    mu: object = 1.0
    sigma: object = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.epsilon) <= 0):
            raise ValueError("epsilon must be positive")
        if np.any(np.asarray(self.mu) <= 0):
            raise ValueError("mu must be positive")
        if np.any(np.asarray(self.sigma) < 0):
            raise ValueError("sigma must be nonnegative")

    def cells(self, name, shape):
        return np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape).copy()


@dataclass(frozen=True)
class Phasor:
    magnitude: float
    omega: float
    theta: float = 0.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")

    def __call__(self, t):
        return self.magnitude * np.sin(self.omega * t + self.theta)

    @property
    def complex(self):
        """Complex amplitude ``Z_m e^{j theta}`` of ``Z_m sin(w t + theta)``."""
        return self.magnitude * cmath.exp(1j * self.theta)


_KINDS = ("pec", "periodic", "dirichlet")


@dataclass(frozen=True)
class EmGrid1D:
    """``n`` cells on ``[0, length]``; ``E_y`` on nodes, ``B_z`` on cells."""

    length: float
    n: int
    left: str = "pec"
    right: str = "pec"

    def __post_init__(self):
        if self.n < 2 or not self.length > 0:
            raise ConfigError("need n >= 2 cells and positive length")
        for k in (self.left, self.right):
            if k not in _KINDS:
                raise ConfigError(f"unknown boundary kind {k!r}")
        if (self.left == "periodic") != (self.right == "periodic"):
            raise UnsupportedBoundary("periodic boundaries must be paired")

    @property
    def h(self):
        return self.length / self.n

    @property
    def periodic(self):
        return self.left == "periodic"

    @property
    def e_nodes(self):
        """Node indices carrying an E unknown; boundary nodes are PEC or prescribed."""
        if self.periodic:
            return np.arange(self.n)
        return np.arange(1, self.n)

    @property
    def n_E(self):
        return self.e_nodes.size

    @property
    def n_B(self):
        return self.n

    @property
    def n_inputs(self):
        return int(self.left == "dirichlet") + int(self.right == "dirichlet")

    def split(self, x):
        return x[: self.n_E], x[self.n_E:]

    def node_x(self):
        return self.h * self.e_nodes

    def cell_x(self):
        return self.h * (np.arange(self.n) + 0.5)


@dataclass(frozen=True)
class EmGrid2D:
    """``nx x ny`` cells on ``[0, lx] x [0, ly]`` with Yee staggering.

    ``mode="TE"``: ``(Ex, Ey)`` on edges, ``Bz`` on cells.
    ``mode="TM"``: ``Ez`` on nodes, ``(Bx, By)`` on edges.
    ``boundary`` is ``"pec"`` or ``"periodic"``.
    """

    lx: float
    ly: float
    nx: int
    ny: int
    boundary: str = "pec"
    mode: str = "TE"

    def __post_init__(self):
        if min(self.nx, self.ny) < 2 or not (self.lx > 0 and self.ly > 0):
            raise ConfigError("need at least 2 cells per axis and positive extents")
        if self.boundary not in ("pec", "periodic"):
            raise UnsupportedBoundary(f"2D grids support 'pec' or 'periodic', not {self.boundary!r}")
        if self.mode not in ("TE", "TM"):
            raise ConfigError("mode must be 'TE' or 'TM'")

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def periodic(self):
        return self.boundary == "periodic"

    def _npts(self, n):
        return n if self.periodic else n + 1

    def _d(self, n, h):
        """Forward difference nodes -> cells."""
        m = self._npts(n)
        e = np.ones(n)
        d = sp.lil_matrix((n, m))
        d.setdiag(-e)
        d.setdiag(e, 1)
        if self.periodic:
            d[n - 1, 0] = 1.0
        return d.tocsr() / h

    def _interior_nodes(self, n):
        return np.arange(n) if self.periodic else np.arange(1, n)

    def _select(self, keep_x, keep_y, mx, my):
        idx = (keep_x[:, None] * my + keep_y[None, :]).ravel()
        return sp.identity(mx * my, format="csr")[:, idx]

    def operators(self):
        """``(K, S_E, S_B)``: discrete curl B-from-E on unknowns and selectors."""
        nx, ny = self.nx, self.ny
        mx, my = self._npts(nx), self._npts(ny)
        dx, dy = self._d(nx, self.hx), self._d(ny, self.hy)
        if self.mode == "TE":
            # Ex on (cells_x, nodes_y); Ey on (nodes_x, cells_y); Bz on cells
            Sx = self._select(np.arange(nx), self._interior_nodes(ny), nx, my)
            Sy = self._select(self._interior_nodes(nx), np.arange(ny), mx, ny)
            C = sp.hstack([-sp.kron(sp.identity(nx), dy) @ Sx, sp.kron(dx, sp.identity(ny)) @ Sy], format="csr")
            return C, (Sx, Sy), None
        # TM: Ez on nodes; Bx on (nodes_x, cells_y); By on (cells_x, nodes_y)
        Sz = self._select(self._interior_nodes(nx), self._interior_nodes(ny), mx, my)
        K = sp.vstack([sp.kron(sp.identity(mx), dy), -sp.kron(dx, sp.identity(my))], format="csr") @ Sz
        return K, Sz, None

    @property
    def n_E(self):
        C, S, _ = self.operators()
        return C.shape[1]

    @property
    def n_B(self):
        C, _, _ = self.operators()
        return C.shape[0]

    def split(self, x):
        nE = self.n_E
        return x[:nE], x[nE:]


def _node_average(cell_vals, periodic):
    """Average of the two cells adjacent to each node (1D)."""
    if periodic:
        return 0.5 * (cell_vals + np.roll(cell_vals, 1))
    return 0.5 * (cell_vals[1:] + cell_vals[:-1])


def assemble_maxwell_ph(grid, material: EmMaterial):
    """Staggered-grid Maxwell system ``E x' = (J - R) x + B u``, ``x = (E, B)``.

    The flow map is ``diag(eps * w, w / mu)`` with cell weights ``w``; the
    effort is the state itself, so ``H = 1/2 x^T E x``.  Dirichlet faces of
    a 1D grid contribute one input column each (the boundary ``E`` value).
    """
    if isinstance(grid, EmGrid1D):
        return _maxwell_1d(grid, material)
    if isinstance(grid, EmGrid2D):
        return _maxwell_2d(grid, material)
    raise ConfigError(f"unsupported grid type {type(grid).__name__}")


def _maxwell_1d(grid: EmGrid1D, material):
    n, h = grid.n, grid.h
    eps_c = material.cells("epsilon", (n,))
    mu_c = material.cells("mu", (n,))
    sig_c = material.cells("sigma", (n,))
    if grid.periodic:
        eps_n, sig_n = _node_average(eps_c, True), _node_average(sig_c, True)
    else:
        eps_n, sig_n = _node_average(eps_c, False), _node_average(sig_c, False)
    nE = grid.n_E
    # (G e)_j = E_{j+1} - E_j on unknown nodes; Dirichlet/PEC nodes enter via inputs
    G = sp.lil_matrix((n, nE))
    nodes = grid.e_nodes
    col = {int(k): i for i, k in enumerate(nodes)}
    for j in range(n):
        right = (j + 1) % n if grid.periodic else j + 1
        if right in col:
            G[j, col[right]] += 1.0
        if j in col:
            G[j, col[j]] -= 1.0
    G = G.tocsr()
    Minv = sp.diags(1.0 / mu_c)
    J = sp.bmat([[None, G.T @ Minv], [-Minv @ G, None]], format="csr")
    Ediag = np.concatenate([eps_n * h, h / mu_c])
    E = sp.diags(Ediag, format="csr")
    R = sp.diags(np.concatenate([sig_n * h, np.zeros(n)]), format="csr")
    cols = []
    if grid.left == "dirichlet":
        c = np.zeros(nE + n)
        c[nE + 0] = 1.0 / mu_c[0]
        cols.append(c)
    if grid.right == "dirichlet":
        c = np.zeros(nE + n)
        c[nE + n - 1] = -1.0 / mu_c[-1]
        cols.append(c)
    B = sp.csr_matrix(np.array(cols).T) if cols else sp.csr_matrix((nE + n, 0))
    rng = np.random.default_rng(3)
    samples = [rng.standard_normal(nE + n) for _ in range(2)]
    return build_ph_system(
        nE + n, B.shape[1], E, lambda x: x, J, R, B,
        lambda x: 0.5 * float(x @ (Ediag * x)),
        lambda x: Ediag * x,
        effort_jacobian=sp.identity(nE + n, format="csr"),
        linear=True, name="maxwell1d", sample_states=samples,
        meta={"grid": grid, "n_E": nE},
    )


def _maxwell_2d(grid: EmGrid2D, material):
    for name in ("epsilon", "mu", "sigma"):
        if np.ndim(getattr(material, name)) != 0:
            raise ConfigError("2D Maxwell assembly takes uniform material parameters")
    eps, mu, sig = float(material.epsilon), float(material.mu), float(material.sigma)
    A = grid.hx * grid.hy
    C, _, _ = grid.operators()
    if grid.mode == "TE":
        nE, nB = C.shape[1], C.shape[0]
        J = sp.bmat([[None, (A / mu) * C.T], [-(A / mu) * C, None]], format="csr")
    else:
        nB, nE = C.shape
        J = sp.bmat([[None, (A / mu) * C.T], [-(A / mu) * C, None]], format="csr")
    Ediag = np.concatenate([np.full(nE, eps * A), np.full(nB, A / mu)])
    E = sp.diags(Ediag, format="csr")
    R = sp.diags(np.concatenate([np.full(nE, sig * A), np.zeros(nB)]), format="csr")
    B = sp.csr_matrix((nE + nB, 0))
    rng = np.random.default_rng(4)
    samples = [rng.standard_normal(nE + nB) for _ in range(2)]
    return build_ph_system(
        nE + nB, 0, E, lambda x: x, J, R, B,
        lambda x: 0.5 * float(x @ (Ediag * x)),
        lambda x: Ediag * x,
        effort_jacobian=sp.identity(nE + nB, format="csr"),
        linear=True, name=f"maxwell2d_{grid.mode}", sample_states=samples,
        meta={"grid": grid, "n_E": nE},
    )


def discrete_divergence(grid: EmGrid2D, x, field="B"):
    """Staggered divergence of ``B`` (TM, on cells) or ``E`` (TE, on interior nodes)."""
    nx, ny = grid.nx, grid.ny
    mx, my = grid._npts(nx), grid._npts(ny)
    dx, dy = grid._d(nx, grid.hx), grid._d(ny, grid.hy)
    Ef, Bf = grid.split(np.asarray(x, dtype=float))
    if field == "B":
        if grid.mode != "TM":
            return np.zeros(nx * ny)
        nbx = mx * ny
        Bx, By = Bf[:nbx], Bf[nbx:]
        return sp.kron(dx, sp.identity(ny)) @ Bx + sp.kron(sp.identity(nx), dy) @ By
    if field == "E":
        if grid.mode != "TE":
            return np.zeros(0)
        _, (Sx, Sy), _ = grid.operators()
        Ex, Ey = Sx @ Ef[: Sx.shape[1]], Sy @ Ef[Sx.shape[1]:]
        div = -(sp.kron(dx.T, sp.identity(my)) @ Ex + sp.kron(sp.identity(mx), dy.T) @ Ey)
        inner = (grid._interior_nodes(nx)[:, None] * my + grid._interior_nodes(ny)[None, :]).ravel()
        return div[inner]
    raise ConfigError("field must be 'B' or 'E'")


class PoyntingFlow(NamedTuple):
    power: float
    periodic: bool


def poynting_boundary_flow(state, grid, material: EmMaterial, boundary_values=None, strict=False):
    """Boundary power inflow ``sum (1/mu)(B x E) . nu`` (two-point rule in 1D).

    ``boundary_values`` optionally supplies ``((E_left, B_left), (E_right, B_right))``;
    otherwise boundary ``E`` comes from PEC (zero) or Dirichlet data
    ``boundary_values=(E_left, E_right)`` paired with the nearest cell ``B``.
    Periodic grids return ``PoyntingFlow(0.0, True)`` (or raise
    :class:`PeriodicBoundary` with ``strict=True``).
    """
    if grid.periodic:
        if strict:
            raise PeriodicBoundary("no boundary on a periodic grid")
        return PoyntingFlow(0.0, True)
    if isinstance(grid, EmGrid2D):
        return PoyntingFlow(0.0, False)
    n = grid.n
    mu_c = material.cells("mu", (n,))
    _, B = grid.split(np.asarray(state, dtype=float))
    if boundary_values is not None and np.ndim(boundary_values[0]) == 1:
        (EL, BL), (ER, BR) = boundary_values
    else:
        EL = ER = 0.0
        if boundary_values is not None:
            EL, ER = boundary_values
        if grid.left == "pec":
            EL = 0.0
        if grid.right == "pec":
            ER = 0.0
        BL, BR = B[0], B[-1]
    return PoyntingFlow(float(BL * EL / mu_c[0] - BR * ER / mu_c[-1]), False)


def maxwell_rhs_periodic3d(grid: PeriodicGrid3D, E, B, material: EmMaterial):
    """Collocated central-difference ``(dE/dt, dB/dt)`` on a periodic box."""
    eps = np.asarray(material.epsilon, dtype=float)
    mu = np.asarray(material.mu, dtype=float)
    sig = np.asarray(material.sigma, dtype=float)
    if eps.ndim:
        eps = eps[..., None]
    if mu.ndim:
        mu = mu[..., None]
    if sig.ndim:
        sig = sig[..., None]
    Edot = (grid.curl(B / mu) - sig * E) / eps
    Bdot = -grid.curl(E)
    return Edot, Bdot


# --------------------------------------------------------------- potentials


class PotentialSolution(NamedTuple):
    Phi: np.ndarray
    E: np.ndarray
    J: np.ndarray
    D: np.ndarray


def _node_coords(grid):
    if isinstance(grid, EmGrid1D):
        return (np.linspace(0.0, grid.length, grid.n + 1),)
    return np.linspace(0.0, grid.lx, grid.nx + 1), np.linspace(0.0, grid.ly, grid.ny + 1)


def _face_value(spec, coords):
    if callable(spec):
        return np.asarray(spec(*coords), dtype=float)
    return np.broadcast_to(np.asarray(spec, dtype=float), np.broadcast(*coords).shape if len(coords) > 1 else coords[0].shape)


def _cell_to_node_2d(c):
    p = np.pad(c, 1, mode="edge")
    return 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])


def _potential_matrix(grid, eps_cells):
    """Node-based finite-volume operator ``-div(eps grad .)`` (symmetric) and control volumes."""
    if isinstance(grid, EmGrid1D):
        n, h = grid.n, grid.h
        m = n + 1
        rows, cols, vals = [], [], []
        for j in range(n):
            g = eps_cells[j] / h
            for a, b in ((j, j + 1), (j + 1, j)):
                rows += [a, a]
                cols += [a, b]
                vals += [g, -g]
        Lm = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
        V = np.full(m, h)
        V[0] = V[-1] = 0.5 * h
        return Lm, V
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    mx, my = nx + 1, ny + 1
    idx = np.arange(mx * my).reshape(mx, my)
    rows, cols, vals = [], [], []
    # x-edges between (i, j) and (i+1, j): dual face length hy (halved on y-boundary)
    for i in range(nx):
        for j in range(my):
            adj = [eps_cells[i, jj] for jj in (j - 1, j) if 0 <= jj < ny]
            g = sum(adj) * 0.5 * hy / hx
            a, b = idx[i, j], idx[i + 1, j]
            rows += [a, a, b, b]
            cols += [a, b, b, a]
            vals += [g, -g, g, -g]
    for i in range(mx):
        for j in range(ny):
            adj = [eps_cells[ii, j] for ii in (i - 1, i) if 0 <= ii < nx]
            g = sum(adj) * 0.5 * hx / hy
            a, b = idx[i, j], idx[i, j + 1]
            rows += [a, a, b, b]
            cols += [a, b, b, a]
            vals += [g, -g, g, -g]
    Lm = sp.csr_matrix((vals, (rows, cols)), shape=(mx * my, mx * my))
    wx = np.full(mx, hx)
    wx[0] = wx[-1] = 0.5 * hx
    wy = np.full(my, hy)
    wy[0] = wy[-1] = 0.5 * hy
    return Lm, np.outer(wx, wy).ravel()


def _boundary_node_sets(grid):
    if isinstance(grid, EmGrid1D):
        return {"left": np.array([0]), "right": np.array([grid.n])}
    mx, my = grid.nx + 1, grid.ny + 1
    idx = np.arange(mx * my).reshape(mx, my)
    return {"left": idx[0, :], "right": idx[-1, :], "bottom": idx[:, 0], "top": idx[:, -1]}


def _face_coords(grid, face):
    coords = _node_coords(grid)
    if len(coords) == 1:
        return (np.array([coords[0][0] if face == "left" else coords[0][-1]]),)
    x, y = coords
    return {
        "left": (np.full(y.size, x[0]), y),
        "right": (np.full(y.size, x[-1]), y),
        "bottom": (x, np.full(x.size, y[0])),
        "top": (x, np.full(x.size, y[-1])),
    }[face]


def solve_potential(grid, material: EmMaterial, rho_c, dirichlet):
    """Solve ``div(eps grad Phi) = -rho_c`` on grid nodes.

    ``dirichlet`` maps face names to a value, an array along the face or a
    callable of node coordinates; other faces are insulating (zero normal
    flux).  ``rho_c`` is a node field (or scalar).  Returns
    :class:`PotentialSolution` with ``E = -grad Phi`` (centered differences),
    ``J = sigma E`` and ``D = eps E``.
    """
    if isinstance(grid, EmGrid1D):
        shape_c, shape_n = (grid.n,), (grid.n + 1,)
    else:
        shape_c, shape_n = (grid.nx, grid.ny), (grid.nx + 1, grid.ny + 1)
    if not dirichlet:
        raise SingularSystem("pure Neumann problem: at least one Dirichlet face is required")
    faces = _boundary_node_sets(grid)
    for face in dirichlet:
        if face not in faces:
            raise ConfigError(f"unknown face {face!r}")
    eps_c = material.cells("epsilon", shape_c)
    Lm, V = _potential_matrix(grid, eps_c)
    N = Lm.shape[0]
    phi = np.zeros(N)
    fixed = np.zeros(N, dtype=bool)
    for face, spec in dirichlet.items():
        nodes = faces[face]
        phi[nodes] = _face_value(spec, _face_coords(grid, face)).ravel()
        fixed[nodes] = True
    rho = np.broadcast_to(np.asarray(rho_c, dtype=float), shape_n).ravel()
    free = ~fixed
    A = Lm[free][:, free].tocsc()
    rhs = rho[free] * V[free] - Lm[free][:, fixed] @ phi[fixed]
    try:
        phi[free] = spla.spsolve(A, rhs)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from None
    if not np.all(np.isfinite(phi)):
        raise SingularSystem("potential solve produced non-finite values")
    Phi = phi.reshape(shape_n)
    if isinstance(grid, EmGrid1D):
        Efield = -np.gradient(Phi, grid.h, edge_order=2)
        eps_n = np.pad(_node_average(eps_c, False), 1, mode="edge")
        eps_n[0], eps_n[-1] = eps_c[0], eps_c[-1]
        sig_c = material.cells("sigma", shape_c)
        sig_n = np.pad(_node_average(sig_c, False), 1, mode="edge")
        sig_n[0], sig_n[-1] = sig_c[0], sig_c[-1]
        return PotentialSolution(Phi, Efield, sig_n * Efield, eps_n * Efield)
    gx, gy = np.gradient(Phi, grid.hx, grid.hy, edge_order=2)
    Efield = -np.stack([gx, gy], axis=-1)
    eps_n = _cell_to_node_2d(eps_c)[..., None]
    sig_n = _cell_to_node_2d(material.cells("sigma", shape_c))[..., None]
    return PotentialSolution(Phi, Efield, sig_n * Efield, eps_n * Efield)


# ------------------------------------------------------------ eddy currents


def _eddy_grid(grid):
    if not isinstance(grid, EmGrid2D):
        raise ConfigError("eddy-current problems live on a 2D grid (A3 on nodes)")
    return grid.nx + 1, grid.ny + 1


def _laplacian_nodes(grid: EmGrid2D):
    """5-point Laplacian on interior nodes with homogeneous Dirichlet data."""
    mx, my = grid.nx + 1, grid.ny + 1
    ix, iy = mx - 2, my - 2

    def d2(m, h):
        e = np.ones(m)
        return sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1]) / h**2

    return (sp.kron(d2(ix, grid.hx), sp.identity(iy)) + sp.kron(sp.identity(ix), d2(iy, grid.hy))).tocsr()


def _interior(a):
    return a[1:-1, 1:-1]


def eddy_transient_rhs(A3, grid: EmGrid2D, material: EmMaterial, grad_phi_source):
    """``dA3/dt = ((1/mu) lap A3 - sigma dPhi/dx3) / sigma`` with ``A3 = 0`` on the boundary.

    Material fields and ``grad_phi_source`` live on nodes (or are scalars).
    """
    shape = _eddy_grid(grid)
    A3 = np.asarray(A3, dtype=float).reshape(shape)
    mu = np.broadcast_to(np.asarray(material.mu, dtype=float), shape)
    sig = np.broadcast_to(np.asarray(material.sigma, dtype=float), shape)
    g = np.broadcast_to(np.asarray(grad_phi_source, dtype=float), shape)
    si = _interior(sig)
    bad = np.argwhere(~(si > 0))
    if bad.size:
        i, j = bad[0] + 1
        raise ZeroConductivity(f"sigma = 0 at interior node ({i}, {j})")
    lap = (_laplacian_nodes(grid) @ _interior(A3).ravel()).reshape(si.shape)
    out = np.zeros(shape)
    out[1:-1, 1:-1] = (lap / _interior(mu) - si * _interior(g)) / si
    return out


def eddy_steady_solve(grid: EmGrid2D, material: EmMaterial, grad_phi_source):
    """Steady state ``(1/mu) lap A3 = sigma dPhi/dx3`` with ``A3 = 0`` on the boundary."""
    return eddy_harmonic_solve(grid, material, 0.0, grad_phi_source).real


def eddy_harmonic_solve(grid: EmGrid2D, material: EmMaterial, omega, grad_phi_phasor):
    """Complex ``A3`` of ``-(1/mu) lap A + j w (sigma + j w eps) A = -(sigma + j w eps) grad Phi``."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    shape = _eddy_grid(grid)
    for name in ("mu",):
        if np.ndim(getattr(material, name)) != 0:
            raise ConfigError("eddy solves take a uniform permeability")
    mu = float(material.mu)
    sig = np.broadcast_to(np.asarray(material.sigma, dtype=float), shape)
    eps = np.broadcast_to(np.asarray(material.epsilon, dtype=float), shape)
    g = np.broadcast_to(np.asarray(grad_phi_phasor, dtype=complex), shape)
    k = _interior(sig) + 1j * omega * _interior(eps)
    L = _laplacian_nodes(grid)
    M = (-(1.0 / mu) * L + sp.diags((1j * omega * k).ravel())).tocsc()
    rhs = -(k * _interior(g)).ravel()
    if not np.any(rhs):
        return np.zeros(shape, dtype=complex)
    try:
        sol = spla.spsolve(M, rhs)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from None
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("eddy-current system is singular")
    out = np.zeros(shape, dtype=complex)
    out[1:-1, 1:-1] = sol.reshape(k.shape)
    return out


def total_current(grid: EmGrid2D, material: EmMaterial, omega, A3, grad_phi, mask):
    """Midpoint quadrature of ``(sigma + j w eps)(-j w A - grad Phi)`` over masked cells.

    All fields are cell-centered arrays of shape ``(nx, ny)`` (or scalars).
    """
    shape = (grid.nx, grid.ny)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), shape)
    if not mask.any():
        raise EmptyRegion("mask selects no cells")
    sig = np.broadcast_to(np.asarray(material.sigma, dtype=float), shape)
    eps = np.broadcast_to(np.asarray(material.epsilon, dtype=float), shape)
    A = np.broadcast_to(np.asarray(A3, dtype=complex), shape)
    g = np.broadcast_to(np.asarray(grad_phi, dtype=complex), shape)
    integrand = (sig + 1j * omega * eps) * (-1j * omega * A - g)
    return complex(np.sum(integrand[mask]) * grid.hx * grid.hy)
