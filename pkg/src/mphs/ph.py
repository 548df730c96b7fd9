"""Finite-dimensional port-Hamiltonian systems and structure-preserving integration.

A system is written in descriptor form

    E(x) dx/dt = (J(x) - R(x)) e(x) + B(x) u,    y = B(x)^T e(x),

with ``E^T e = grad H``.  All operators may be constant (dense ndarray or
scipy.sparse matrix) or callables of the state returning such a matrix.
"""

from __future__ import annotations

import inspect
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    NonConvergence,
    PortMismatch,
    SingularFlowMap,
    StepError,
    StructureError,
)

__all__ = [
    "PhSystem",
    "EnergyTrace",
    "build_ph_system",
    "check_structure",
    "step_implicit_midpoint",
    "simulate",
    "interconnect",
    "MidpointSolver",
]

SKEW_TOL = 1e-12
PSD_TOL = 1e-12
GRAD_RTOL = 1e-8
CONSISTENCY_TOL = 1e-10
NEWTON_TOL = 1e-12
NEWTON_MAX = 50


def _at(op, x):
    return op(x) if callable(op) else op


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


def _is_sparse(*ops):
    return any(sp.issparse(o) for o in ops)


def _fd_gradient(fun, x, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


@dataclass(frozen=True, eq=False)
class PhSystem:
    """Descriptor port-Hamiltonian system.

    Parameters
    ----------
    n_state, n_input
        State and input dimensions.
    E
        Flow map, ``n_e x n_state`` (may be rectangular or singular).
    effort
        State -> effort vector of length ``n_e``.
    J, R
        Structure (skew) and dissipation (symmetric PSD) maps, ``n_e x n_e``.
    B
        Input map, ``n_e x n_input``.
    hamiltonian
        State -> stored energy.
    grad_H
        Optional analytic gradient; central differences otherwise.
    effort_jacobian
        Optional d(effort)/d(state), constant matrix or callable.
    flow_jacobian
        Optional callable ``(x, u) -> d/dx[(J-R)e + Bu]``; overrides
        everything else when building Newton matrices.
    linear
        Declares that E, J, R, B are constant and the effort is linear, so
        the implicit step matrix can be factorized once.
    """

    n_state: int
    n_input: int
    E: Any
    effort: Callable[[np.ndarray], np.ndarray]
    J: Any
    R: Any
    B: Any
    hamiltonian: Callable[[np.ndarray], float]
    grad_H: Optional[Callable[[np.ndarray], np.ndarray]] = None
    effort_jacobian: Any = None
    flow_jacobian: Optional[Callable] = None
    linear: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_e(self):
        E = self.E
        if callable(E):
            return int(self.meta.get("n_e", self.n_state))
        return E.shape[0]

    def E_at(self, x):
        return _at(self.E, x)

    def J_at(self, x):
        return _at(self.J, x)

    def R_at(self, x):
        return _at(self.R, x)

    def B_at(self, x):
        return _at(self.B, x)

    def gradient(self, x):
        if self.grad_H is not None:
            return np.asarray(self.grad_H(x), dtype=float)
        return _fd_gradient(self.hamiltonian, x)

    def output(self, x):
        return self.B_at(x).T @ self.effort(x)

    def flow(self, x, u=None):
        """Right-hand side ``(J - R) e + B u`` at state ``x``."""
        e = self.effort(x)
        rhs = self.J_at(x) @ e - self.R_at(x) @ e
        if self.n_input and u is not None:
            rhs = rhs + self.B_at(x) @ np.asarray(u, dtype=float)
        return np.asarray(rhs, dtype=float)

    def flow_derivative(self, x, u=None):
        """Jacobian of :meth:`flow` with respect to the state."""
        if self.flow_jacobian is not None:
            return self.flow_jacobian(x, u)
        constant = not any(callable(op) for op in (self.J, self.R, self.B))
        if self.effort_jacobian is not None and constant:
            De = _at(self.effort_jacobian, x)
            return (self.J - self.R) @ De
        f0 = self.flow(x, u)
        cols = np.empty((f0.size, x.size))
        for i in range(x.size):
            h = 1.5e-8 * max(1.0, abs(x[i]))
            xh = x.copy()
            xh[i] += h
            cols[:, i] = (self.flow(xh, u) - f0) / h
        return cols


def _random_states(x_ref, count, rng):
    x_ref = np.asarray(x_ref, dtype=float)
    scale = max(1.0, float(np.max(np.abs(x_ref)))) if x_ref.size else 1.0
    return [x_ref] + [x_ref + 1e-2 * scale * rng.standard_normal(x_ref.shape) for _ in range(count - 1)]


def _check_skew(J, label, rng, trials=5):
    Jd = J
    sym = Jd + Jd.T
    for _ in range(trials):
        e = rng.standard_normal(J.shape[0])
        q = 0.5 * float(e @ (sym @ e))
        if abs(q) > SKEW_TOL * float(e @ e):
            raise StructureError("skew", f"{label}: |e^T J e| = {abs(q):.3e} exceeds {SKEW_TOL}*|e|^2")
    return float(abs(sym).max()) if sym.shape[0] else 0.0


def _min_max_eig(R):
    n = R.shape[0]
    if n == 0:
        return 0.0, 0.0
    if sp.issparse(R) and n > 1500:
        Rs = 0.5 * (R + R.T)
        lo = spla.eigsh(Rs.tocsc(), k=1, which="SA", return_eigenvectors=False)[0]
        hi = spla.eigsh(Rs.tocsc(), k=1, which="LM", return_eigenvectors=False)[0]
        return float(lo), abs(float(hi))
    Rd = _dense(R)
    w = np.linalg.eigvalsh(0.5 * (Rd + Rd.T))
    return float(w[0]), float(np.max(np.abs(w)))


def _check_psd(R, label):
    diff = R - R.T
    asym = float(abs(diff).max()) if R.shape[0] else 0.0
    scale = float(abs(R).max()) if R.shape[0] else 0.0
    if asym > PSD_TOL * max(scale, 1e-300) and asym > 0:
        raise StructureError("psd", f"{label}: R not symmetric (max |R-R^T| = {asym:.3e})")
    lo, hi = _min_max_eig(R)
    if lo < -PSD_TOL * hi:
        raise StructureError("psd", f"{label}: min eigenvalue {lo:.3e} < -{PSD_TOL}*|R|")
    return lo, hi


def check_structure(system, states, rng=None, check_gradient=True):
    """Run the three structural checks at the given states.

    Returns a dict of measured quantities; raises :class:`StructureError`
    on the first violation.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    report = {"skew_max_sym": 0.0, "psd_min_eig": math.inf, "grad_rel_err": 0.0}
    n_e = None
    for k, x in enumerate(states):
        x = np.asarray(x, dtype=float)
        if x.shape != (system.n_state,):
            raise StructureError("dims", f"state has shape {x.shape}, expected ({system.n_state},)")
        E = system.E_at(x)
        J = system.J_at(x)
        R = system.R_at(x)
        B = system.B_at(x)
        n_e = E.shape[0]
        if E.shape[1] != system.n_state:
            raise StructureError("dims", f"E has {E.shape[1]} columns, expected {system.n_state}")
        for name, op in (("J", J), ("R", R)):
            if op.shape != (n_e, n_e):
                raise StructureError("dims", f"{name} has shape {op.shape}, expected ({n_e}, {n_e})")
        if B.shape != (n_e, system.n_input):
            raise StructureError("dims", f"B has shape {B.shape}, expected ({n_e}, {system.n_input})")
        e = np.asarray(system.effort(x), dtype=float)
        if e.shape != (n_e,):
            raise StructureError("dims", f"effort has shape {e.shape}, expected ({n_e},)")
        report["skew_max_sym"] = max(report["skew_max_sym"], _check_skew(J, f"state {k}", rng))
        lo, _ = _check_psd(R, f"state {k}")
        report["psd_min_eig"] = min(report["psd_min_eig"], lo)
        if check_gradient:
            lhs = np.asarray(E.T @ e).ravel()
            g = system.gradient(x)
            denom = max(np.linalg.norm(g), np.linalg.norm(lhs))
            err = 0.0 if denom == 0 else float(np.linalg.norm(lhs - g) / denom)
            if err > GRAD_RTOL:
                raise StructureError("gradient", f"state {k}: |E^T e - grad H| / |grad H| = {err:.3e}")
            report["grad_rel_err"] = max(report["grad_rel_err"], err)
    report["n_e"] = n_e
    return report


def _left_null_space(E):
    Ed = _dense(E)
    u, s, _ = np.linalg.svd(Ed, full_matrices=True)
    tol = max(Ed.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return u[:, rank:]


def build_ph_system(
    n_state,
    n_input,
    E,
    effort,
    J,
    R,
    B,
    hamiltonian,
    grad_H=None,
    *,
    effort_jacobian=None,
    flow_jacobian=None,
    linear=False,
    name="",
    sample_states=None,
    x0=None,
    u0=None,
    meta=None,
    seed=0,
):
    """Construct a :class:`PhSystem` and validate it.

    The skew-symmetry of ``J``, positive semidefiniteness of ``R`` and
    ``E^T e(x) = grad H(x)`` are checked at ``sample_states`` (default: the
    zero state plus small random perturbations of it, or of ``x0``).
    Rank-deficient or rectangular ``E`` additionally requires that the
    algebraic rows are consistent at ``x0`` (if given).
    """
    rng = np.random.default_rng(seed)
    meta = dict(meta or {})
    if callable(E) and "n_e" not in meta:
        probe = x0 if x0 is not None else np.zeros(n_state)
        meta["n_e"] = E(np.asarray(probe, dtype=float)).shape[0]
    system = PhSystem(
        n_state=int(n_state),
        n_input=int(n_input),
        E=E,
        effort=effort,
        J=J,
        R=R,
        B=B,
        hamiltonian=hamiltonian,
        grad_H=grad_H,
        effort_jacobian=effort_jacobian,
        flow_jacobian=flow_jacobian,
        linear=bool(linear),
        name=name,
        meta=meta,
    )
    if sample_states is None:
        ref = np.zeros(n_state) if x0 is None else np.asarray(x0, dtype=float)
        sample_states = _random_states(ref, 3, rng)
    check_structure(system, sample_states, rng=rng)
    if x0 is not None:
        _check_consistency(system, np.asarray(x0, dtype=float), u0)
    return system


def _check_consistency(system, x0, u0):
    E = system.E_at(x0)
    if E.shape[0] == E.shape[1]:
        if E.shape[0] > 400:
            return
        s = np.linalg.svd(_dense(E), compute_uv=False)
        if s.size and s[-1] > E.shape[0] * np.finfo(float).eps * s[0]:
            return
    N = _left_null_space(E)
    if N.shape[1] == 0:
        return
    u = None if u0 is None else np.asarray(u0, dtype=float)
    f = system.flow(x0, u)
    viol = float(np.max(np.abs(N.T @ f)))
    scale = max(1.0, float(np.max(np.abs(f))))
    if viol > CONSISTENCY_TOL * scale:
        raise StructureError("consistency", f"algebraic rows violated at x0 by {viol:.3e}")


@dataclass
class EnergyTrace:
    """Per-sample energy bookkeeping of a simulation.

    Entry ``k`` of the power and residual arrays belongs to the step that
    ends at ``times[k]``; entry 0 is zero.
    """

    times: np.ndarray
    hamiltonian: np.ndarray
    dissipated_power: np.ndarray
    supplied_power: np.ndarray
    balance_residual: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("hamiltonian", "dissipated_power", "supplied_power", "balance_residual"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"EnergyTrace.{name} length differs from times")

    @property
    def max_abs_residual(self):
        return float(np.max(np.abs(self.balance_residual))) if len(self.times) else 0.0

    def rows(self):
        return zip(self.times, self.hamiltonian, self.dissipated_power, self.supplied_power, self.balance_residual)

    def to_csv(self, path):
        from .io import write_csv

        write_csv(path, ["t", "H", "P_diss", "P_supplied", "residual"], self.rows())


def _input_callable(u, n_input):
    """Normalize an input signal to ``f(t, x) -> ndarray``."""
    if u is None or n_input == 0:
        zero = np.zeros(n_input)
        return lambda t, x: zero
    if callable(u):
        try:
            nargs = len(inspect.signature(u).parameters)
        except (TypeError, ValueError):
            nargs = 2
        if nargs == 1:
            return lambda t, x: np.atleast_1d(np.asarray(u(t), dtype=float))
        return lambda t, x: np.atleast_1d(np.asarray(u(t, x), dtype=float))
    const = np.atleast_1d(np.asarray(u, dtype=float))
    if const.shape != (n_input,):
        raise ValueError(f"input has shape {const.shape}, expected ({n_input},)")
    return lambda t, x: const


class _Factor:
    def __init__(self, M):
        if sp.issparse(M):
            try:
                self._lu = spla.splu(sp.csc_matrix(M))
            except RuntimeError as exc:
                raise SingularFlowMap(f"implicit step matrix is singular: {exc}") from None
            diag = np.abs(self._lu.U.diagonal())
            if diag.size and diag.min() <= diag.size * np.finfo(float).eps * diag.max():
                raise SingularFlowMap("implicit step matrix is numerically rank deficient")
            self._solve = self._lu.solve
        else:
            M = np.asarray(M, dtype=float)
            if M.shape[0] != M.shape[1]:
                raise SingularFlowMap(f"implicit step matrix is not square: {M.shape}")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(M, check_finite=False)
            diag = np.abs(np.diag(lu))
            if diag.size and (not np.all(np.isfinite(diag)) or diag.min() <= diag.size * np.finfo(float).eps * diag.max()):
                raise SingularFlowMap("implicit step matrix is numerically rank deficient")
            self._solve = lambda b: sla.lu_solve((lu, piv), b, check_finite=False)

    def solve(self, b):
        return self._solve(b)


class MidpointSolver:
    """Implicit midpoint stepper with Jacobian reuse.

    ``method="midpoint"`` solves ``E(x_m)(x+ - x)/dt = (J-R)(x_m) e(x_m) + B u``.
    ``method="discrete_gradient"`` replaces ``e(x_m)`` by
    ``E(x_m)^{-T}`` times the Gonzalez discrete gradient, giving an exact
    energy balance for any Hamiltonian (square invertible ``E`` only).
    """

    def __init__(self, system, dt, newton_tol=NEWTON_TOL, newton_max=NEWTON_MAX, method="midpoint", reuse=4):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if method not in ("midpoint", "discrete_gradient"):
            raise ValueError(f"unknown method {method!r}")
        self.system = system
        self.dt = float(dt)
        self.tol = float(newton_tol)
        self.max_iter = int(newton_max)
        self.method = method
        self._factor = None
        self._factor_dt = None
        self.reuse = int(reuse)
        self.last_iterations = 0

    def _matrix(self, xm, um, dt):
        s = self.system
        E = s.E_at(xm)
        A = s.flow_derivative(xm, um)
        if _is_sparse(E, A):
            return sp.csc_matrix(E) / dt - 0.5 * sp.csc_matrix(A)
        return _dense(E) / dt - 0.5 * _dense(A)

    def _effort(self, x, xp, xm):
        s = self.system
        if self.method == "midpoint":
            return s.effort(xm)
        g = s.gradient(xm)
        d = xp - x
        dd = float(d @ d)
        if dd > 0:
            g = g + (s.hamiltonian(xp) - s.hamiltonian(x) - float(g @ d)) / dd * d
        E = _dense(s.E_at(xm))
        return np.linalg.solve(E.T, g)

    def _residual(self, x, xp, u_fun, t_mid, dt):
        s = self.system
        xm = 0.5 * (x + xp)
        um = u_fun(t_mid, xm)
        e = self._effort(x, xp, xm)
        rate = np.asarray(s.E_at(xm) @ (xp - x), dtype=float) / dt
        f = np.asarray(s.J_at(xm) @ e - s.R_at(xm) @ e, dtype=float)
        if s.n_input:
            f = f + np.asarray(s.B_at(xm) @ um, dtype=float)
        scale = max(np.linalg.norm(rate), np.linalg.norm(f))
        return rate - f, scale, xm, um

    def step(self, x, u_fun, t=0.0, dt=None, step_index=None):
        """Advance one step; returns ``(x_next, x_mid, u_mid, effort_mid)``."""
        dt = self.dt if dt is None else float(dt)
        s = self.system
        x = np.asarray(x, dtype=float)
        t_mid = t + 0.5 * dt
        xp = x.copy()
        if self._factor is not None and (self._factor_dt != dt):
            self._factor = None
        fresh = False
        res_norm = math.inf
        for it in range(1, self.max_iter + 1):
            r, scale, xm, um = self._residual(x, xp, u_fun, t_mid, dt)
            res_norm = float(np.linalg.norm(r))
            if res_norm == 0.0 or res_norm <= self.tol * scale:
                self.last_iterations = it - 1
                return self._finish(x, xp, u_fun, t_mid)
            stale = not s.linear and not fresh and it > self.reuse
            if self._factor is None or stale:
                self._factor = _Factor(self._matrix(xm, um, dt))
                self._factor_dt = dt
                fresh = True
            delta = self._factor.solve(-r)
            xp = xp + delta
            if np.linalg.norm(delta) <= 4 * np.finfo(float).eps * max(1.0, np.linalg.norm(xp)):
                self.last_iterations = it
                return self._finish(x, xp, u_fun, t_mid)
        r, scale, _, _ = self._residual(x, xp, u_fun, t_mid, dt)
        res_norm = float(np.linalg.norm(r))
        if res_norm <= self.tol * scale:
            self.last_iterations = self.max_iter
            return self._finish(x, xp, u_fun, t_mid)
        raise NonConvergence(res_norm / max(scale, 1e-300), self.max_iter, step_index)

    def _finish(self, x, xp, u_fun, t_mid):
        if not self.system.linear and self.last_iterations >= self.reuse:
            self._factor = None
        xm = 0.5 * (x + xp)
        um = u_fun(t_mid, xm)
        return xp, xm, um, self._effort(x, xp, xm)


def step_implicit_midpoint(system, x, u=None, dt=None, newton_tol=NEWTON_TOL, newton_max=NEWTON_MAX):
    """One implicit-midpoint step.

    ``u`` is the input at the midpoint: ``None``, a constant vector, or a
    callable of the midpoint state.
    """
    if dt is None or not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if callable(u):
        u_fun = lambda t, xm: np.atleast_1d(np.asarray(u(xm), dtype=float))  # noqa: E731
    else:
        u_fun = _input_callable(u, system.n_input)
    solver = MidpointSolver(system, dt, newton_tol, newton_max)
    return solver.step(np.asarray(x, dtype=float), u_fun)[0]


def simulate(
    system,
    x0,
    u=None,
    t_end=None,
    dt=None,
    newton_tol=NEWTON_TOL,
    newton_max=NEWTON_MAX,
    method="midpoint",
    reuse=4,
):
    """Integrate from ``x0`` to ``t_end`` with step ``dt``.

    ``u`` may be ``None``, a constant vector, ``u(t)`` or ``u(t, x)``.
    Returns ``(trajectory, trace)`` where ``trajectory`` has
    ``ceil(t_end/dt) + 1`` rows; the last step is shortened to land on
    ``t_end`` exactly.
    """
    if t_end is None or not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if dt is None or not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    u_fun = _input_callable(u, system.n_input)
    solver = MidpointSolver(system, dt, newton_tol, newton_max, method=method, reuse=reuse)
    x = np.asarray(x0, dtype=float).copy()
    traj = np.empty((n_steps + 1, x.size))
    traj[0] = x
    times = np.zeros(n_steps + 1)
    H = np.zeros(n_steps + 1)
    diss = np.zeros(n_steps + 1)
    supp = np.zeros(n_steps + 1)
    resid = np.zeros(n_steps + 1)
    H[0] = system.hamiltonian(x)
    t = 0.0
    for k in range(n_steps):
        h = min(dt, t_end - t) if k == n_steps - 1 else dt
        try:
            xp, xm, um, em = solver.step(x, u_fun, t=t, dt=h, step_index=k)
        except StepError:
            raise
        except Exception as exc:  # noqa: BLE001 - attach step index
            raise StepError(k, exc) from exc
        Rm = system.R_at(xm)
        diss[k + 1] = float(em @ (Rm @ em))
        if system.n_input:
            supp[k + 1] = float(em @ (system.B_at(xm) @ um))
        t = t + h
        times[k + 1] = t
        H[k + 1] = system.hamiltonian(xp)
        resid[k + 1] = H[k + 1] - H[k] - h * (-diss[k + 1] + supp[k + 1])
        traj[k + 1] = xp
        x = xp
    return traj, EnergyTrace(times, H, diss, supp, resid)


def _block_diag(a, b):
    if _is_sparse(a, b):
        return sp.block_diag([sp.csr_matrix(a), sp.csr_matrix(b)], format="csr")
    return sla.block_diag(_dense(a), _dense(b))


def interconnect(a, b, ports_a: Sequence[int], ports_b: Sequence[int], name=""):
    """Power-preserving gyrator interconnection of two systems.

    The selected ports are closed by ``u_a = y_b`` and ``u_b = -y_a``; the
    remaining ports of both systems stay open (``a``'s first).
    """
    ports_a = list(ports_a)
    ports_b = list(ports_b)
    if len(ports_a) != len(ports_b):
        raise PortMismatch(f"{len(ports_a)} ports of the first system vs {len(ports_b)} of the second")
    for p, sysm in ((ports_a, a), (ports_b, b)):
        if any(i < 0 or i >= sysm.n_input for i in p) or len(set(p)) != len(p):
            raise PortMismatch(f"invalid port indices {p} for system with {sysm.n_input} inputs")
    na, nb = a.n_state, b.n_state
    free_a = [i for i in range(a.n_input) if i not in ports_a]
    free_b = [i for i in range(b.n_input) if i not in ports_b]

    def split(x):
        return x[:na], x[na:]

    def E(x):
        xa, xb = split(x)
        return _block_diag(a.E_at(xa), b.E_at(xb))

    def effort(x):
        xa, xb = split(x)
        return np.concatenate([a.effort(xa), b.effort(xb)])

    def J(x):
        xa, xb = split(x)
        Ba = _dense(a.B_at(xa))[:, ports_a]
        Bb = _dense(b.B_at(xb))[:, ports_b]
        C = Ba @ Bb.T
        Ja, Jb = _dense(a.J_at(xa)), _dense(b.J_at(xb))
        return np.block([[Ja, C], [-C.T, Jb]])

    def R(x):
        xa, xb = split(x)
        return _block_diag(a.R_at(xa), b.R_at(xb))

    def B(x):
        xa, xb = split(x)
        Ba = _dense(a.B_at(xa))[:, free_a]
        Bb = _dense(b.B_at(xb))[:, free_b]
        return sla.block_diag(Ba, Bb) if (Ba.size or Bb.size) else np.zeros((Ba.shape[0] + Bb.shape[0], 0))

    def H(x):
        xa, xb = split(x)
        return a.hamiltonian(xa) + b.hamiltonian(xb)

    def gradH(x):
        xa, xb = split(x)
        return np.concatenate([a.gradient(xa), b.gradient(xb)])

    constant = not any(callable(op) for s_ in (a, b) for op in (s_.E, s_.J, s_.R, s_.B))
    ops = {"E": E, "J": J, "R": R, "B": B}
    if constant:
        z = np.zeros(na + nb)
        ops = {k: v(z) for k, v in ops.items()}

    effort_jac = None
    if a.effort_jacobian is not None and b.effort_jacobian is not None:
        def effort_jac(x):
            xa, xb = split(x)
            return sla.block_diag(_dense(_at(a.effort_jacobian, xa)), _dense(_at(b.effort_jacobian, xb)))
        if not callable(a.effort_jacobian) and not callable(b.effort_jacobian):
            effort_jac = effort_jac(np.zeros(na + nb))

    x_ref = np.zeros(na + nb)
    samples = [np.concatenate([sa, sb]) for sa, sb in zip(
        a.meta.get("sample_states", [np.zeros(na)]) * 2, b.meta.get("sample_states", [np.zeros(nb)]) * 2)]
    return build_ph_system(
        na + nb,
        len(free_a) + len(free_b),
        ops["E"],
        effort,
        ops["J"],
        ops["R"],
        ops["B"],
        H,
        gradH,
        effort_jacobian=effort_jac,
        linear=a.linear and b.linear,
        name=name or f"({a.name or 'a'})<->({b.name or 'b'})",
        sample_states=samples or [x_ref],
        meta={"parts": (a, b), "n_e": a.n_e + b.n_e},
    )
