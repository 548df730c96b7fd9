"""Model order reduction and the model catalogue."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, EmptySnapshots, NoFeasibleModel, NonMinimalWarning, NotSPD, UnstableSystem

__all__ = [
    "LtiSystem",
    "ReducedModel",
    "ModalBasis",
    "CatalogueEntry",
    "ModelCatalogue",
    "balanced_truncation",
    "pod",
    "modal_truncation",
    "catalogue_select",
    "frequency_grid",
    "sampled_hinf_error",
]


def _mat(a, shape=None, name="matrix"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if shape is not None and a.shape != shape:
        raise ConfigError(f"{name} has shape {a.shape}, expected {shape}")
    return a


@dataclass(frozen=True)
class LtiSystem:
    """``E x' = A x + B u``, ``y = C x`` (dense)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: Optional[np.ndarray] = None

    def __post_init__(self):
        A = _mat(self.A, name="A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        B = B if B.ndim == 2 else B.reshape(n, -1)
        C = C if C.ndim == 2 else C.reshape(-1, n)
        if B.shape[0] != n or C.shape[1] != n:
            raise ConfigError(f"B {B.shape} / C {C.shape} do not match n = {n}")
        E = np.eye(n) if self.E is None else _mat(self.E, (n, n), "E")
        if n and np.linalg.matrix_rank(E) < n:
            raise ConfigError("E must be nonsingular")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "E", E)

    @property
    def n(self):
        return self.A.shape[0]

    def standard(self):
        """``(E^{-1} A, E^{-1} B, C)``."""
        lu = sla.lu_factor(self.E)
        return sla.lu_solve(lu, self.A), sla.lu_solve(lu, self.B), self.C

    def poles(self):
        if self.n == 0:
            return np.zeros(0, dtype=complex)
        return sla.eigvals(self.A, self.E)

    def is_stable(self):
        return bool(np.all(self.poles().real < 0))

    def transfer(self, s):
        """``C (s E - A)^{-1} B``."""
        if self.n == 0:
            return np.zeros((self.C.shape[0], self.B.shape[1]), dtype=complex)
        return self.C @ np.linalg.solve(s * self.E - self.A, self.B)

    def transform(self, T, S=None):
        """State change ``x = T z`` with optional left multiplier ``S``."""
        T = np.asarray(T, dtype=float)
        S = np.eye(self.n) if S is None else np.asarray(S, dtype=float)
        return LtiSystem(S @ self.A @ T, S @ self.B, self.C @ T, S @ self.E @ T)

    def to_dict(self):
        return {"E": self.E.tolist(), "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(np.array(d["A"], dtype=float), np.array(d["B"], dtype=float), np.array(d["C"], dtype=float),
                       None if d.get("E") is None else np.array(d["E"], dtype=float))
        except KeyError as exc:
            raise ConfigError(f"LTI description missing {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid LTI description: {exc}") from None

    @classmethod
    def from_thermal_network(cls, net, inputs=None, outputs=None):
        """LTI form ``diag(C) x' = A x + B u`` of a thermal network (``A`` as assembled there).

        ``inputs``/``outputs`` select node indices (default: all nodes).
        """
        from .thermal import assemble_network

        _, mats = assemble_network(net)
        C, A = mats["E"], mats["A"]
        N = C.shape[0]
        eye = np.eye(N)
        Bm = eye[:, list(range(N) if inputs is None else inputs)]
        Cm = eye[list(range(N) if outputs is None else outputs), :]
        return cls(A, Bm, Cm, C)


@dataclass
class ReducedModel:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    V: np.ndarray
    W: np.ndarray
    method: str
    hsv: Optional[np.ndarray] = None
    error_bound: Optional[float] = None
    singular_values: Optional[np.ndarray] = None

    @property
    def r(self):
        return self.A.shape[0]

    def system(self):
        return LtiSystem(self.A, self.B, self.C, self.E)

    def transfer(self, s):
        return self.system().transfer(s)

    def to_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "method": self.method, "r": self.r, "m": self.B.shape[1], "p": self.C.shape[0],
            "E": arr(self.E), "A": arr(self.A), "B": arr(self.B), "C": arr(self.C),
            "V": arr(self.V), "W": arr(self.W), "hsv": arr(self.hsv),
            "error_bound": self.error_bound, "singular_values": arr(self.singular_values),
        }

    @classmethod
    def from_dict(cls, d):
        def arr(key, cols=None):
            val = d.get(key)
            if val is None:
                return None
            a = np.array(val, dtype=float)
            return a.reshape(-1, cols) if cols is not None else a

        r, m, p = int(d["r"]), int(d["m"]), int(d["p"])
        return cls(
            E=arr("E").reshape(r, r), A=arr("A").reshape(r, r), B=arr("B").reshape(r, m),
            C=arr("C").reshape(p, r), V=arr("V"), W=arr("W"), method=d["method"],
            hsv=arr("hsv"), error_bound=d.get("error_bound"), singular_values=arr("singular_values"),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _psd_factor(P):
    """``L`` with ``L L^T = P`` for symmetric PSD ``P`` (Cholesky, eigen fallback)."""
    P = 0.5 * (P + P.T)
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(P)
        return U * np.sqrt(np.clip(w, 0.0, None))


def balanced_truncation(sys: LtiSystem, r=None, tol=None):
    """Square-root balanced truncation.

    Give either the order ``r`` or an absolute H-infinity tolerance ``tol``
    (the smallest ``r`` with ``2 sum_{i>r} hsv_i <= tol`` is used).
    """
    if (r is None) == (tol is None):
        raise ValueError("give exactly one of r or tol")
    A, B, C = sys.standard()
    n = sys.n
    lam = np.linalg.eigvals(A)
    if n and np.max(lam.real) >= 0:
        raise UnstableSystem(f"spectral abscissa {np.max(lam.real):.3e} >= 0")
    P = sla.solve_continuous_lyapunov(A, -B @ B.T)
    Q = sla.solve_continuous_lyapunov(A.T, -C.T @ C)
    Lp, Lq = _psd_factor(P), _psd_factor(Q)
    U, hsv, Zt = np.linalg.svd(Lq.T @ Lp)
    tails = np.concatenate([2.0 * np.cumsum(hsv[::-1])[::-1], [0.0]])
    if tol is not None:
        r = int(np.flatnonzero(tails <= tol)[0])
    r = int(r)
    if not 0 <= r <= n:
        raise ValueError(f"order {r} outside [0, {n}]")
    tiny = hsv <= 1e-12 * (hsv[0] if hsv.size else 1.0)
    if np.any(tiny):
        warnings.warn(f"{int(tiny.sum())} Hankel singular values are numerically zero (non-minimal system)",
                      NonMinimalWarning, stacklevel=2)
    if r == n:
        eye = np.eye(n)
        return ReducedModel(eye, A, B, C, eye, eye, "bt", hsv=hsv, error_bound=0.0)
    rank = int(np.sum(hsv > 1e-14 * (hsv[0] if hsv.size else 1.0)))
    if r > rank:
        warnings.warn(f"order {r} exceeds the numerical minimal order {rank}; using {rank}",
                      NonMinimalWarning, stacklevel=2)
        r = rank
    s = hsv[:r] ** -0.5
    V = Lp @ Zt[:r].T * s
    W = Lq @ U[:, :r] * s
    Ar, Br, Cr = W.T @ A @ V, W.T @ B, C @ V
    return ReducedModel(np.eye(r), Ar, Br, Cr, V, W, "bt", hsv=hsv, error_bound=float(tails[r]))


def pod(snapshots, energy_tol=1e-8, r=None):
    """POD basis of a snapshot matrix (columns are snapshots).

    Returns ``(V, s)``: the leading left singular vectors whose cumulative
    energy reaches ``1 - energy_tol`` (or exactly ``r`` of them) and all
    singular values.  Sign is fixed so the largest entry of each column is
    positive.
    """
    S = np.asarray(snapshots, dtype=float)
    if S.ndim != 2 or S.shape[1] == 0 or S.shape[0] == 0:
        raise EmptySnapshots("need an n x k snapshot matrix with k >= 1")
    U, s, _ = np.linalg.svd(S, full_matrices=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise EmptySnapshots("all snapshots are zero")
    if r is None:
        frac = np.cumsum(s**2) / total
        r = int(np.searchsorted(frac, 1.0 - energy_tol - 1e-15) + 1)
        r = min(r, s.size)
    V = U[:, :r].copy()
    idx = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[idx, np.arange(r)])
    return V, s


@dataclass
class ModalBasis:
    V: np.ndarray
    frequencies: np.ndarray
    eigenvalues: np.ndarray

    def project(self, M, D, K):
        V = self.V
        return V.T @ M @ V, None if D is None else V.T @ D @ V, V.T @ K @ V


def modal_truncation(M, K, r=None, omega_max=None):
    """Lowest-frequency eigenmodes of ``K phi = w^2 M phi``, mass-orthonormal.

    ``omega_max`` keeps every mode up to that angular frequency instead of
    a fixed count (the rest is left to a static correction by the caller).
    """
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    for name, X in (("M", M), ("K", K)):
        if X.ndim != 2 or X.shape[0] != X.shape[1] or not np.allclose(X, X.T, rtol=1e-12, atol=1e-14 * np.abs(X).max()):
            raise NotSPD(f"{name} must be a symmetric square matrix")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotSPD("mass matrix is not positive definite") from None
    lam, Phi = sla.eigh(K, M)
    freqs = np.sqrt(np.clip(lam, 0.0, None))
    if omega_max is not None:
        r = int(np.sum(freqs <= omega_max))
    if r is None:
        raise ValueError("give r or omega_max")
    if not 0 <= r <= lam.size:
        raise ValueError(f"order {r} outside [0, {lam.size}]")
    V = Phi[:, :r].copy()
    idx = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[idx, np.arange(r)])
    return ModalBasis(V, freqs[:r], lam[:r])


def frequency_grid(sys: LtiSystem, count=200):
    """``count`` log-spaced angular frequencies spanning the pole magnitudes by 1e3 either side."""
    mags = np.abs(sys.poles())
    mags = mags[mags > 0]
    lo, hi = (mags.min(), mags.max()) if mags.size else (1.0, 1.0)
    return np.logspace(np.log10(lo) - 3, np.log10(hi) + 3, count)


def sampled_hinf_error(full: LtiSystem, reduced, omegas=None):
    """``max_w sigma_max(G(jw) - G_r(jw))`` over the grid (and ``w = 0``)."""
    if omegas is None:
        omegas = frequency_grid(full)
    red = reduced.system() if isinstance(reduced, ReducedModel) else reduced
    err = 0.0
    for w in np.concatenate([[0.0], np.asarray(omegas, dtype=float)]):
        D = full.transfer(1j * w) - red.transfer(1j * w)
        err = max(err, float(np.linalg.norm(D, 2)))
    return err


@dataclass(frozen=True)
class CatalogueEntry:
    model_id: str
    tier: int
    accuracy: float
    runtime: float
    provenance: str = ""


@dataclass
class ModelCatalogue:
    """Models of one physical system ordered by fidelity tier."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        ids = [e.model_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ConfigError("catalogue ids must be unique")

    def add(self, entry: CatalogueEntry):
        if any(e.model_id == entry.model_id for e in self.entries):
            raise ConfigError(f"duplicate catalogue id {entry.model_id!r}")
        self.entries.append(entry)

    def to_dict(self):
        return {"entries": [e.__dict__.copy() for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls([CatalogueEntry(str(e["model_id"]), int(e["tier"]), float(e["accuracy"]),
                                       float(e["runtime"]), str(e.get("provenance", ""))) for e in d["entries"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid catalogue: {exc}") from None


def catalogue_select(cat: ModelCatalogue, accuracy_budget, runtime_budget=float("inf")):
    """Cheapest entry (lowest tier) whose error estimate and runtime fit the budgets.

    Ties go to the lower runtime, then the lexicographically smaller id.
    """
    feasible = [e for e in cat.entries if e.accuracy <= accuracy_budget and e.runtime <= runtime_budget]
    if not feasible:
        raise NoFeasibleModel(f"no model meets accuracy {accuracy_budget} within runtime {runtime_budget}")
    return min(feasible, key=lambda e: (e.tier, e.runtime, e.model_id)).model_id
