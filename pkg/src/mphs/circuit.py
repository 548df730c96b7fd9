"""Steady-state induction-machine equivalent circuit and loss bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AsymmetricInductance, ConfigError, NegativeLoss, SingularCircuit, ZeroSlip

__all__ = [
    "MachineParams",
    "LossBreakdown",
    "slip",
    "solve_phasors",
    "winding_losses",
    "total_loss",
    "torque_power",
    "flux_linkage",
    "slip_sweep",
]


@dataclass(frozen=True)
class MachineParams:
    R1: float
    X1: float
    X3: float
    R2p: float
    X2p: float
    Np: int = 3
    U1: complex = 1.0 + 0.0j
    U2p: complex = 0.0j
    ns: float = 50.0

    def __post_init__(self):
        for name in ("R1", "R2p", "X1", "X2p", "X3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.Np < 1:
            raise ValueError("Np must be at least 1")
        if not self.ns > 0:
            raise ValueError("ns must be positive")

    def with_temperature_factor(self, k1, k2=None):
        """Scale winding resistances by temperature multipliers."""
        return replace(self, R1=self.R1 * k1, R2p=self.R2p * (k1 if k2 is None else k2))

    @classmethod
    def from_dict(cls, d):
        from .io import parse_complex

        try:
            return cls(
                R1=float(d["R1"]),
                X1=float(d["X1"]),
                X3=float(d["X3"]),
                R2p=float(d["R2p"]),
                X2p=float(d["X2p"]),
                Np=int(d.get("Np", 3)),
                U1=parse_complex(d.get("U1", 1.0), "U1"),
                U2p=parse_complex(d.get("U2p", 0.0), "U2p"),
                ns=float(d["ns"]),
            )
        except KeyError as exc:
            raise ConfigError(f"machine parameters missing key {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid machine parameters: {exc}") from None

    def to_dict(self):
        from .io import complex_pair

        return {
            "R1": self.R1, "X1": self.X1, "X3": self.X3, "R2p": self.R2p, "X2p": self.X2p,
            "Np": self.Np, "U1": complex_pair(self.U1), "U2p": complex_pair(self.U2p), "ns": self.ns,
        }


@dataclass(frozen=True)
class LossBreakdown:
    P_Fe: float
    P_R: float
    P_w1: float
    P_w2: float
    P_Z: float
    P_V: float


def slip(n, n_s):
    if not n_s > 0:
        raise ValueError("synchronous speed must be positive")
    return (n_s - n) / n_s


def solve_phasors(p: MachineParams, s):
    """Stator and rotor phasor currents ``(I1, I2p)`` at slip ``s``.

    At ``s == 0`` the rotor branch impedance is infinite, so ``I2p = 0``.
    """
    z_stator = p.R1 + 1j * (p.X1 + p.X3)
    if s == 0:
        if abs(z_stator) == 0:
            raise SingularCircuit("stator impedance is zero")
        return complex(p.U1 / z_stator), 0j
    a11 = z_stator
    a12 = -1j * p.X3
    a21 = 1j * p.X3
    a22 = -(p.R2p / s) - 1j * (p.X2p + p.X3)
    det = a11 * a22 - a12 * a21
    scale = max(abs(a11 * a22), abs(a12 * a21), 1e-300)
    if abs(det) < 1e-14 * scale or det == 0:
        raise SingularCircuit(f"circuit determinant {abs(det):.3e} vanishes")
    I1 = (p.U1 * a22 - a12 * p.U2p) / det
    I2 = (a11 * p.U2p - a21 * p.U1) / det
    return complex(I1), complex(I2)


def winding_losses(p: MachineParams, I1, I2p):
    return p.Np * p.R1 * abs(I1) ** 2, p.Np * p.R2p * abs(I2p) ** 2


def total_loss(P_w1, P_w2, P_Fe, P_R, p_Z_fraction, P_total):
    if not 0.0 <= p_Z_fraction <= 1.0:
        raise NegativeLoss(f"p_Z_fraction {p_Z_fraction} outside [0, 1]")
    for name, val in (("P_w1", P_w1), ("P_w2", P_w2), ("P_Fe", P_Fe), ("P_R", P_R), ("P_total", P_total)):
        if val < 0:
            raise NegativeLoss(f"{name} = {val} is negative")
    P_Z = p_Z_fraction * P_total
    return LossBreakdown(P_Fe, P_R, P_w1, P_w2, P_Z, P_Fe + P_R + P_w1 + P_w2 + P_Z)


def torque_power(p: MachineParams, s, I2p):
    """Air-gap power and electromagnetic torque (standard surrogate relations)."""
    if s == 0:
        raise ZeroSlip("air-gap power is undefined at zero slip")
    P_ag = p.Np * abs(I2p) ** 2 * p.R2p / s
    return P_ag, P_ag / (2.0 * math.pi * p.ns)


def flux_linkage(L, I, psi_m):
    L = np.atleast_2d(np.asarray(L, dtype=float))
    I = np.atleast_1d(np.asarray(I, dtype=float))
    if L.shape[0] != L.shape[1] or L.shape[0] != I.size:
        raise ValueError(f"L shape {L.shape} incompatible with {I.size} currents")
    if not np.allclose(L, L.T, rtol=1e-12, atol=0.0):
        raise AsymmetricInductance("inductance matrix must be symmetric")
    return L @ I + psi_m


def slip_sweep(p: MachineParams, slips):
    """Rows ``(s, |I1|, |I2p|, Pw1, Pw2, Pairgap, Te)`` for each slip."""
    rows = []
    for s in slips:
        I1, I2 = solve_phasors(p, s)
        pw1, pw2 = winding_losses(p, I1, I2)
        pag, te = (0.0, 0.0) if s == 0 else torque_power(p, s, I2)
        rows.append((s, abs(I1), abs(I2), pw1, pw2, pag, te))
    return rows
