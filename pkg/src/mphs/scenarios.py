"""JSON scenarios: schema validation and per-kind runners used by the CLI.

A scenario file looks like::

    {"kind": "maxwell1d",
     "params": {"n": 64, "sigma": 0.0},
     "integration": {"dt": 0.01, "t_end": 1.0},
     "outputs": {"dir": "out", "prefix": "run"}}

Unknown keys are rejected before anything runs.
"""

from __future__ import annotations

import math
import os
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .io import dump_json, load_json, sha256_file, write_csv, write_field_csv, write_trajectory_csv, parse_complex

KINDS = (
    "maxwell1d", "maxwell2d", "eddy", "potential", "mech_nonlinear", "mech_linear", "rotor",
    "jeffcott", "rotor_speed", "heat", "thermal_network", "circuit", "coupled",
)

# kind -> (defaults for params, needs integration block)
SCHEMAS = {
    "maxwell1d": ({"length": 1.0, "n": 64, "left": "pec", "right": "pec", "epsilon": 1.0, "mu": 1.0,
                   "sigma": 0.0, "mode": 1, "amplitude": 1.0, "drive": None}, True),
    "maxwell2d": ({"lx": 1.0, "ly": 1.0, "nx": 8, "ny": 8, "boundary": "pec", "mode": "TM",
                   "epsilon": 1.0, "mu": 1.0, "sigma": 0.0, "amplitude": 1.0}, True),
    "eddy": ({"lx": 1.0, "ly": 1.0, "nx": 16, "ny": 16, "epsilon": 0.0, "mu": 1.0, "sigma": 1.0,
              "omega": 0.0, "grad_phi": 1.0}, False),
    "potential": ({"dim": 1, "length": 1.0, "n": 16, "lx": 1.0, "ly": 1.0, "nx": 8, "ny": 8,
                   "epsilon": 1.0, "sigma": 0.0, "rho_c": 0.0, "dirichlet": {"left": 1.0, "right": 0.0}}, False),
    "mech_nonlinear": ({"domain": "bar", "n": 16, "length": 1.0, "rho": 1.0, "lam1": 1.0, "lam2": 1.0,
                        "zeta1": 0.0, "zeta2": 0.0, "amplitude": 0.1, "method": "midpoint"}, True),
    "mech_linear": ({"length": 1.0, "n": 10, "rho": 1.0, "lam1": 1.0, "lam2": 1.0, "zeta1": 0.0,
                     "zeta2": 0.0, "rayleigh": None, "bc": "fixed-fixed"}, False),
    "rotor": ({"M": None, "D": None, "K": None, "G": None, "Z": None, "K_G": None, "omega": 0.0}, False),
    "jeffcott": ({"m": 1.0, "d": 2.0, "k": 1.0}, False),
    "rotor_speed": ({"inertia": 1.0, "mu_f": 1.0, "T_e": 1.0, "T_L": 0.0, "omega0": 0.0}, True),
    "heat": ({"extents": [1.0], "cells": [16], "rho": 1.0, "c0": 1.0, "kappa": 1.0, "bcs": {},
              "theta0": 1.0, "r": 0.0}, True),
    "thermal_network": ({"network": None, "x0": None}, True),
    "circuit": ({"machine": None, "slips": [0.01, 0.02, 0.05, 0.1, 0.5, 1.0]}, False),
    "coupled": ({"n": 4, "h": 0.25, "eps0": 1.0, "mu0": 1.0, "rho": 1.0, "lam1": 1.0, "lam2": 1.0,
                 "zeta1": 0.0, "zeta2": 0.0, "c0": 1.0, "sigma": 0.0, "kappa": 0.0, "amplitude": 0.1,
                 "theta0": 1.0, "heat_source": None}, True),
}

TOP_KEYS = {"kind", "params", "integration", "outputs", "seed"}


def seed_from_env(default=0):
    raw = os.environ.get("MPHS_SEED", str(default))
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"MPHS_SEED must be an integer, got {raw!r}") from None


def validate(doc):
    """Return a normalized scenario dict or raise :class:`ConfigError`."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    extra = set(doc) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    kind = doc.get("kind")
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    defaults, needs_time = SCHEMAS[kind]
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown {kind} parameters: {sorted(unknown)}")
    merged = {**defaults, **params}
    integ = doc.get("integration")
    if needs_time:
        if not isinstance(integ, dict) or "dt" not in integ or "t_end" not in integ:
            raise ConfigError(f"{kind} needs integration.dt and integration.t_end")
        try:
            dt, t_end = float(integ["dt"]), float(integ["t_end"])
        except (TypeError, ValueError):
            raise ConfigError("integration.dt and integration.t_end must be numbers") from None
        if not (dt > 0 and t_end > 0 and math.isfinite(dt) and math.isfinite(t_end)):
            raise ConfigError("integration.dt and integration.t_end must be positive")
        if set(integ) - {"dt", "t_end", "newton_tol"}:
            raise ConfigError(f"unknown integration keys: {sorted(set(integ) - {'dt', 't_end', 'newton_tol'})}")
        integ = {"dt": dt, "t_end": t_end, "newton_tol": float(integ.get("newton_tol", 1e-12))}
    outputs = doc.get("outputs", {})
    if not isinstance(outputs, dict) or set(outputs) - {"dir", "prefix"}:
        raise ConfigError("outputs accepts only 'dir' and 'prefix'")
    for key in [k for k, v in defaults.items() if v is None and k in ("network", "machine", "M", "D", "K")]:
        if merged.get(key) is None:
            raise ConfigError(f"{kind} requires params.{key}")
    return {"kind": kind, "params": merged, "integration": integ, "outputs": outputs, "seed": doc.get("seed")}


class _Run:
    def __init__(self, out_dir, prefix):
        self.dir = Path(out_dir)
        self.prefix = prefix
        self.artifacts = []

    def path(self, suffix):
        p = self.dir / f"{self.prefix}_{suffix}"
        self.artifacts.append(str(p))
        return p


def _trace_outputs(run, times, traj, names, trace):
    write_trajectory_csv(run.path("trajectory.csv"), times, traj, names)
    trace.to_csv(run.path("energy.csv"))
    return trace.max_abs_residual


def _run_maxwell1d(p, integ, run, rng):
    from .electromagnetics import EmGrid1D, EmMaterial, Phasor, assemble_maxwell_ph
    from .ph import simulate

    grid = EmGrid1D(float(p["length"]), int(p["n"]), p["left"], p["right"])
    mat = EmMaterial(p["epsilon"], p["mu"], p["sigma"])
    system = assemble_maxwell_ph(grid, mat)
    x0 = np.zeros(system.n_state)
    xn = grid.node_x()
    x0[: grid.n_E] = p["amplitude"] * np.sin(p["mode"] * math.pi * xn / grid.length)
    u = None
    if system.n_input:
        d = p["drive"] or {}
        sig = Phasor(float(d.get("amplitude", 1.0)), float(d.get("omega", 1.0)), float(d.get("theta", 0.0)))
        u = lambda t: np.full(system.n_input, sig(t))  # noqa: E731
    traj, trace = simulate(system, x0, u, integ["t_end"], integ["dt"], newton_tol=integ["newton_tol"])
    names = [f"E{i}" for i in grid.e_nodes] + [f"B{j}" for j in range(grid.n)]
    res = _trace_outputs(run, trace.times, traj, names, trace)
    H = trace.hamiltonian
    return res, {"H0": float(H[0]), "H_end": float(H[-1]),
                 "relative_drift": float(abs(H[-1] - H[0]) / H[0]) if H[0] else 0.0}


def _run_maxwell2d(p, integ, run, rng):
    from .electromagnetics import EmGrid2D, EmMaterial, assemble_maxwell_ph, discrete_divergence
    from .ph import simulate

    grid = EmGrid2D(float(p["lx"]), float(p["ly"]), int(p["nx"]), int(p["ny"]), p["boundary"], p["mode"])
    system = assemble_maxwell_ph(grid, EmMaterial(p["epsilon"], p["mu"], p["sigma"]))
    x0 = p["amplitude"] * rng.standard_normal(system.n_state)
    traj, trace = simulate(system, x0, None, integ["t_end"], integ["dt"], newton_tol=integ["newton_tol"])
    names = [f"E{i}" for i in range(grid.n_E)] + [f"B{j}" for j in range(grid.n_B)]
    res = _trace_outputs(run, trace.times, traj, names, trace)
    d0 = discrete_divergence(grid, traj[0], "B")
    drift = max((float(np.max(np.abs(discrete_divergence(grid, x, "B") - d0))) if d0.size else 0.0) for x in traj)
    return res, {"H0": float(trace.hamiltonian[0]), "divB_drift": drift}


def _run_eddy(p, integ, run, rng):
    from .electromagnetics import EmGrid2D, EmMaterial, eddy_harmonic_solve, total_current

    grid = EmGrid2D(float(p["lx"]), float(p["ly"]), int(p["nx"]), int(p["ny"]))
    eps = p["epsilon"] if p["epsilon"] > 0 else 1e-300
    mat = EmMaterial(eps, p["mu"], p["sigma"])
    g = parse_complex(p["grad_phi"], "grad_phi")
    A = eddy_harmonic_solve(grid, mat, float(p["omega"]), g)
    info = {"lx": grid.lx, "ly": grid.ly, "nx": grid.nx, "ny": grid.ny, "location": "nodes"}
    write_field_csv(run.path("A3_real.csv"), A.real, run.path("A3_real.json"), info)
    write_field_csv(run.path("A3_imag.csv"), A.imag, run.path("A3_imag.json"), info)
    Ac = 0.25 * (A[:-1, :-1] + A[1:, :-1] + A[:-1, 1:] + A[1:, 1:])
    I = total_current(grid, mat, float(p["omega"]), Ac, g, np.ones((grid.nx, grid.ny), bool))
    return None, {"current_real": I.real, "current_imag": I.imag}


def _run_potential(p, integ, run, rng):
    from .electromagnetics import EmGrid1D, EmGrid2D, EmMaterial, solve_potential

    if int(p["dim"]) == 1:
        grid = EmGrid1D(float(p["length"]), int(p["n"]))
        info = {"length": grid.length, "n": grid.n}
    elif int(p["dim"]) == 2:
        grid = EmGrid2D(float(p["lx"]), float(p["ly"]), int(p["nx"]), int(p["ny"]))
        info = {"lx": grid.lx, "ly": grid.ly, "nx": grid.nx, "ny": grid.ny}
    else:
        raise ConfigError("potential.dim must be 1 or 2")
    sol = solve_potential(grid, EmMaterial(p["epsilon"], 1.0, p["sigma"]), p["rho_c"], p["dirichlet"])
    info["location"] = "nodes"
    write_field_csv(run.path("phi.csv"), sol.Phi, run.path("phi.json"), info)
    return None, {"phi_min": float(sol.Phi.min()), "phi_max": float(sol.Phi.max())}


def _run_mech_nonlinear(p, integ, run, rng):
    from .mechanics import MechMaterial, assemble_elastodynamics_ph

    mat = MechMaterial.from_parameters(p["rho"], p["lam1"], p["lam2"], p["zeta1"], p["zeta2"])
    model = assemble_elastodynamics_ph(mat, p["domain"], int(p["n"]), float(p["length"]))
    if p["domain"] == "bar":
        xs = np.linspace(0.0, 1.0, model.n_nodes)
        v = np.zeros((model.n_nodes, 3))
        v[:, 0] = p["amplitude"] * np.sin(math.pi * xs)
    else:
        v = p["amplitude"] * rng.standard_normal((model.n_nodes, 3))
    x0 = model.reference_state(v)
    traj, trace = model.simulate(x0, integ["t_end"], integ["dt"], method=p["method"], newton_tol=integ["newton_tol"])
    names = [f"v{i}_{a}" for i in range(model.n_nodes) for a in range(3)]
    names += [f"F{i}_{a}{b}" for i in range(model.n_nodes) for a in range(3) for b in range(3)]
    res = _trace_outputs(run, trace.times, traj, names, trace)
    return res, {"H0": float(trace.hamiltonian[0]), "H_end": float(trace.hamiltonian[-1])}


def _write_eigs(run, lam):
    write_csv(run.path("eigenvalues.csv"), ["index", "real", "imag"], ((i, z.real, z.imag) for i, z in enumerate(lam)))


def _run_mech_linear(p, integ, run, rng):
    from .mechanics import MechMaterial, assemble_linear_nonrotating, second_order_eigs

    mat = MechMaterial.from_parameters(p["rho"], p["lam1"], p["lam2"], p["zeta1"], p["zeta2"])
    sysm = assemble_linear_nonrotating(mat, float(p["length"]), int(p["n"]), p["rayleigh"], p["bc"])
    lam = second_order_eigs(sysm)
    _write_eigs(run, lam)
    dump_json(run.path("matrices.json"), sysm.to_dict())
    return None, {"max_real_part": float(np.max(lam.real))}


def _run_rotor(p, integ, run, rng):
    from .mechanics import SecondOrderSystem, second_order_eigs

    sysm = SecondOrderSystem.from_dict({k: v for k, v in p.items() if v is not None})
    lam = second_order_eigs(sysm)
    _write_eigs(run, lam)
    return None, {"max_real_part": float(np.max(lam.real))}


def _run_jeffcott(p, integ, run, rng):
    from .mechanics import jeffcott_system, second_order_eigs

    lam = second_order_eigs(jeffcott_system(float(p["m"]), float(p["d"]), float(p["k"])))
    _write_eigs(run, lam)
    return None, {"max_real_part": float(np.max(lam.real))}


def _run_rotor_speed(p, integ, run, rng):
    from .mechanics import rotor_speed_trajectory

    t, w = rotor_speed_trajectory(float(p["inertia"]), float(p["mu_f"]), float(p["T_e"]), float(p["T_L"]),
                                  float(p["omega0"]), integ["t_end"], integ["dt"])
    write_trajectory_csv(run.path("trajectory.csv"), t, w[:, None], ["omega"])
    return None, {"omega_end": float(w[-1])}


def _run_heat(p, integ, run, rng):
    from .thermal import HeatGrid, ThermalBC, assemble_heat_ph, log_free_energy

    grid = HeatGrid(tuple(float(v) for v in p["extents"]), tuple(int(v) for v in p["cells"]))
    mat = log_free_energy(float(p["c0"]), p["rho"], p["kappa"])
    bcs = {}
    for face, spec in p["bcs"].items():
        kind = spec.get("kind")
        if kind == "dirichlet":
            bcs[face] = ThermalBC.dirichlet(float(spec["value"]))
        elif kind == "neumann":
            bcs[face] = ThermalBC.neumann(float(spec["value"]))
        elif kind == "robin":
            bcs[face] = ThermalBC.robin(spec["w1"], spec["w2"], float(spec["gamma"]))
        else:
            raise ConfigError(f"unknown boundary kind {kind!r} on face {face}")
    model = assemble_heat_ph(grid, mat, bcs, r=p["r"])
    theta0 = np.full(grid.n, float(p["theta0"]))
    traj, trace = model.simulate(theta0, integ["t_end"], integ["dt"], newton_tol=integ["newton_tol"])
    res = _trace_outputs(run, trace.times, traj, [f"theta{i}" for i in range(grid.n)], trace)
    return res, {"theta_mean_end": float(np.mean(traj[-1]))}


def _run_thermal_network(p, integ, run, rng):
    from .thermal import ThermalNetwork, network_simulate, network_steady_state

    net = ThermalNetwork.from_dict(p["network"])
    x0 = np.zeros(net.N) if p["x0"] is None else np.asarray(p["x0"], dtype=float)
    times, traj, trace = network_simulate(net, x0, integ["t_end"], integ["dt"], newton_tol=integ["newton_tol"])
    res = _trace_outputs(run, times, traj + net.theta0, [f"theta{i}" for i in range(net.N)], trace)
    steady, _ = network_steady_state(net)
    return res, {"final_state": (traj[-1] + net.theta0).tolist(), "steady_state": steady.tolist()}


def _run_circuit(p, integ, run, rng):
    from .circuit import MachineParams, slip_sweep

    params = MachineParams.from_dict(p["machine"])
    rows = slip_sweep(params, [float(s) for s in p["slips"]])
    write_csv(run.path("sweep.csv"), ["s", "I1", "I2p", "Pw1", "Pw2", "Pairgap", "Te"], rows)
    return None, {"points": len(rows)}


def _run_coupled(p, integ, run, rng):
    from .coupled import CoupledMaterial, CoupledState, coupled_energy_balance, coupled_simulate
    from .grid import PeriodicGrid3D

    grid = PeriodicGrid3D(int(p["n"]), float(p["h"]))
    mat = CoupledMaterial.simple(
        eps0=p["eps0"], mu0=p["mu0"], rho=p["rho"], lam1=p["lam1"], lam2=p["lam2"], zeta1=p["zeta1"],
        zeta2=p["zeta2"], c0=p["c0"], sigma=p["sigma"], kappa=p["kappa"], heat_source=p["heat_source"],
    )
    s = CoupledState.reference(grid.shape, p["theta0"])
    a = float(p["amplitude"])
    s.E = a * rng.standard_normal(s.E.shape)
    s.B = a * rng.standard_normal(s.B.shape)
    s.v = a * rng.standard_normal(s.v.shape)
    s.F = s.F + 0.5 * a * rng.standard_normal(s.F.shape)
    times, states, trace = coupled_simulate(mat, grid, s, integ["t_end"], integ["dt"],
                                            newton_tol=max(integ["newton_tol"], 1e-11))
    traj = np.array([st.pack() for st in states])
    m = grid.cells
    names = [f"{f}{i}" for f, w in (("E", 3), ("B", 3), ("v", 3), ("F", 9), ("theta", 1)) for i in range(w * m)]
    res = _trace_outputs(run, times, traj, names, trace)
    bal, H = coupled_energy_balance(mat, grid, times, states)
    return res, {"H0": float(H[0]), "balance_residual_max": float(np.max(np.abs(bal)))}


RUNNERS = {
    "maxwell1d": ("electromagnetics.assemble_maxwell_ph/simulate", _run_maxwell1d),
    "maxwell2d": ("electromagnetics.assemble_maxwell_ph/simulate", _run_maxwell2d),
    "eddy": ("electromagnetics.eddy_harmonic_solve", _run_eddy),
    "potential": ("electromagnetics.solve_potential", _run_potential),
    "mech_nonlinear": ("mechanics.assemble_elastodynamics_ph/simulate", _run_mech_nonlinear),
    "mech_linear": ("mechanics.second_order_eigs", _run_mech_linear),
    "rotor": ("mechanics.second_order_eigs", _run_rotor),
    "jeffcott": ("mechanics.second_order_eigs", _run_jeffcott),
    "rotor_speed": ("mechanics.rotor_speed_trajectory", _run_rotor_speed),
    "heat": ("thermal.assemble_heat_ph/simulate", _run_heat),
    "thermal_network": ("thermal.network_simulate", _run_thermal_network),
    "circuit": ("circuit.slip_sweep", _run_circuit),
    "coupled": ("coupled.coupled_simulate", _run_coupled),
}


class ScenarioFailure(Exception):
    """Runtime failure inside a module operation (CLI exit code 3)."""

    def __init__(self, op, cause):
        super().__init__(f"{op} failed: {type(cause).__name__}: {cause}")
        self.op = op
        self.cause = cause


def run_scenario(path, out_dir=None, seed=None):
    """Validate and run the scenario at ``path``; returns the manifest dict."""
    path = Path(path)
    doc = validate(load_json(path))
    kind = doc["kind"]
    if seed is None:
        seed = doc["seed"] if doc["seed"] is not None else seed_from_env()
    outputs = doc["outputs"]
    if out_dir is None:
        out_dir = outputs.get("dir", str(path.with_suffix("")) + "_out")
        if not Path(out_dir).is_absolute():
            out_dir = path.parent / out_dir
    run = _Run(out_dir, outputs.get("prefix", kind))
    rng = np.random.default_rng(int(seed))
    op, runner = RUNNERS[kind]
    try:
        residual, metrics = runner(doc["params"], doc["integration"], run, rng)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - reported with the failing op
        raise ScenarioFailure(op, exc) from exc
    manifest_path = run.dir / f"{run.prefix}_manifest.json"
    manifest = {
        "kind": kind,
        "scenario": str(path),
        "inputs_sha256": sha256_file(path),
        "seed": int(seed),
        "versions": {"mphs": __version__, "numpy": np.__version__, "python": platform.python_version(),
                     "scipy": __import__("scipy").__version__},
        "artifacts": run.artifacts + [str(manifest_path)],
        "residual_max": residual,
        "metrics": metrics,
    }
    dump_json(manifest_path, manifest)
    return manifest
