"""Command line entry point: ``mphs run | verify | reduce``.

Exit codes: 0 success, 1 verification failure, 2 bad input or configuration,
3 numerical failure inside a module operation.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, MphsError

SUITES = ("structure", "gradients", "energy", "oracle", "all")


def _err(msg):
    print(f"mphs: error: {msg}", file=sys.stderr)


def _check(name, value, tol):
    value = float(value)
    return {"name": name, "value": value, "tolerance": tol, "passed": bool(np.isfinite(value) and value <= tol)}


def _suite_structure(rng):
    from .electromagnetics import EmGrid1D, EmGrid2D, EmMaterial, assemble_maxwell_ph
    from .mechanics import MechMaterial, assemble_elastodynamics_ph
    from .ph import check_structure
    from .thermal import HeatGrid, assemble_heat_ph, log_free_energy

    out = []
    sysm = assemble_maxwell_ph(EmGrid1D(1.0, 16), EmMaterial(1.0, 1.0, 0.1))
    states = [rng.standard_normal(sysm.n_state) for _ in range(3)]
    rep = check_structure(sysm, states, rng)
    out.append(_check("maxwell1d.skew", rep["skew_max_sym"], 1e-12))
    sysm = assemble_maxwell_ph(EmGrid2D(1.0, 1.0, 6, 5, "periodic", "TE"), EmMaterial(1.0, 1.0, 0.0))
    rep = check_structure(sysm, [rng.standard_normal(sysm.n_state)], rng)
    out.append(_check("maxwell2d.skew", rep["skew_max_sym"], 1e-12))
    mat = MechMaterial.from_parameters(1.0, 1.0, 1.0, 0.1, 0.1)
    model = assemble_elastodynamics_ph(mat, "bar", 6)
    x = model.reference_state() + 0.05 * rng.standard_normal(model.system.n_state)
    rep = check_structure(model.system, [x], rng)
    out.append(_check("mechanics.skew", rep["skew_max_sym"], 1e-12))
    out.append(_check("mechanics.psd", max(0.0, -rep["psd_min_eig"]), 1e-12))
    heat = assemble_heat_ph(HeatGrid((1.0,), (8,)), log_free_energy(1.0))
    rep = check_structure(heat.system, [1.0 + 0.2 * rng.random(8)], rng)
    out.append(_check("thermal.skew", rep["skew_max_sym"], 1e-12))
    return out


def _suite_gradients(rng):
    from .coupled import CoupledMaterial, CoupledState, total_hamiltonian
    from .mechanics import MechMaterial, elastic_energy_and_gradient

    out = []
    mat = MechMaterial.from_parameters(1.0, 1.0, 2.0)
    F = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    W, P = elastic_energy_and_gradient(mat, F)
    h = 1e-6
    fd = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            d = np.zeros((3, 3))
            d[i, j] = h
            fd[i, j] = (elastic_energy_and_gradient(mat, F + d)[0] - elastic_energy_and_gradient(mat, F - d)[0]) / (2 * h)
    out.append(_check("mechanics.dW_dF", np.max(np.abs(fd - P)) / max(1.0, np.max(np.abs(P))), 1e-6))

    cm = CoupledMaterial.simple(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0)
    s = CoupledState.reference((1, 1, 1), 1.2)
    s.E[:] = 0.3 * rng.standard_normal(3)
    s.B[:] = 0.3 * rng.standard_normal(3)
    s.v[:] = 0.3 * rng.standard_normal(3)
    s.F[:] = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    x = s.pack()
    _, der = total_hamiltonian(cm, s, 1.0)
    g = np.concatenate([np.ravel(der[k]) for k in ("E", "B", "v", "F", "theta")])
    fd = np.zeros_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd[k] = (total_hamiltonian(cm, CoupledState.unpack(xp, (1, 1, 1)), 1.0)[0]
                 - total_hamiltonian(cm, CoupledState.unpack(xm, (1, 1, 1)), 1.0)[0]) / (2 * h)
    out.append(_check("coupled.dH", np.max(np.abs(fd - g)) / max(1.0, np.max(np.abs(g))), 1e-6))
    return out


def _suite_energy(rng):
    from .electromagnetics import EmGrid1D, EmMaterial, assemble_maxwell_ph
    from .ph import simulate
    from .thermal import ThermalNetwork, network_simulate

    out = []
    sysm = assemble_maxwell_ph(EmGrid1D(1.0, 32), EmMaterial(1.0, 1.0, 0.0))
    x0 = rng.standard_normal(sysm.n_state)
    _, trace = simulate(sysm, x0, None, 1.0, 0.01)
    H = trace.hamiltonian
    out.append(_check("maxwell1d.conservation", abs(H[-1] - H[0]) / H[0], 1e-10))
    net = ThermalNetwork.from_dict({"N": 3, "C": [1.0, 2.0, 1.5], "Lambda": [[0, 1, 0], [1, 0, 0.5], [0, 0.5, 0]],
                                    "Lambda0": [0.2, 0.0, 0.3], "P": [1.0, 0.0, 0.5], "theta0": 300.0})
    _, _, trace = network_simulate(net, np.zeros(3), 2.0, 0.05)
    out.append(_check("thermal_network.balance", trace.max_abs_residual, 1e-10))
    return out


def _suite_oracle(rng):
    from .mechanics import jeffcott_system, rotor_speed_step, second_order_eigs
    from .mor import LtiSystem, balanced_truncation

    out = []
    lam = second_order_eigs(jeffcott_system(1.0, 2.0, 1.0))
    out.append(_check("jeffcott.critical_damping", np.max(np.abs(lam + 1.0)), 1e-6))
    w = rotor_speed_step(1.0, 1.0, 1.0, 0.0, 0.0, 1.0)
    out.append(_check("rotor_speed.exact", abs(w - (1.0 - np.exp(-1.0))), 1e-12))
    red = balanced_truncation(LtiSystem([[-1.0]], [[1.0]], [[1.0]]), 1)
    out.append(_check("bt.scalar_hsv", abs(red.hsv[0] - 0.5), 1e-12))
    return out


def verify(suite, seed=0):
    rng = np.random.default_rng(seed)
    table = {"structure": _suite_structure, "gradients": _suite_gradients,
             "energy": _suite_energy, "oracle": _suite_oracle}
    names = list(table) if suite == "all" else [suite]
    checks = []
    for name in names:
        for c in table[name](rng):
            c["suite"] = name
            checks.append(c)
    return {"suite": suite, "seed": seed, "passed": all(c["passed"] for c in checks), "checks": checks}


def _load_lti(path):
    from .io import load_json
    from .mor import LtiSystem
    from .thermal import ThermalNetwork

    doc = load_json(path)
    if not isinstance(doc, dict):
        raise ConfigError("model file must be a JSON object")
    try:
        if "A" in doc:
            return LtiSystem.from_dict(doc)
        if "Lambda" in doc or "network" in doc:
            net_doc = doc.get("network", doc)
            net = ThermalNetwork.from_dict(net_doc)
            return LtiSystem.from_thermal_network(net, doc.get("inputs"), doc.get("outputs"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model file {path}: {exc}") from exc
    raise ConfigError("model file needs 'A', 'B', 'C' matrices or a thermal network")


def reduce_model(path, method, order=None, tol=None, out=None):
    from .io import write_csv
    from .mor import ReducedModel, balanced_truncation, frequency_grid, pod, sampled_hinf_error

    full = _load_lti(path)
    if method == "modal" and order is None:
        raise ConfigError("reduce --method modal needs --order")
    if method == "bt":
        red = balanced_truncation(full, order, tol)
    else:
        As, Bs, Cs = full.standard()
        if method == "pod":
            dt = 0.1 / max(1.0, float(np.max(np.abs(full.poles()))))
            M = np.eye(full.n) - 0.5 * dt * As
            P = np.eye(full.n) + 0.5 * dt * As
            x = np.zeros(full.n)
            snaps = []
            for _ in range(400):
                x = np.linalg.solve(M, P @ x + dt * Bs.sum(axis=1))
                snaps.append(x.copy())
            V, s = pod(np.array(snaps).T, 1e-8 if tol is None else tol, order)
        else:
            from .mor import modal_truncation

            K = -0.5 * (As + As.T)
            basis = modal_truncation(np.eye(full.n), K, order)
            V, s = basis.V, basis.eigenvalues
        red = ReducedModel(V.T @ V, V.T @ As @ V, V.T @ Bs, Cs @ V, V, V, method, None, None, np.asarray(s))
    omegas = frequency_grid(full)
    err = sampled_hinf_error(full, red, omegas)
    stem = Path(out) if out else Path(path).with_name(Path(path).stem + f"_{method}")
    red.save(stem.with_suffix(".json"))
    rows = []
    for w in omegas:
        rows.append((w, float(np.linalg.norm(full.transfer(1j * w) - red.transfer(1j * w), 2))))
    write_csv(stem.with_name(stem.name + "_error.csv"), ["omega", "error"], rows)
    return {"method": method, "order": red.r, "error_bound": red.error_bound, "sampled_error": err,
            "model": str(stem.with_suffix(".json"))}


def build_parser():
    p = argparse.ArgumentParser(prog="mphs", description="Port-Hamiltonian multiphysics toolkit")
    p.add_argument("--version", action="version", version=f"mphs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON scenario")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (overrides outputs.dir)")
    r.add_argument("--seed", type=int, help="random seed (default: MPHS_SEED or 0)")

    v = sub.add_parser("verify", help="run a built-in verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--report", help="write the JSON report here")
    v.add_argument("--seed", type=int)

    d = sub.add_parser("reduce", help="reduce an LTI or thermal-network model")
    d.add_argument("model")
    d.add_argument("--method", choices=("bt", "pod", "modal"), default="bt")
    g = d.add_mutually_exclusive_group()
    g.add_argument("--order", type=int)
    g.add_argument("--tol", type=float)
    d.add_argument("--out", help="output stem for the reduced model")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    from .scenarios import ScenarioFailure, run_scenario, seed_from_env

    try:
        seed = args.seed if getattr(args, "seed", None) is not None else None
        if args.command == "run":
            manifest = run_scenario(args.scenario, args.out, seed)
            print(json.dumps({k: manifest[k] for k in ("kind", "residual_max", "metrics")}, indent=2))
            return 0
        if args.command == "verify":
            report = verify(args.suite, seed_from_env() if seed is None else seed)
            text = json.dumps(report, indent=2)
            if args.report:
                Path(args.report).write_text(text + "\n")
            print(text)
            return 0 if report["passed"] else 1
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = reduce_model(args.model, args.method, args.order, args.tol, args.out)
        for w in caught:
            print(f"mphs: warning: {w.message}", file=sys.stderr)
        print(json.dumps(result, indent=2))
        return 0
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return 2
    except ScenarioFailure as exc:
        _err(str(exc))
        return 3
    except MphsError as exc:
        _err(f"{args.command}: {type(exc).__name__}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
