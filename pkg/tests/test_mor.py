import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mphs.errors import ConfigError, EmptySnapshots, NoFeasibleModel, NonMinimalWarning, NotSPD, UnstableSystem
from mphs.mechanics import MechMaterial, assemble_linear_nonrotating
from mphs.mor import (
    CatalogueEntry,
    LtiSystem,
    ModelCatalogue,
    ReducedModel,
    balanced_truncation,
    catalogue_select,
    frequency_grid,
    modal_truncation,
    pod,
    sampled_hinf_error,
)
from mphs.thermal import ThermalNetwork


def chain_network(n=20, seed=3):
    g = np.random.default_rng(seed)
    lam = np.zeros((n, n))
    for i in range(n - 1):
        lam[i, i + 1] = lam[i + 1, i] = g.uniform(0.5, 2.0)
    lam0 = np.zeros(n)
    lam0[0], lam0[-1] = 1.0, 0.5
    return ThermalNetwork.from_dict({"N": n, "C": list(g.uniform(0.5, 2.0, n)), "Lambda": lam.tolist(),
                                     "Lambda0": lam0.tolist(), "P": [0.0] * n, "theta0": 0.0})


def random_stable(g, n, m=1, p=1):
    X = g.standard_normal((n, n))
    A = X - X.T - np.diag(g.uniform(0.5, 3.0, n))
    return LtiSystem(A, g.standard_normal((n, m)), g.standard_normal((p, n)))


def test_scalar_balanced_truncation():
    red = balanced_truncation(LtiSystem([[-1.0]], [[1.0]], [[1.0]]), 1)
    assert red.hsv[0] == pytest.approx(0.5, abs=1e-15)
    assert red.error_bound == 0.0
    red0 = balanced_truncation(LtiSystem([[-1.0]], [[1.0]], [[1.0]]), 0)
    assert red0.error_bound == pytest.approx(1.0)
    assert sampled_hinf_error(LtiSystem([[-1.0]], [[1.0]], [[1.0]]), red0) == pytest.approx(1.0)


@pytest.mark.filterwarnings("ignore::mphs.errors.NonMinimalWarning")
def test_network_bound_and_full_order():
    full = LtiSystem.from_thermal_network(chain_network(), inputs=[0], outputs=[19])
    t0 = time.perf_counter()
    red = balanced_truncation(full, 5)
    err = sampled_hinf_error(full, red, frequency_grid(full))
    assert time.perf_counter() - t0 < 10.0
    assert red.r == 5
    assert err <= 2 * np.sum(red.hsv[5:]) * (1 + 1e-12)
    assert red.error_bound == pytest.approx(2 * np.sum(red.hsv[5:]), rel=1e-14)
    exact = balanced_truncation(full, 20)
    assert sampled_hinf_error(full, exact) <= 1e-10


@pytest.mark.filterwarnings("ignore::mphs.errors.NonMinimalWarning")
def test_tolerance_selects_order():
    full = LtiSystem.from_thermal_network(chain_network(), inputs=[0], outputs=[19])
    red = balanced_truncation(full, tol=1e-4)
    assert red.error_bound <= 1e-4
    tails = 2 * np.cumsum(red.hsv[::-1])[::-1]
    assert red.r == 0 or tails[red.r - 1] > 1e-4
    with pytest.raises(ValueError):
        balanced_truncation(full)
    with pytest.raises(ValueError):
        balanced_truncation(full, 3, 1e-3)


def test_unstable_rejected():
    with pytest.raises(UnstableSystem):
        balanced_truncation(LtiSystem([[0.5, 0.0], [0.0, -1.0]], [[1.0], [1.0]], [[1.0, 1.0]]), 1)
    with pytest.raises(UnstableSystem):
        balanced_truncation(LtiSystem([[0.0]], [[1.0]], [[1.0]]), 1)


def test_nonminimal_warns_and_clamps():
    A = np.diag([-1.0, -2.0, -3.0])
    sysm = LtiSystem(A, [[1.0], [1.0], [0.0]], [[1.0, 1.0, 1.0]])
    with pytest.warns(NonMinimalWarning):
        red = balanced_truncation(sysm, 3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        red = balanced_truncation(sysm, 2)
    assert red.r == 2
    assert sampled_hinf_error(sysm, red) <= 1e-10
    assert any(issubclass(w.category, NonMinimalWarning) for w in caught)


def test_descriptor_matches_standard(rng):
    full = LtiSystem.from_thermal_network(chain_network(8), inputs=[0, 3], outputs=[7])
    As, Bs, Cs = full.standard()
    std = LtiSystem(As, Bs, Cs)
    for w in (0.0, 0.3, 7.0):
        assert np.allclose(full.transfer(1j * w), std.transfer(1j * w), rtol=1e-13, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10_000))
def test_bt_preserves_stability(n, seed):
    g = np.random.default_rng(seed)
    full = random_stable(g, n)
    r = int(g.integers(1, n + 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonMinimalWarning)
        red = balanced_truncation(full, r)
    assert red.system().is_stable()
    assert sampled_hinf_error(full, red) <= red.error_bound * (1 + 1e-8) + 1e-10


def test_hsv_similarity_invariant(rng):
    full = random_stable(rng, 6, 2, 2)
    T = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    other = full.transform(T, np.linalg.inv(T))
    h1 = balanced_truncation(full, 6).hsv
    h2 = balanced_truncation(other, 6).hsv
    assert np.allclose(h1, h2, rtol=1e-8)


def test_pod_properties(rng):
    S = rng.standard_normal((30, 4)) @ rng.standard_normal((4, 50))
    V, s = pod(S, 1e-10)
    assert V.shape == (30, 4)
    assert np.allclose(V.T @ V, np.eye(4), atol=1e-12)
    assert np.all(np.diff(s) <= 0)
    assert np.linalg.norm(S - V @ (V.T @ S)) <= 1e-10 * np.linalg.norm(S)
    cols = np.argmax(np.abs(V), axis=0)
    assert np.all(V[cols, np.arange(4)] > 0)
    V2, _ = pod(-S, r=2)
    assert np.allclose(V2, V[:, :2], atol=1e-12)
    with pytest.raises(EmptySnapshots):
        pod(np.zeros((3, 2)))
    with pytest.raises(EmptySnapshots):
        pod(np.zeros((3, 0)))


def test_pod_energy_fraction(rng):
    S = rng.standard_normal((20, 20)) * np.logspace(0, -6, 20)
    V, s = pod(S, 1e-4)
    r = V.shape[1]
    frac = np.cumsum(s**2) / np.sum(s**2)
    assert frac[r - 1] >= 1 - 1e-4 - 1e-15
    assert r == 1 or frac[r - 2] < 1 - 1e-4


def test_modal_basis(rng):
    X = rng.standard_normal((8, 8))
    M = X @ X.T + 8 * np.eye(8)
    Y = rng.standard_normal((8, 8))
    K = Y @ Y.T
    basis = modal_truncation(M, K, 3)
    assert np.allclose(basis.V.T @ M @ basis.V, np.eye(3), atol=1e-12)
    assert np.allclose(basis.V.T @ K @ basis.V, np.diag(basis.eigenvalues), atol=1e-11)
    assert np.all(np.diff(basis.frequencies) >= 0)
    by_freq = modal_truncation(M, K, omega_max=basis.frequencies[2])
    assert by_freq.V.shape[1] >= 3
    with pytest.raises(NotSPD):
        modal_truncation(-M, K, 2)
    with pytest.raises(NotSPD):
        modal_truncation(M, K + np.triu(np.ones((8, 8)), 1), 2)
    with pytest.raises(ValueError):
        modal_truncation(M, K)


def test_modal_bar_low_frequency_response():
    sysm = assemble_linear_nonrotating(MechMaterial.from_parameters(1.0, 1.0, 1.0), 1.0, 40)
    basis = modal_truncation(sysm.M, sysm.K, 6)
    Mr, _, Kr = basis.project(sysm.M, None, sysm.K)
    f = np.zeros(sysm.n)
    f[sysm.n // 3] = 1.0
    for w in (0.0, 0.5):
        full = np.linalg.solve(sysm.K - w**2 * sysm.M, f)
        red = basis.V @ np.linalg.solve(Kr - w**2 * Mr, basis.V.T @ f)
        assert np.linalg.norm(full - red) <= 0.05 * np.linalg.norm(full)


def test_catalogue():
    cat = ModelCatalogue([CatalogueEntry("fine", 2, 1e-6, 10.0), CatalogueEntry("coarse", 0, 1e-2, 0.1),
                          CatalogueEntry("mid", 1, 1e-4, 1.0)])
    assert catalogue_select(cat, 1e-1) == "coarse"
    assert catalogue_select(cat, 1e-3) == "mid"
    assert catalogue_select(cat, 1e-5) == "fine"
    with pytest.raises(NoFeasibleModel):
        catalogue_select(cat, 1e-5, 5.0)
    with pytest.raises(ConfigError):
        cat.add(CatalogueEntry("mid", 3, 0.0, 0.0))
    assert catalogue_select(ModelCatalogue.from_dict(cat.to_dict()), 1e-3) == "mid"
    with pytest.raises(ConfigError):
        ModelCatalogue.from_dict({"entries": [{"model_id": "x"}]})


@pytest.mark.filterwarnings("ignore::mphs.errors.NonMinimalWarning")
def test_reduced_model_json(tmp_path):
    full = LtiSystem.from_thermal_network(chain_network(), inputs=[0], outputs=[19])
    red = balanced_truncation(full, 4)
    red.save(tmp_path / "m.json")
    back = ReducedModel.load(tmp_path / "m.json")
    assert back.r == 4 and back.method == "bt"
    assert np.array_equal(back.A, red.A) and np.array_equal(back.hsv, red.hsv)
    assert back.error_bound == red.error_bound


def test_lti_validation():
    with pytest.raises(ConfigError):
        LtiSystem(np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((1, 2)))
    with pytest.raises(ConfigError):
        LtiSystem(np.eye(2), np.zeros((3, 1)), np.zeros((1, 2)))
    with pytest.raises(ConfigError):
        LtiSystem(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        LtiSystem.from_dict({"A": [[1.0]]})
    sysm = LtiSystem([[-1.0, 0.2], [0.0, -3.0]], [[1.0], [0.5]], [[1.0, 0.0]])
    assert np.array_equal(LtiSystem.from_dict(sysm.to_dict()).A, sysm.A)
