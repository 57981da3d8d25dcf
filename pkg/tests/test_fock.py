import warnings

import numpy as np
import pytest
from scipy.optimize import curve_fit

from mimcavity.errors import ConfigError, DomainError
from mimcavity.fock_sim import (
    FockBasis,
    LeakageWarning,
    LinearizedModel,
    QuadraticModel,
    StaticQuadraticModel,
    TwoModeResonantModel,
    build_hamiltonian,
    coherent_product_state,
    compare_models,
    evolve_state,
    expectation,
    number_state,
    pair_photon_estimate,
    rwa_toggle_study,
    static_model_from_config,
    two_mode_model_from_config,
)
from mimcavity.spectral import CavityConfig
from mimcavity.units import UnitSystem

NATURAL = UnitSystem(1.0, 1.0)
SHEET = CavityConfig(1.0, 0.01, 3.0, surrogate=True, units=NATURAL)


def transfer_trace(model, t):
    basis = FockBasis(3, [1, 1])
    H = build_hamiltonian(model, basis).rotating(model.omega1)
    states, leak = evolve_state(H, number_state(basis, [0, 0, 1]), t)
    return np.abs(states[:, basis.index([1, 1, 0])]) ** 2, leak


def test_resonant_rabi_closed_form():
    m = TwoModeResonantModel(18.8, 21.3, 2.5, 0.025)
    t = np.linspace(0, 2 * np.pi / m.eta, 101)
    P, leak = transfer_trace(m, t)
    np.testing.assert_allclose(P, np.sin(m.eta * t) ** 2, atol=1e-11)
    assert leak == 0.0


def test_rabi_period_fit():
    m = two_mode_model_from_config(SHEET, 6, 7, 4.6e4)
    T = np.pi / abs(m.eta)
    t = np.linspace(0, 1.5 * T, 301)
    P, _ = transfer_trace(m, t)
    (G, A), _ = curve_fit(lambda tt, G, A: A * np.sin(G * tt) ** 2, t, P, p0=[abs(m.eta) * 1.01, 1.0])
    assert abs(np.pi / G / T - 1) < 1e-4


@pytest.mark.parametrize("delta_over_eta", [0.5, 1.3, 4.0])
def test_detuned_maximum_transfer(delta_over_eta):
    eta = 0.02
    m = TwoModeResonantModel(18.0, 20.5, 2.5 + delta_over_eta * eta, eta)
    gen = np.sqrt(eta**2 + (m.detuning / 2) ** 2)
    t = np.linspace(0, np.pi / gen, 2001)
    P, _ = transfer_trace(m, t)
    pred = eta**2 / (eta**2 + m.detuning**2 / 4)
    assert abs(P.max() - pred) < 1e-4


def test_chebyshev_matches_expm():
    model = LinearizedModel(np.array([3.0, 4.1, 5.3]), 0.4, 0.05,
                            np.array([[0.3, 0.2, -0.1], [0.2, -0.2, 0.4], [-0.1, 0.4, 0.1]]))
    basis = FockBasis(6, [2, 2, 2])
    H = build_hamiltonian(model, basis)
    psi0 = coherent_product_state(basis, 0.7, [1, 0, 0])
    t = np.linspace(0, 6.0, 7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LeakageWarning)
        a, _ = evolve_state(H, psi0, t, method="chebyshev")
        b, _ = evolve_state(H, psi0, t, method="expm")
    assert np.abs(a - b).max() < 1e-10
    assert np.abs(np.linalg.norm(a, axis=1) - 1).max() < 1e-12


def test_hamiltonians_are_hermitian():
    model = LinearizedModel(np.array([3.0, 4.1]), 0.4, 0.05, np.array([[0.3, 0.2], [-0.1, 0.1]]))
    for rwa in (False, True):
        for pairs in (False, True):
            H = build_hamiltonian(LinearizedModel(model.omega, 0.4, 0.05, model.F, rwa, pairs),
                                  FockBasis(3, [2, 2]))
            assert H.hermiticity_defect() < 1e-14


def test_displaced_oscillator_spectrum():
    # one mode, no pair terms: H = Omega b+b + w n + g (b + b+) n, g = x_zpf * 2 F
    w, Om, xz, F = 10.0, 1.0, 0.1, 0.8
    H = build_hamiltonian(LinearizedModel(np.array([w]), Om, xz, np.array([[F]]), pairs=False),
                          FockBasis(60, [2]))
    ev = np.sort(np.linalg.eigvalsh(H.matrix.toarray()))
    g = 2 * F * xz
    ref = sorted(Om * (nu + 0.5) + w * n - g * g * n * n / Om for n in range(3) for nu in range(20))
    np.testing.assert_allclose(ev[:20], ref[:20], atol=1e-9)


@pytest.mark.parametrize("rwa", [False, True])
def test_quadratic_renormalised_frequency(rwa):
    m = QuadraticModel(10.0, 1.0, 0.2, 3.0, rwa=rwa)
    basis = FockBasis(80, [1])
    H = build_hamiltonian(m, basis).matrix.toarray()
    one = basis.number_diagonal(1) == 1
    ev = np.sort(np.linalg.eigvalsh(H[np.ix_(one, one)]))
    Om1 = (1.0 + 2 * 3.0 * 0.2**2) if rwa else m.renormalized_Omega(1)
    np.testing.assert_allclose(ev[:10] - 10.0, Om1 * (np.arange(10) + 0.5), atol=1e-9)


def test_rotating_frame_requires_conservation():
    H = build_hamiltonian(StaticQuadraticModel(np.array([2.0, 3.0]), np.zeros((2, 2)),
                                               0.01 * np.ones((2, 2)), pairs=True), FockBasis(0, [2, 2]))
    with pytest.raises(DomainError):
        H.rotating(2.0)


def test_leakage_warning():
    model = LinearizedModel(np.array([3.0]), 0.4, 0.5, np.array([[1.0]]))
    basis = FockBasis(3, [1])
    with pytest.warns(LeakageWarning):
        _, leak = evolve_state(build_hamiltonian(model, basis), number_state(basis, [0, 1]),
                               np.linspace(0, 10, 5))
    assert leak > 1e-8


def test_basis_limits_and_state_checks():
    with pytest.raises(ConfigError):
        FockBasis(10, [10] * 8)
    with pytest.raises(ConfigError):
        FockBasis(2, [0])
    basis = FockBasis(2, [1])
    H = build_hamiltonian(QuadraticModel(1.0, 0.5, 0.1, 0.0), basis)
    with pytest.raises(DomainError):
        evolve_state(H, 2 * number_state(basis, [0, 0]), [0.0, 1.0])
    with pytest.raises(ConfigError):
        evolve_state(H, np.ones(3), [0.0])


def test_coherent_state_displacement():
    basis = FockBasis(40, [1])
    psi = coherent_product_state(basis, 1.2 + 0.5j, [1])
    b = basis.ladder(0)
    assert np.vdot(psi, b @ psi) == pytest.approx(1.2 + 0.5j, abs=1e-10)
    assert expectation(basis.ladder(1).T @ basis.ladder(1), psi) == pytest.approx(1.0)


def test_resonant_comparison_prefers_two_mode_model():
    m = two_mode_model_from_config(SHEET, 6, 7, 4.6e4)
    T = np.pi / abs(m.eta)
    rep = compare_models(SHEET, "resonant", k=7, indices=[5, 6, 7, 8], mass=4.6e4,
                         times=np.linspace(0, T, 11), mech_cutoff=6)
    assert rep.fidelity["two_mode"].min() > 0.99
    assert rep.fidelity["single"].min() < 0.01


def test_pair_terms_match_perturbative_estimate():
    model = static_model_from_config(SHEET, 0.53, [5, 6, 7, 8], q0=0.5)
    basis = FockBasis(0, [4, 4, 4, 4])
    w = model.omega
    t = np.linspace(0, 40 * 2 * np.pi / w.min(), 401)
    study = rwa_toggle_study(model, basis, t)
    assert study.photons_off.max() < 1e-12
    assert study.summary()["ratio"] == pytest.approx(1.0, abs=0.03)
    assert pair_photon_estimate(model) > 0


def test_chi_zero_no_coupling():
    cfg = CavityConfig(1.0, 0.01, 0.0, surrogate=True, units=NATURAL)
    assert two_mode_model_from_config(cfg, 3, 4, 1.0).eta == 0.0
