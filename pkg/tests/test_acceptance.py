"""End-to-end acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (printed in the terminal summary)
before asserting, so the verdicts are visible even when a criterion fails.
"""

import time
import warnings

import numpy as np
import pytest
from scipy.optimize import curve_fit

from conftest import ACCEPTANCE_LINES
from mimcavity.classical_sim import (
    PotentialSpec,
    SimOptions,
    evolve_classical,
    make_grid,
    mode_state,
)
from mimcavity.couplings import (
    TransformedModes,
    antisymmetry_defect,
    coupling_g,
    coupling_matrices,
    coupling_set,
)
from mimcavity.effective import (
    eta_from_force_matrix,
    frequency_shift,
    linearized_hamiltonian_coeffs,
    mode_index_near,
    quadratic_coupling,
    renormalized_mass_correction,
    single_mode_shift,
    two_mode_eta,
)
from mimcavity.fock_sim import (
    FockBasis,
    TwoModeResonantModel,
    build_hamiltonian,
    evolve_state,
    number_state,
    two_mode_model_from_config,
)
from mimcavity.classical_sim import radiation_force
from mimcavity.spectral import CavityConfig, dispersion_roots, frequency_derivative
from mimcavity.units import UnitSystem

NATURAL = UnitSystem(1.0, 1.0)
REF = CavityConfig.from_index(0.06, 50e-9, 2.2)
SHEET = CavityConfig(1.0, 0.01, 3.0, surrogate=True, units=NATURAL)


class Verdict:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, label, ok, detail):
        self.checks.append((label, bool(ok), detail))

    def finish(self):
        ok = all(c[1] for c in self.checks)
        parts = "; ".join(f"{l}={'ok' if o else 'FAIL'} ({d})" for l, o, d in self.checks)
        line = f"criterion {self.number} [{self.title}]: {'PASS' if ok else 'FAIL'} - {parts}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line


def test_criterion_1_mode_regression():
    v = Verdict(1, "mode regression")
    t0 = time.perf_counter()
    k = mode_index_near(REF, 1.77e15)
    s = dispersion_roots(REF, indices=[k - 1, k, k + 1, k + 2])
    w = s.omega_si
    gaps = np.diff(w)
    period = gaps[0] + gaps[1]
    dt = time.perf_counter() - t0
    v.check("omega", abs(w[1] / 1.77e15 - 1) <= 0.01, f"{w[1]:.6e} rad/s, k={k}")
    v.check("spacing", abs(period / 3e10 - 1) <= 0.15,
            f"doublet period {period:.4e}, gaps {gaps[0]:.4e}/{gaps[1]:.4e}")
    v.check("runtime", dt < 10, f"{dt:.2f} s")
    v.finish()


def test_criterion_2_curvature_regression():
    v = Verdict(2, "curvature regression")
    t0 = time.perf_counter()
    k = mode_index_near(REF, 1.77e15)
    d2 = frequency_derivative(REF, REF.q0, k, order=2)
    val = REF.units.curvature_to_hz_nm2(d2.value)
    dt = time.perf_counter() - t0
    v.check("curvature", abs(val / -3.68e5 - 1) <= 0.05, f"{val:.5e} rad/s/nm^2")
    v.check("runtime", dt < 30, f"{dt:.2f} s")
    v.finish()


def test_criterion_3_mode_sum_regression():
    v = Verdict(3, "mode-sum regression")
    t0 = time.perf_counter()
    k = mode_index_near(REF, 1.77e15)
    rep = quadratic_coupling(REF, k, (1e15, 1e16), samples=25, spacing=3e10)
    per_mode = rep.hz_nm2(rep.per_mode_near_k)
    sampled = rep.hz_nm2(rep.samples[:, 1])
    window = rep.hz_nm2(np.mean(rep.samples[:, 1])) * (1e16 - 1e15) / 3e10
    dt = time.perf_counter() - t0
    v.check("per-mode", 0.5 <= per_mode / 0.22 <= 2, f"{per_mode:.4f} rad/s/nm^2 near k")
    v.check("spread", rep.spread <= 3,
            f"x{rep.spread:.1f} ({sampled.min():.3f}..{sampled.max():.3f})")
    v.check("window sum", 0.5 <= window / 0.7e5 <= 2,
            f"{window:.3e} with 3e10 spacing count (density-weighted {rep.hz_nm2(rep.mode_sum):.3e})")
    v.check("runtime", dt < 300, f"{dt:.1f} s")
    v.finish()


def test_criterion_4_mass_correction_order():
    v = Verdict(4, "mass-correction order")
    cav = CavityConfig.from_index(0.01, 50e-9, 2.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vac = renormalized_mass_correction(cav, 1e17)
    k = mode_index_near(cav, 1.77e15)
    per = renormalized_mass_correction(cav, photons=1, mode=k).per_photon
    n_star = 1e-15 / per
    v.check("vacuum", abs(np.log10(vac.delta_m / 1e-28)) <= 1,
            f"{vac.delta_m:.3e} kg over {vac.n_modes} modes")
    v.check("photons", abs(np.log10(n_star / 1e15)) <= 1, f"{n_star:.3e} photons for 1 pg")
    v.finish()


def test_criterion_5_exact_identities():
    v = Verdict(5, "exact identities")
    t0 = time.perf_counter()
    k = mode_index_near(REF, 1.77e15)
    q = REF.q0 + 1e-9
    ks = list(range(k - 9, k + 11))
    g_int, _, _ = coupling_matrices(REF, q, ks)
    g_quad, _, _ = coupling_matrices(REF, q, ks[:6], method="quadrature")
    cs = coupling_set(REF, q, ks)
    gram = TransformedModes(dispersion_roots(REF, q, indices=ks), cs.lam).gram()
    dt = time.perf_counter() - t0
    d_int, d_quad = antisymmetry_defect(g_int), antisymmetry_defect(g_quad)
    v.check("antisymmetry", max(d_int, d_quad) < 1e-8, f"interface {d_int:.1e}, quadrature {d_quad:.1e}")
    v.check("orthogonality", cs.orthogonality_defect() < 1e-12, f"{cs.orthogonality_defect():.1e}")
    gd = np.abs(gram - np.eye(len(ks))).max()
    v.check("gram", gd < 1e-8, f"{gd:.1e}")
    v.check("runtime", dt < 60, f"{dt:.1f} s")
    v.finish()


def _rabi(model, t):
    basis = FockBasis(3, [1, 1])
    H = build_hamiltonian(model, basis).rotating(model.omega1)
    st, _ = evolve_state(H, number_state(basis, [0, 0, 1]), t)
    return np.abs(st[:, basis.index([1, 1, 0])]) ** 2


def test_criterion_6_oracle_equivalence():
    v = Verdict(6, "oracle equivalence")
    # shift against dense diagonalisation, physical couplings and random toys
    worst = 0.0
    for dq in (0.02, 0.01, 0.005):
        cs = coupling_set(SHEET, 0.5 + dq, [5, 6, 7, 8])
        ex = np.linalg.eigvalsh(np.diag(cs.omega) + cs.xi_plus + cs.xi_plus.T)
        xi = np.abs(cs.xi_plus + cs.xi_plus.T).max()
        gap = np.diff(cs.omega).min()
        for p in range(4):
            err = abs(ex[p] - cs.omega[p] - frequency_shift(cs.omega, cs.xi_plus, p)[0])
            worst = max(worst, err / (xi**3 / gap**2))
    rng = np.random.default_rng(0)
    for _ in range(200):
        K = int(rng.integers(3, 6))
        w = np.sort(rng.uniform(1, 10, K))
        if np.diff(w).min() < 0.3:
            continue
        xp = rng.standard_normal((K, K)) * rng.uniform(1e-3, 0.05)
        ex = np.linalg.eigvalsh(np.diag(w) + xp + xp.T)
        xi = np.abs(xp + xp.T).max()
        for p in range(K):
            err = abs(ex[p] - w[p] - frequency_shift(w, xp, p)[0])
            worst = max(worst, err / (K**2 * xi**3 / np.diff(w).min() ** 2))
    v.check("shift O(xi^3)", worst <= 1, f"max error / bound = {worst:.2f}")
    # eta closed form against the force matrix
    rel = 0.0
    for k1 in (5, 6, 7):
        tm = two_mode_eta(SHEET, k1, k1 + 1, 2.5)
        lc = linearized_hamiltonian_coeffs(SHEET, None, [k1, k1 + 1])
        rel = max(rel, abs(tm.eta - eta_from_force_matrix(lc.F, 0, 1, 2.5, tm.Omega, 1.0)) / abs(tm.eta))
    v.check("eta", rel < 1e-10, f"rel diff {rel:.1e}")
    # Fock Rabi period
    m = two_mode_model_from_config(SHEET, 6, 7, 4.6e4)
    T = np.pi / abs(m.eta)
    t = np.linspace(0, 1.5 * T, 301)
    (G, _), _ = curve_fit(lambda tt, G, A: A * np.sin(G * tt) ** 2, t, _rabi(m, t),
                          p0=[abs(m.eta) * 1.01, 1.0])
    e = abs(np.pi / G / T - 1)
    v.check("Rabi period", e < 1e-4, f"rel err {e:.1e}")
    eta = 0.02
    dm = TwoModeResonantModel(18.0, 20.5, 2.5 + 1.3 * eta, eta)
    gen = np.hypot(eta, dm.detuning / 2)
    P = _rabi(dm, np.linspace(0, np.pi / gen, 2001))
    pred = eta**2 / (eta**2 + dm.detuning**2 / 4)
    v.check("detuned max", abs(P.max() - pred) < 1e-4, f"{P.max():.7f} vs {pred:.7f}")
    v.finish()


def test_criterion_7_classical_cross_validation():
    v = Verdict(7, "classical cross-validation")
    t0 = time.perf_counter()
    n_cells, q0, k = 1000, 0.53, 6
    x = make_grid(SHEET, n_cells)
    dt = 0.5 * x[1]
    # frozen membrane: field spectrum at a probe point
    st = mode_state(SHEET, x, q0, [1.0, 0.3], [k, k + 1])
    T = 200.0
    tr = evolve_classical(SHEET, st, PotentialSpec(), T, dt,
                          SimOptions(motion="frozen", sample_every=20, probes=(0.2137,)))
    sig = tr.probe[:, 0] - tr.probe[:, 0].mean()
    spec = np.abs(np.fft.rfft(sig * np.hanning(sig.size)))
    freqs = 2 * np.pi * np.fft.rfftfreq(sig.size, tr.t[1] - tr.t[0])
    w_k = dispersion_roots(SHEET, q0, indices=[k]).omega[0]
    peak = freqs[np.argmax(spec)]
    binw = freqs[1]
    v.check("FFT peak", abs(peak - w_k) <= binw, f"{peak:.4f} vs {w_k:.4f}, bin {binw:.4f}")
    # dynamic membrane: energy over ten mechanical periods
    pot = PotentialSpec("harmonic", mass=4e4, Omega=1.0, q_center=0.528)
    st = mode_state(SHEET, x, q0, [1.0, 0.5], [k, k + 1], phases=[0.0, 1.0])
    tr = evolve_classical(SHEET, st, pot, 20 * np.pi, dt, SimOptions(sample_every=100))
    drift = np.max(np.abs(tr.E_total / tr.E_total[0] - 1))
    v.check("energy drift", drift < 1e-3, f"{drift:.2e}, membrane range {np.ptp(tr.q):.1e}")
    # resonant transfer against the two-mode prediction
    w = dispersion_roots(SHEET, q0, indices=[k, k + 1]).omega
    Om = w[1] - w[0]
    amp = 0.009 / Om
    g = coupling_g(SHEET, q0, k, k + 1)
    G = amp * abs(g * (w[0] ** 2 - w[1] ** 2)) / (4 * np.sqrt(w[0] * w[1]))
    st = mode_state(SHEET, x, q0, [1.0], [k])
    tr = evolve_classical(SHEET, st, PotentialSpec(), 1.2 * np.pi / G, dt,
                          SimOptions(motion="sine", motion_params=(q0, amp, Om, 0.0),
                                     modes=(k, k + 1), sample_every=400))
    frac = tr.E_modes[:, 1] / tr.E_modes.sum(axis=1)
    (Gf, _), _ = curve_fit(lambda tt, G, A: A * np.sin(G * tt) ** 2, tr.t, frac, p0=[G, 1.0])
    rel = abs(G / Gf - 1)
    v.check("transfer period", rel < 0.1, f"{np.pi / Gf:.2f} vs {np.pi / G:.2f}")
    el = time.perf_counter() - t0
    v.check("runtime", el < 600, f"{el:.0f} s")
    v.finish()


def test_criterion_8_trivial_limits():
    v = Verdict(8, "trivial limits")
    empty = CavityConfig(1.0, 0.05, 0.0, units=NATURAL)
    sheet0 = CavityConfig(1.0, 0.05, 0.0, surrogate=True, units=NATURAL)
    zero = True
    for cfg in (empty, sheet0):
        cs = coupling_set(cfg, 0.47, [1, 2, 3, 4], q0=0.5)
        zero &= all(np.abs(m).max() == 0 for m in (cs.g, cs.f, cs.lam, cs.xi_plus, cs.xi_minus))
        zero &= single_mode_shift(cfg, 0.47, 2, K=4).delta == 0.0
        zero &= two_mode_eta(cfg, 2, 3, 1.0, 1.0).eta == 0.0
        x = make_grid(cfg, 200)
        zero &= radiation_force(mode_state(cfg, x, 0.47, [1.0], [3]), cfg) == 0.0
    v.check("chi=0 zeros", zero, "couplings, shift, eta, force")
    ks = np.arange(1, 201)
    e1 = np.abs(dispersion_roots(empty, 0.3, indices=ks).omega / (ks * np.pi) - 1).max()
    full = CavityConfig.from_index(1.0, 1.0, 2.2, units=NATURAL)
    e2 = np.abs(dispersion_roots(full, 0.5, indices=ks).omega / (ks * np.pi / 2.2) - 1).max()
    v.check("empty spectrum", e1 < 1e-12, f"{e1:.1e}")
    v.check("uniform spectrum", e2 < 1e-12, f"{e2:.1e}")
    v.finish()
