import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimcavity.errors import DomainError
from mimcavity.spectral import (
    CavityConfig,
    cross_overlap,
    dispersion_roots,
    frequency_derivative,
    frequency_slope,
    mode_function,
    overlap_matrix,
)
from mimcavity.units import UnitSystem

NATURAL = UnitSystem(1.0, 1.0)


def transfer_end_value(w, edges, index, kicks=()):
    """phi(l) of the shooting solution by explicit 2x2 transfer matrices."""
    v = np.array([0.0, 1.0])
    for r, n in enumerate(index):
        k = n * w
        L = edges[r + 1] - edges[r]
        M = np.array([[np.cos(k * L), np.sin(k * L) / k], [-k * np.sin(k * L), np.cos(k * L)]])
        v = M @ v
        if r < len(kicks):
            v = np.array([v[0], v[1] - kicks[r] * w * w * v[0]])
    return v[0]


def gl_overlap(mode_a, mode_b, edges, eps, n=200):
    x, wt = np.polynomial.legendre.leggauss(n)
    tot = 0.0
    for r in range(len(eps)):
        a, b = edges[r], edges[r + 1]
        xs = 0.5 * (b - a) * x + 0.5 * (a + b)
        # stay strictly inside the region so the piecewise evaluation picks it
        tot += eps[r] * 0.5 * (b - a) * np.sum(wt * mode_a(xs) * mode_b(xs))
    return tot


def test_empty_cavity_exact():
    cfg = CavityConfig(1.0, 0.0, 3.0, units=NATURAL)
    s = dispersion_roots(cfg, 0.3, indices=np.arange(1, 51))
    np.testing.assert_allclose(s.omega, np.arange(1, 51) * np.pi, rtol=1e-12)


def test_chi_zero_matches_empty():
    cfg = CavityConfig(2.0, 0.1, 0.0, units=NATURAL)
    s = dispersion_roots(cfg, 0.7, band=20)
    np.testing.assert_allclose(s.omega, np.arange(1, 21) * np.pi / 2.0, rtol=1e-12)


def test_uniform_medium_exact():
    n = 2.2
    cfg = CavityConfig.from_index(1.0, 1.0, n, units=NATURAL)
    s = dispersion_roots(cfg, 0.5, indices=np.arange(1, 41))
    np.testing.assert_allclose(s.omega, np.arange(1, 41) * np.pi / n, rtol=1e-12)


@pytest.mark.parametrize("surrogate", [False, True])
def test_roots_satisfy_transfer_matrix(surrogate):
    cfg = CavityConfig(1.0, 0.02, 3.0, surrogate=surrogate, units=NATURAL)
    q = 0.4137
    s = dispersion_roots(cfg, q, indices=np.arange(1, 31))
    lay = cfg.layers(q)
    for w in s.omega:
        lo = transfer_end_value(w * (1 - 1e-11), lay.edges, lay.index, lay.kicks)
        hi = transfer_end_value(w * (1 + 1e-11), lay.edges, lay.index, lay.kicks)
        assert lo * hi < 0


def test_no_mode_skipped_at_doublets():
    cfg = CavityConfig.from_index(1.0, 0.02, 2.2, units=NATURAL)
    s = dispersion_roots(cfg, 0.5, band=(0.0, 200.0))
    assert np.all(np.diff(s.indices) == 1) and s.indices[0] == 1
    # count of sign changes of phi(l) on a fine grid equals mode count
    w = np.linspace(1e-3, 200.0, 200001)
    lay = cfg.layers(0.5)
    f = np.array([transfer_end_value(v, lay.edges, lay.index) for v in w[::10]])
    assert np.sum(np.sign(f[1:]) != np.sign(f[:-1])) == len(s)


@pytest.mark.parametrize("surrogate", [False, True])
def test_normalisation_against_gauss_legendre(surrogate):
    cfg = CavityConfig(1.0, 0.05, 3.0, surrogate=surrogate, units=NATURAL)
    q = 0.46
    s = dispersion_roots(cfg, q, indices=[3, 4, 9])
    lay = cfg.layers(q)
    for i, k in enumerate(s.indices):
        for j, kk in enumerate(s.indices):
            a, b = s.mode(k), s.mode(kk)
            val = gl_overlap(a, b, lay.edges, lay.eps)
            if surrogate:
                val += cfg.sigma * a(q) * b(q)
            assert abs(val - (i == j)) < 1e-10
    np.testing.assert_allclose(overlap_matrix(s), np.eye(3), atol=1e-12)


def test_boundary_conditions():
    cfg = CavityConfig(1.0, 0.05, 3.0, units=NATURAL)
    s = dispersion_roots(cfg, 0.31, indices=np.arange(1, 21))
    assert np.all(s.boundary_residual() < 1e-10)
    assert np.all(np.abs(s.evaluate([0.0])) < 1e-14)


def test_continuity_at_interfaces():
    cfg = CavityConfig(1.0, 0.05, 3.0, units=NATURAL)
    s = dispersion_roots(cfg, 0.31, indices=[5])
    for e in (1, 2):
        pl, pr, dl, dr = s.edge_values(e)
        assert abs(pl[0] - pr[0]) < 1e-12
        assert abs(dl[0] - dr[0]) < 1e-10 * s.omega[0]


def test_sheet_jump_condition():
    cfg = CavityConfig(1.0, 0.02, 3.0, surrogate=True, units=NATURAL)
    s = dispersion_roots(cfg, 0.37, indices=[4])
    pl, pr, dl, dr = s.edge_values(1)
    assert abs(pl[0] - pr[0]) < 1e-12
    assert abs((dr[0] - dl[0]) + cfg.sigma * s.omega[0] ** 2 * pl[0]) < 1e-10


@settings(max_examples=25, deadline=None)
@given(q=st.floats(0.05, 0.95), surrogate=st.booleans())
def test_mirror_symmetry(q, surrogate):
    cfg = CavityConfig(1.0, 0.02, 3.0, surrogate=surrogate, units=NATURAL)
    a = dispersion_roots(cfg, q, indices=np.arange(1, 13))
    b = dispersion_roots(cfg, 1.0 - q, indices=np.arange(1, 13))
    np.testing.assert_allclose(a.omega, b.omega, rtol=1e-12)
    np.testing.assert_allclose(frequency_slope(a), -frequency_slope(b), atol=1e-9 * a.omega.max())


def test_parity_alternates_at_centre():
    cfg = CavityConfig(1.0, 0.02, 3.0, units=NATURAL)
    s = dispersion_roots(cfg, 0.5, indices=np.arange(1, 11))
    assert np.all(s.parity()[1:] == -s.parity()[:-1])


@pytest.mark.parametrize("surrogate", [False, True])
def test_hellmann_feynman_vs_finite_difference(surrogate):
    cfg = CavityConfig(1.0, 0.03, 3.0, surrogate=surrogate, units=NATURAL)
    ks = [3, 7, 8]
    q = 0.377
    hf = frequency_slope(dispersion_roots(cfg, q, indices=ks))
    fd = frequency_derivative(cfg, q, ks, order=1, method="fd")
    np.testing.assert_allclose(hf, fd.value, rtol=1e-7, atol=1e-9)


def test_curvature_fd_vs_hf():
    cfg = CavityConfig(1.0, 0.03, 3.0, units=NATURAL)
    a = frequency_derivative(cfg, 0.5, 6, order=2, method="fd")
    b = frequency_derivative(cfg, 0.5, 6, order=2, method="hf")
    assert abs(a.value - b.value) < 1e-5 * abs(a.value)


def test_thin_sheet_approximates_slab():
    slab = CavityConfig(1.0, 1e-4, 3.0, units=NATURAL)
    sheet = slab.replace(surrogate=True)
    a = dispersion_roots(slab, 0.41, indices=np.arange(1, 9)).omega
    b = dispersion_roots(sheet, 0.41, indices=np.arange(1, 9)).omega
    np.testing.assert_allclose(a, b, rtol=1e-5)


def test_cross_overlap_identity_at_same_position():
    cfg = CavityConfig(1.0, 0.03, 3.0, units=NATURAL)
    s = dispersion_roots(cfg, 0.45, indices=[2, 3, 4])
    np.testing.assert_allclose(cross_overlap(s, s), np.eye(3), atol=1e-12)


def test_mode_function_matches_spectrum():
    cfg = CavityConfig(1.0, 0.03, 3.0, units=NATURAL)
    m = mode_function(cfg, 0.45, 5)
    s = dispersion_roots(cfg, 0.45, indices=[5])
    x = np.linspace(0, 1, 33)
    np.testing.assert_allclose(m(x), s.evaluate(x)[0], atol=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        CavityConfig(-1.0, 0.1, 1.0)
    with pytest.raises(DomainError):
        CavityConfig(1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        CavityConfig(1.0, 0.1, -0.5)
    cfg = CavityConfig(1.0, 0.1, 1.0)
    with pytest.raises(DomainError):
        dispersion_roots(cfg, 0.01, indices=[1])
    with pytest.raises(DomainError):
        dispersion_roots(cfg, 0.5, indices=[0])


def test_si_frequency_conversion(reference_cavity):
    s = dispersion_roots(reference_cavity, indices=[112780])
    assert abs(s.omega_si[0] / 1.77031849e15 - 1) < 1e-8
