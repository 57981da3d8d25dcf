"""Reduced models derived from the multimode Hamiltonian.

Inputs are cavity configurations (natural units inside); every returned
quantity is in SI: frequencies in rad/s, slopes in rad/s/m, curvatures and
quadratic couplings in rad/s/m^2, masses in kg.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .couplings import coupling_block, coupling_set
from .errors import DegeneracyError, DomainError
from .spectral import (
    CavityConfig,
    Spectrum,
    dispersion_roots,
    frequency_derivative,
    frequency_slope,
    piece_integral,
)

__all__ = [
    "AdiabaticityReport",
    "CutoffWarning",
    "EffectiveModelReport",
    "LinearizedCoefficients",
    "MassCorrection",
    "ShiftResult",
    "TwoModeModel",
    "bogoliubov_frequencies",
    "eta_from_force_matrix",
    "frequency_shift",
    "heisenberg_adiabatic_check",
    "linearized_hamiltonian_coeffs",
    "mode_index_near",
    "quadratic_coupling",
    "renormalized_mass_correction",
    "shift_convergence",
    "single_mode_shift",
    "two_mode_eta",
]


class CutoffWarning(UserWarning):
    """Cutoff beyond the range where a dispersionless membrane is plausible."""


def mode_index_near(config: CavityConfig, omega_si, q=None):
    """Index of the mode whose frequency is closest to ``omega_si`` (rad/s)."""
    q = config.q0 if q is None else q
    w = config.units.omega_from_si(omega_si)
    lay = config.layers(q)
    k = int(np.floor(_kernels.prufer_phase(w, lay.edges, lay.index, lay.kicks) / np.pi))
    cand = [j for j in (k, k + 1) if j >= 1]
    spec = dispersion_roots(config, q, indices=cand)
    return int(spec.indices[np.argmin(np.abs(spec.omega - w))])


def _window(k, K, kmin=1):
    lo = max(kmin, k - (K - 1) // 2)
    return list(range(lo, lo + K))


# ---------------------------------------------------------------------------
# single-mode frequency shift


@dataclass(frozen=True)
class ShiftResult:
    """Non-adiabatic shift of mode ``k`` (SI, rad/s)."""

    k: int
    delta: float
    diagonal: float
    partners: np.ndarray
    terms: np.ndarray
    denominators: np.ndarray


def frequency_shift(omega, xi_plus, pos, floor=0.0):
    """Second-order shift of entry ``pos`` for the number-conserving quadratic form.

    Returns ``(delta, terms, denominators)`` where the terms run over all
    other modes.  Raises ``DegeneracyError`` if any denominator is smaller
    than ``floor`` in magnitude.
    """
    w = np.asarray(omega, dtype=float)
    xp = np.asarray(xi_plus, dtype=float)
    dressed = w + 2 * np.diag(xp)
    others = np.arange(w.size) != pos
    den = dressed[pos] - dressed[others]
    bad = np.abs(den) <= floor
    if np.any(bad):
        raise DegeneracyError(
            f"denominator {np.min(np.abs(den)):.3e} below floor {floor:.3e}; "
            "the modes are near resonant, use the two-mode model")
    num = (xp[pos, others] + xp[others, pos]) ** 2
    terms = num / den
    return float(2 * xp[pos, pos] + terms.sum()), terms, den


def bogoliubov_frequencies(h, pair=None):
    """Normal-mode frequencies of ``sum h_kj a_k^+ a_j + 1/2 sum (P_kj a_k^+ a_j^+ + h.c.)``.

    ``h`` must be Hermitian and ``P`` symmetric.  The positive-norm
    eigenvalues of the dynamical matrix are returned in ascending order.
    """
    h = np.asarray(h)
    n = h.shape[0]
    if pair is None or not np.any(pair):
        return np.sort(np.linalg.eigvalsh(h))
    P = np.asarray(pair)
    M = np.block([[h, P], [-P.conj(), -h.conj()]])
    vals, vecs = np.linalg.eig(M)
    # symplectic norm |u|^2 - |v|^2 selects the physical branch
    norm = np.sum(np.abs(vecs[:n]) ** 2, axis=0) - np.sum(np.abs(vecs[n:]) ** 2, axis=0)
    return np.sort(vals[norm > 0].real)


def single_mode_shift(config: CavityConfig, q, k, K=8, *, indices=None, q0=None, Omega=None,
                      floor_factor=1e3) -> ShiftResult:
    """Shift ``Delta_k`` at membrane position ``q`` from ``K`` modes around ``k``.

    With ``Omega`` (rad/s) given, denominators below ``floor_factor*Omega``
    raise ``DegeneracyError``.
    """
    if K < 2 and indices is None:
        raise DomainError("need at least two modes")
    ks = list(indices) if indices is not None else _window(k, K)
    if k not in ks:
        raise DomainError(f"mode {k} not among {ks}")
    cs = coupling_set(config, q, ks, q0=q0)
    c = config.units.c
    pos = ks.index(k)
    floor = 0.0 if Omega is None else floor_factor * Omega / c
    delta, terms, den = frequency_shift(cs.omega, cs.xi_plus, pos, floor)
    partners = np.array([j for j in ks if j != k])
    return ShiftResult(k, delta * c, 2 * cs.xi_plus[pos, pos] * c, partners, terms * c, den * c)


def shift_convergence(config: CavityConfig, q, k, Ks=(4, 8, 12, 16), *, q0=None):
    """``Delta_k`` and ``2 xi+_kk`` for growing truncations ``K``.

    Returns rows ``(K, delta, diagonal)`` in rad/s.  The sums over the inner
    mode index are truncated at ``K``; for a zero-width sheet they do not
    converge, so the table documents the truncation dependence instead of
    a limit.
    """
    rows = []
    for K in Ks:
        s = single_mode_shift(config, q, k, K, q0=q0)
        rows.append((int(K), s.delta, s.diagonal))
    return np.array(rows)


# ---------------------------------------------------------------------------
# quadratic coupling at a symmetry point


@dataclass(frozen=True)
class EffectiveModelReport:
    """Coefficient of the ``x_m^2 a^+ a`` term and its ingredients (SI).

    ``table`` rows are ``(j, g_kj [1/m], term [rad/s/m^2], weight)``; the
    mode-sum contribution equals ``sum(weight * term)``.
    """

    k: int
    omega: float
    slope: float
    curvature: float
    curvature_error: float
    delta: float
    curvature_term: float
    mode_sum: float
    table: np.ndarray
    samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    window: tuple = ()
    per_mode_near_k: float = 0.0
    spread: float = 1.0
    constant_extrapolation: float = float("nan")

    @property
    def total(self):
        return self.curvature_term + self.mode_sum

    @staticmethod
    def hz_nm2(v):
        """rad/s/m^2 -> (rad/s)/nm^2"""
        return v * 1e-18


def _terms(spec_k: Spectrum, spec_j: Spectrum):
    g = coupling_block(spec_k, spec_j)[0][0]
    wk = spec_k.omega[0]
    wj = spec_j.omega
    term = g**2 * (wk - wj) ** 2 * (wk + wj) / (4 * wk * wj)
    return g, term


def _contributing(g, rel=1e-6):
    return np.abs(g) > rel * np.max(np.abs(g)) if np.any(g) else np.zeros(g.shape, bool)


def quadratic_coupling(config: CavityConfig, k, window=None, *, q0=None, samples=25, block=4,
                       spacing=None, exact=False, slope_tol=1e-9, method="fd",
                       max_exact=1_000_000) -> EffectiveModelReport:
    """Curvature and mode-sum parts of the quadratic optomechanical coupling.

    Parameters
    ----------
    window : (float, float), optional
        Partner-mode frequency interval in rad/s.  Default: 10 modes on
        either side of ``k``, summed exactly.
    samples, block : int
        Sampled mode: at ``samples`` log-spaced frequencies the couplings to
        ``block`` consecutive modes are evaluated, and the window sum is the
        integral of the per-mode contribution over the local density of
        contributing modes.
    spacing : float, optional
        Contributing-mode spacing (rad/s) for the constant-extrapolation
        estimate ``per_mode_near_k * width / spacing``; default is the
        measured spacing near ``k``.
    exact : bool
        Sum every mode in the window (feasible up to ``max_exact`` modes).
    """
    q0 = config.q0 if q0 is None else q0
    c = config.units.c
    spec_k = dispersion_roots(config, q0, indices=[k])
    wk = spec_k.omega[0]
    slope = frequency_slope(spec_k)[0]
    if abs(slope) > slope_tol * wk * wk:
        raise DomainError(f"q0={q0} is not an extremum of mode {k}: dw/dq = {slope * c:.3e} rad/s/m")
    curv = frequency_derivative(config, q0, k, order=2, method=method)
    curv_term = 0.5 * curv.value * c

    lay = config.layers(q0)
    # local neighbourhood of k, always summed exactly
    near = [j for j in range(max(1, k - block), k + block + 2) if j != k]
    g_near, t_near = _terms(spec_k, dispersion_roots(config, q0, indices=near))
    cn = _contributing(g_near)
    per_k = float(t_near[cn].mean()) * c if cn.any() else 0.0
    wn = dispersion_roots(config, q0, indices=near).omega
    spacing_k = (wn.max() - wn.min()) / max(cn.sum() - 1, 1) * c if cn.sum() > 1 else np.nan

    if window is None and not exact:
        near = [j for j in range(max(1, k - 10), k + 11) if j != k]
        sj = dispersion_roots(config, q0, indices=near)
        g, t = _terms(spec_k, sj)
        table = np.column_stack([sj.indices, g, t * c, np.ones(t.size)])
        return EffectiveModelReport(k, wk * c, slope * c, curv.value * c, curv.error * c, 0.0,
                                    curv_term, float(np.sum(t) * c), table,
                                    per_mode_near_k=per_k)
    w_lo, w_hi = (config.units.omega_from_si(v) for v in window)

    def phase_index(w):
        th = _kernels.prufer_phase(w, lay.edges, lay.index, lay.kicks)
        return int(np.floor(th / np.pi))

    if exact:
        j_lo, j_hi = phase_index(w_lo) + 1, phase_index(w_hi)
        if j_hi - j_lo + 1 > max_exact:
            raise DomainError(f"{j_hi - j_lo + 1} modes in window exceeds max_exact={max_exact}")
        rows, tot = [], 0.0
        for s in range(j_lo, j_hi + 1, 50_000):
            js = [j for j in range(s, min(s + 50_000, j_hi + 1)) if j != k]
            sj = dispersion_roots(config, q0, indices=js)
            g, t = _terms(spec_k, sj)
            rows.append(np.column_stack([sj.indices, g, t * c, np.ones(t.size)]))
        table = np.vstack(rows)
        mode_sum = float(np.sum(np.sort(table[:, 2])))
        return EffectiveModelReport(k, wk * c, slope * c, curv.value * c, curv.error * c, 0.0,
                                    curv_term, mode_sum, table, window=tuple(window),
                                    per_mode_near_k=per_k)

    ws = np.geomspace(w_lo, w_hi, samples)
    samp, entries = [], []
    for w in ws:
        j0 = max(1, phase_index(w))
        js = list(range(j0, j0 + block + 1))
        sj = dispersion_roots(config, q0, indices=js)
        g, t = _terms(spec_k, sj)
        g, t, wj = g[:block], t[:block], sj.omega
        mask = _contributing(g) & (sj.indices[:block] != k)
        n = int(mask.sum())
        sp = (wj[block] - wj[0]) / max(n, 1)
        pm = float(t[mask].mean()) if n else 0.0
        samp.append((w * c, pm * c, sp * c))
        entries.append((sj.indices[:block], g, t * c, mask, n, sp * c))
    samp = np.array(samp)
    # trapezoid weights in frequency, divided by the local spacing
    tw = np.zeros(samples)
    dw = np.diff(samp[:, 0])
    tw[:-1] += 0.5 * dw
    tw[1:] += 0.5 * dw
    rows = []
    for i, (js, g, t, mask, n, sp) in enumerate(entries):
        wgt = np.where(mask, tw[i] / (sp * max(n, 1)), 0.0)
        rows.append(np.column_stack([js, g, t, wgt]))
    table = np.vstack(rows)
    mode_sum = float(np.sum(table[:, 2] * table[:, 3]))
    pm = samp[:, 1]
    spread = float(pm.max() / pm.min()) if pm.min() > 0 else float("inf")
    sp_use = spacing if spacing is not None else spacing_k
    const = per_k * (window[1] - window[0]) / sp_use
    return EffectiveModelReport(k, wk * c, slope * c, curv.value * c, curv.error * c, 0.0,
                                curv_term, mode_sum, table, samples=samp, window=tuple(window),
                                per_mode_near_k=per_k, spread=spread,
                                constant_extrapolation=float(const))


# ---------------------------------------------------------------------------
# linearised multimode Hamiltonian and the two-mode model


@dataclass(frozen=True)
class LinearizedCoefficients:
    """``H = p^2/2m + u + sum hbar w_k a_k^+ a_k + x_m F0`` (SI).

    ``F[k, j]`` multiplies ``(a_k^+ a_j^+ + a_k a_j + a_k^+ a_j + a_j^+ a_k)``.
    """

    indices: np.ndarray
    omega: np.ndarray
    slope: np.ndarray
    g: np.ndarray
    F: np.ndarray
    hbar: float


def linearized_hamiltonian_coeffs(config: CavityConfig, q0=None, indices=None, *, K=None,
                                  hbar=None) -> LinearizedCoefficients:
    q0 = config.q0 if q0 is None else q0
    hbar = config.units.hbar if hbar is None else hbar
    c = config.units.c
    if indices is None:
        indices = range(1, (K or 4) + 1)
    spec = dispersion_roots(config, q0, indices=list(indices))
    cs = coupling_set(config, q0, spec.indices.tolist(), q0=q0)
    w = spec.omega * c
    slope = frequency_slope(spec) * c
    F = 0.5 * hbar * (np.diag(slope) + w[:, None] * np.sqrt(w[:, None] / w[None, :]) * cs.g)
    return LinearizedCoefficients(spec.indices.copy(), w, slope, cs.g, F, hbar)


def eta_from_force_matrix(F, i, j, m, Omega, hbar):
    """Resonant two-mode coupling from the symmetrised off-diagonal force (rad/s)."""
    return np.sqrt(hbar / (2 * m * Omega)) * (F[i, j] + F[j, i]) / hbar


@dataclass(frozen=True)
class TwoModeModel:
    """Two cavity modes coupled through the membrane displacement (SI)."""

    k1: int
    k2: int
    omega1: float
    omega2: float
    Omega: float
    mass: float
    g12: float
    eta: float
    hbar: float

    @property
    def detuning(self):
        return self.Omega - (self.omega2 - self.omega1)

    @property
    def zero_point(self):
        """``sqrt(hbar / 2 m Omega)``"""
        return np.sqrt(self.hbar / (2 * self.mass * self.Omega))


def two_mode_eta(config: CavityConfig, k1, k2, m, Omega=None, *, q0=None, slope_tol=1e-9,
                 hbar=None) -> TwoModeModel:
    """``eta = g12 sqrt(hbar/8 m Omega) (w1^2 - w2^2) / sqrt(w1 w2)``.

    ``Omega`` defaults to the resonant value ``w2 - w1``.
    """
    q0 = config.q0 if q0 is None else q0
    hbar = config.units.hbar if hbar is None else hbar
    c = config.units.c
    spec = dispersion_roots(config, q0, indices=[k1, k2]) if k1 != k2 else \
        dispersion_roots(config, q0, indices=[k1])
    slope = frequency_slope(spec)
    if np.any(np.abs(slope) > slope_tol * spec.omega**2):
        raise DomainError("membrane is not at a symmetry point: dw/dq = "
                          + ", ".join(f"{v * c:.3e}" for v in slope) + " rad/s/m")
    w1, w2 = spec.omega[spec.position(k1)] * c, spec.omega[spec.position(k2)] * c
    if Omega is None:
        Omega = abs(w2 - w1)
    if not (m > 0 and Omega > 0):
        raise DomainError("mass and mechanical frequency must be positive")
    if k1 == k2:
        g12 = 0.0
    else:
        g = coupling_block(spec, spec)[0]
        a, b = spec.position(k1), spec.position(k2)
        g12 = 0.5 * (g[a, b] - g[b, a])
    eta = g12 * np.sqrt(hbar / (8 * m * Omega)) * (w1**2 - w2**2) / np.sqrt(w1 * w2)
    return TwoModeModel(k1, k2, w1, w2, Omega, m, float(g12), float(eta), hbar)


# ---------------------------------------------------------------------------
# renormalised mass


@dataclass(frozen=True)
class MassCorrection:
    delta_m: float
    n_modes: int
    occupancy: str
    per_photon: float = float("nan")


def _slab_gradient_sq(spec: Spectrum):
    """``int_slab (d phi/dx)^2 dx`` per mode."""
    lay = spec.layers
    L = np.diff(lay.edges)
    out = np.zeros(len(spec))
    for r in range(lay.nregions):
        if lay.index[r] == 1.0:
            continue
        a, b, k = spec.alpha[:, r], spec.beta[:, r], spec.kappa[:, r]
        out += piece_integral(k * b, -k * a, k, k * b, -k * a, k, L[r])
    return out


def renormalized_mass_correction(config: CavityConfig, cutoff=None, *, photons=None, mode=None,
                                 q0=None, validity_limit=1e16, chunk=200_000) -> MassCorrection:
    """Mass correction ``2/c^2 int (eps-1)^2/eps <(dA/dx)^2> dx`` in kg.

    Vacuum (``photons=None``): sum of ``hbar/(2w)`` zero-point weights over
    all modes below ``cutoff`` (rad/s).  With ``photons=N`` and ``mode=k``
    only that mode contributes, with weight ``hbar N / w``.
    """
    q0 = config.q0 if q0 is None else q0
    u = config.units
    if config.empty:
        return MassCorrection(0.0, 0, "vacuum" if photons is None else f"{photons} photons")
    if config.surrogate:
        raise DomainError("the mass integral needs a resolved slab, not the sheet surrogate")
    pref = config.chi**2 / (1.0 + config.chi)
    hbar_c = u.hbar * u.c
    if photons is not None:
        if mode is None:
            raise ValueError("photon occupancy needs a mode index")
        spec = dispersion_roots(config, q0, indices=[mode])
        per = 2.0 / u.c**2 * hbar_c / spec.omega[0] * pref * _slab_gradient_sq(spec)[0]
        return MassCorrection(float(per * photons), 1, f"{photons} photons", float(per))
    if cutoff is None:
        raise ValueError("vacuum correction needs a finite cutoff")
    if cutoff > validity_limit:
        warnings.warn(f"cutoff {cutoff:.2e} rad/s exceeds the dispersionless range "
                      f"({validity_limit:.1e} rad/s)", CutoffWarning, stacklevel=2)
    lay = config.layers(q0)
    wc = u.omega_from_si(cutoff)
    kmax = int(np.floor(_kernels.prufer_phase(wc, lay.edges, lay.index, lay.kicks) / np.pi))
    parts = []
    for s in range(1, kmax + 1, chunk):
        spec = dispersion_roots(config, q0, indices=np.arange(s, min(s + chunk, kmax + 1)))
        parts.append(hbar_c / (2 * spec.omega) * pref * _slab_gradient_sq(spec))
    energy = float(np.sum(np.sort(np.concatenate(parts)))) if parts else 0.0
    return MassCorrection(2.0 * energy / u.c**2, kmax, "vacuum")


# ---------------------------------------------------------------------------
# adiabaticity diagnostics


@dataclass(frozen=True)
class AdiabaticityReport:
    k: int
    Omega: float
    nearest: int
    spacing: float
    ratio: float
    rwa_ratio: float
    flag: str


def heisenberg_adiabatic_check(config: CavityConfig, k, Omega, *, q0=None, K=4,
                               valid_ratio=10.0, resonance_tol=0.1) -> AdiabaticityReport:
    """Compare ``Omega`` with the distance from ``w_k`` to its neighbours."""
    q0 = config.q0 if q0 is None else q0
    c = config.units.c
    ks = [j for j in range(max(1, k - K), k + K + 1)]
    spec = dispersion_roots(config, q0, indices=ks)
    w = spec.omega * c
    wk = w[spec.position(k)]
    others = spec.indices != k
    gaps = np.abs(w[others] - wk)
    i = int(np.argmin(gaps))
    ratio = gaps[i] / Omega
    if abs(ratio - 1.0) <= resonance_tol:
        flag = "resonant; use two-mode model"
    elif ratio >= valid_ratio:
        flag = "adiabatic elimination valid"
    else:
        flag = "intermediate; perturbative elimination unreliable"
    return AdiabaticityReport(k, Omega, int(spec.indices[others][i]), float(gaps[i]),
                              float(ratio), float(Omega / wk), flag)
