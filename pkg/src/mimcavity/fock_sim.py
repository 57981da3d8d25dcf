"""Truncated Fock-space models of the membrane and a few cavity modes.

All Hamiltonians are stored divided by hbar, so matrix entries are angular
frequencies.  The membrane displacement operator is
``x = x_zpf (b + b^+)`` with ``x_zpf = sqrt(hbar / 2 m Omega)``.

Basis ordering is ``(n_b, n_1, ..., n_K)`` with the last mode varying
fastest.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import jv

from .couplings import coupling_set
from .effective import eta_from_force_matrix, linearized_hamiltonian_coeffs
from .errors import ConfigError, DomainError
from .spectral import CavityConfig

__all__ = [
    "FockBasis",
    "FockHamiltonian",
    "LeakageWarning",
    "LinearizedModel",
    "ModelComparison",
    "QuadraticModel",
    "RWAStudy",
    "StaticQuadraticModel",
    "TwoModeResonantModel",
    "build_hamiltonian",
    "compare_models",
    "evolve_state",
    "expectation",
    "linearized_model_from_config",
    "number_state",
    "pair_photon_estimate",
    "coherent_product_state",
    "rwa_toggle_study",
    "static_model_from_config",
    "two_mode_model_from_config",
]

DEFAULT_MAX_DIM = 4_000_000
LEAK_LIMIT = 1e-8


class LeakageWarning(UserWarning):
    """Population reached the top retained Fock layer."""


# ---------------------------------------------------------------------------
# basis


class FockBasis:
    """Product basis with cutoffs ``[n_b_max, n_1_max, ..., n_K_max]``."""

    def __init__(self, mech_cutoff, photon_cutoffs, max_dim=DEFAULT_MAX_DIM):
        cut = [int(mech_cutoff)] + [int(c) for c in photon_cutoffs]
        if min(cut) < 0 or any(c < 1 for c in cut[1:]):
            raise ConfigError("photon cutoffs must be >= 1 and the mechanical cutoff >= 0")
        self.cutoffs = tuple(cut)
        self.shape = tuple(c + 1 for c in cut)
        self.dim = int(np.prod(self.shape, dtype=object))
        if self.dim > max_dim:
            raise ConfigError(f"basis dimension {self.dim} exceeds the limit {max_dim}")

    @property
    def K(self):
        return len(self.cutoffs) - 1

    def index(self, occupations):
        return int(np.ravel_multi_index(tuple(occupations), self.shape))

    def occupations(self, index):
        return np.unravel_index(index, self.shape)

    def number_diagonal(self, mode):
        """Occupation of ``mode`` (0 = membrane) on every basis state."""
        return np.asarray(np.unravel_index(np.arange(self.dim), self.shape)[mode], dtype=float)

    def ladder(self, mode):
        """Annihilation operator of ``mode`` as a sparse matrix."""
        mats = []
        for i, n in enumerate(self.shape):
            if i == mode:
                mats.append(sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n)))
            else:
                mats.append(sp.identity(n, format="csr"))
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out.tocsr()

    def top_layer(self, mode):
        return self.number_diagonal(mode) == self.cutoffs[mode]


def number_state(basis: FockBasis, occupations):
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index(occupations)] = 1.0
    return psi


def coherent_product_state(basis: FockBasis, alpha, photons):
    """Membrane coherent state ``|alpha>`` times a photon number state (renormalised)."""
    nb = basis.shape[0]
    n = np.arange(nb)
    logf = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * logf)
    amp = amp * np.exp(1j * np.angle(alpha) * n)
    psi = np.zeros(basis.dim, dtype=complex)
    for k in range(nb):
        psi[basis.index((k, *photons))] = amp[k]
    return psi / np.linalg.norm(psi)


def expectation(op, psi):
    return np.real(np.vdot(psi, op @ psi))


# ---------------------------------------------------------------------------
# model specifications (all frequencies in rad/s, hbar = 1)


@dataclass(frozen=True)
class LinearizedModel:
    """``Omega(b^+b + 1/2) + sum w_k a_k^+a_k + x_zpf (b+b^+) sum F_kj (...)``.

    ``F`` is the force matrix divided by hbar; entry ``(k, j)`` multiplies
    ``a_k^+ a_j^+ + a_k a_j + a_k^+ a_j + a_j^+ a_k``.  With ``rwa`` the
    off-diagonal scattering keeps only the ``b`` or ``b^+`` partner whose
    combined rotation is slower; ``pairs=False`` drops photon pair terms.
    """

    omega: np.ndarray
    Omega: float
    x_zpf: float
    F: np.ndarray
    rwa: bool = False
    pairs: bool = True
    tag: str = "linearized-multimode"


@dataclass(frozen=True)
class QuadraticModel:
    """``Omega(b^+b + 1/2) + w a^+a + B x^2 a^+a`` (``B`` in rad/s/m^2).

    With ``rwa`` the displacement square is replaced by
    ``x_zpf^2 (2 b^+b + 1)``.
    """

    omega: float
    Omega: float
    x_zpf: float
    B: float
    slope: float = 0.0
    rwa: bool = False
    tag: str = "quadratic-single-mode"

    def renormalized_Omega(self, photons):
        """``sqrt(Omega^2 + 2 hbar n B / m)`` written with ``x_zpf``."""
        return np.sqrt(self.Omega**2 + 4 * self.Omega * self.B * self.x_zpf**2 * photons)


@dataclass(frozen=True)
class TwoModeResonantModel:
    """``Omega b^+b + w1 n1 + w2 n2 + eta (b + b^+)(a1^+a2 + a2^+a1)``."""

    omega1: float
    omega2: float
    Omega: float
    eta: float
    rwa: bool = True
    tag: str = "two-mode-resonant"

    @property
    def detuning(self):
        return self.Omega - (self.omega2 - self.omega1)


@dataclass(frozen=True)
class StaticQuadraticModel:
    """Photon-only quadratic form at fixed membrane position.

    ``sum (w_k delta_kj + xi+_kj + xi+_jk) a_k^+ a_j + sum xi-_kj (a_k^+a_j^+ + a_k a_j)``
    """

    omega: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    pairs: bool = True
    tag: str = "transformed-static"


@dataclass(frozen=True)
class FockHamiltonian:
    basis: FockBasis
    matrix: sp.csr_matrix
    tag: str
    options: dict = field(default_factory=dict)
    conserves_photons: bool = False

    @property
    def dim(self):
        return self.basis.dim

    def hermiticity_defect(self):
        d = self.matrix - self.matrix.conj().T
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def norm_bound(self):
        """Gershgorin bound on the spectral radius."""
        return float(np.max(np.abs(self.matrix).sum(axis=1)))

    def photon_number(self):
        tot = np.zeros(self.dim)
        for m in range(1, self.basis.K + 1):
            tot += self.basis.number_diagonal(m)
        return sp.diags(tot).tocsr()

    def rotating(self, omega_ref):
        """``H - omega_ref N_photon``; only valid when photon number is conserved."""
        if not self.conserves_photons:
            raise DomainError("photon number is not conserved; a rotating frame would change dynamics")
        return FockHamiltonian(self.basis, (self.matrix - omega_ref * self.photon_number()).tocsr(),
                               self.tag, dict(self.options, frame=omega_ref), True)


# ---------------------------------------------------------------------------
# assembly


def _check_hermitian(H, tol=1e-12):
    d = H - H.conj().T
    scale = max(1.0, float(np.max(np.abs(H.data))) if H.nnz else 1.0)
    if d.nnz and np.max(np.abs(d.data)) > tol * scale:
        raise DomainError("assembled Hamiltonian is not Hermitian")


def _linearized(model: LinearizedModel, basis: FockBasis):
    w = np.asarray(model.omega, dtype=float)
    F = np.asarray(model.F, dtype=float)
    K = w.size
    if basis.K != K or F.shape != (K, K):
        raise ConfigError(f"coefficients for {K} modes do not match a basis with {basis.K} modes")
    b = basis.ladder(0)
    a = [basis.ladder(m + 1) for m in range(K)]
    H = model.Omega * (b.T @ b + 0.5 * sp.identity(basis.dim))
    for k in range(K):
        H = H + w[k] * (a[k].T @ a[k])
    xz = model.x_zpf
    for k in range(K):
        for j in range(k, K):
            c = F[k, j] + F[j, k] if j != k else F[k, k]
            if c == 0:
                continue
            if j == k:
                # F_kk (2 a^+a + a^+a^+ + aa)
                H = H + 2 * xz * c * (b + b.T) @ (a[k].T @ a[k])
                if model.pairs:
                    H = H + xz * c * (b + b.T) @ (a[k].T @ a[k].T + a[k] @ a[k])
                continue
            hop = a[k].T @ a[j]  # rotates at w_k - w_j in the interaction picture
            if model.rwa:
                # b a_k^+ a_j rotates at w_k - w_j - Omega, b^+ a_k^+ a_j at w_k - w_j + Omega
                dw = w[k] - w[j]
                keep = b if abs(dw - model.Omega) <= abs(dw + model.Omega) else b.T
                term = keep @ hop
                H = H + xz * c * (term + term.T)
            else:
                H = H + xz * c * (b + b.T) @ (hop + hop.T)
            if model.pairs:
                pr = a[k].T @ a[j].T
                H = H + xz * c * (b + b.T) @ (pr + pr.T)
    return H, not model.pairs


def _quadratic(model: QuadraticModel, basis: FockBasis):
    if basis.K != 1:
        raise ConfigError("the quadratic model has a single cavity mode")
    b, a = basis.ladder(0), basis.ladder(1)
    n = a.T @ a
    nb = b.T @ b
    I = sp.identity(basis.dim, format="csr")
    H = model.Omega * (nb + 0.5 * I) + model.omega * n
    xz = model.x_zpf
    if model.slope:
        H = H + model.slope * xz * (b + b.T) @ n
    if model.rwa:
        x2 = xz**2 * (2 * nb + I)
    else:
        x = xz * (b + b.T)
        x2 = x @ x
    return H + model.B * x2 @ n, True


def _two_mode(model: TwoModeResonantModel, basis: FockBasis):
    if basis.K != 2:
        raise ConfigError("the two-mode model needs exactly two cavity modes")
    b, a1, a2 = basis.ladder(0), basis.ladder(1), basis.ladder(2)
    H = model.Omega * (b.T @ b) + model.omega1 * (a1.T @ a1) + model.omega2 * (a2.T @ a2)
    hop = a1.T @ a2
    if model.rwa:
        lo, hi = sorted((model.omega1, model.omega2))
        # keep b^+ a_low^+ a_high and its conjugate
        term = b.T @ hop if model.omega2 >= model.omega1 else b.T @ hop.T
        H = H + model.eta * (term + term.T)
    else:
        H = H + model.eta * (b + b.T) @ (hop + hop.T)
    return H, True


def _static(model: StaticQuadraticModel, basis: FockBasis):
    w = np.asarray(model.omega, dtype=float)
    K = w.size
    if basis.K != K:
        raise ConfigError(f"coefficients for {K} modes do not match a basis with {basis.K} modes")
    xp, xm = np.asarray(model.xi_plus), np.asarray(model.xi_minus)
    a = [basis.ladder(m + 1) for m in range(K)]
    H = sp.csr_matrix((basis.dim, basis.dim))
    for k in range(K):
        for j in range(K):
            h = (w[k] if k == j else 0.0) + xp[k, j] + xp[j, k]
            if h:
                H = H + h * (a[k].T @ a[j])
            if model.pairs and xm[k, j]:
                pr = a[k].T @ a[j].T
                H = H + xm[k, j] * (pr + pr.T)
    return H, not model.pairs or not np.any(xm)


_BUILDERS = {LinearizedModel: _linearized, QuadraticModel: _quadratic,
             TwoModeResonantModel: _two_mode, StaticQuadraticModel: _static}


def build_hamiltonian(model, basis: FockBasis) -> FockHamiltonian:
    """Assemble the sparse Hamiltonian (rad/s) of ``model`` on ``basis``."""
    try:
        builder = _BUILDERS[type(model)]
    except KeyError:
        raise ConfigError(f"unknown model {type(model).__name__}") from None
    H, conserves = builder(model, basis)
    H = sp.csr_matrix(H, dtype=float)
    H.eliminate_zeros()
    _check_hermitian(H)
    opts = {k: getattr(model, k) for k in ("rwa", "pairs") if hasattr(model, k)}
    return FockHamiltonian(basis, H, model.tag, opts, conserves)


# ---------------------------------------------------------------------------
# coefficient helpers


def linearized_model_from_config(config: CavityConfig, indices, mass, Omega, *, q0=None,
                                 rwa=False, pairs=True) -> LinearizedModel:
    """Linearized model around ``q0`` with SI mass (kg) and ``Omega`` (rad/s) in the config's units."""
    lc = linearized_hamiltonian_coeffs(config, q0, indices)
    x_zpf = np.sqrt(lc.hbar / (2 * mass * Omega))
    return LinearizedModel(lc.omega, Omega, x_zpf, lc.F / lc.hbar, rwa, pairs)


def two_mode_model_from_config(config: CavityConfig, k1, k2, mass, Omega=None, *, q0=None,
                               rwa=True) -> TwoModeResonantModel:
    lc = linearized_hamiltonian_coeffs(config, q0, [k1, k2])
    w1, w2 = lc.omega
    Omega = abs(w2 - w1) if Omega is None else Omega
    eta = eta_from_force_matrix(lc.F, 0, 1, mass, Omega, lc.hbar)
    return TwoModeResonantModel(w1, w2, Omega, float(eta), rwa)


def static_model_from_config(config: CavityConfig, q, indices, *, q0=None, pairs=True):
    cs = coupling_set(config, q, list(indices), q0=q0)
    c = config.units.c
    return StaticQuadraticModel(cs.omega * c, cs.xi_plus * c, cs.xi_minus * c, pairs)


# ---------------------------------------------------------------------------
# propagation


def _bounds(H):
    diag = H.diagonal()
    off = np.asarray(np.abs(H).sum(axis=1)).ravel() - np.abs(diag)
    lo, hi = float(np.min(diag - off)), float(np.max(diag + off))
    pad = 1e-9 * max(abs(lo), abs(hi), 1.0)
    return lo - pad, hi + pad


def _chebyshev(H, psi, dt, lo, hi, tol):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    z = half * dt
    nmax = int(z + 10 * np.log10(1 / tol) + 20)
    coef = jv(np.arange(nmax + 1), z)
    Hs = (H - mid * sp.identity(H.shape[0], format="csr")) / half
    t0 = psi
    t1 = -1j * (Hs @ psi)
    out = coef[0] * t0 + 2 * coef[1] * t1
    for n in range(2, nmax + 1):
        t0, t1 = t1, -2j * (Hs @ t1) + t0
        out = out + 2 * coef[n] * t1
        if n > z and abs(coef[n]) < tol:
            break
    return np.exp(-1j * mid * dt) * out


def _leakage(H: FockHamiltonian, psi, photons_closed):
    p = np.abs(psi) ** 2
    worst = 0.0
    for m in range(H.basis.K + 1):
        if (m > 0 and photons_closed) or H.basis.cutoffs[m] == 0:
            # closed photon layers, or no membrane degree of freedom at all
            continue
        worst = max(worst, float(p[H.basis.top_layer(m)].sum()))
    return worst


def evolve_state(H: FockHamiltonian, psi0, times, *, method="chebyshev", tol=1e-14,
                 max_phase=20.0, leak_limit=LEAK_LIMIT):
    """States ``exp(-i H t) psi0`` at the requested ``times`` (starting from 0).

    ``method`` is ``"chebyshev"`` (default) or ``"expm"`` (scipy Krylov-free
    reference).  Returns ``(states, leakage)`` where ``leakage`` is the
    largest population seen in a top Fock layer that the Hamiltonian can
    push beyond the cutoff.
    """
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (H.dim,):
        raise ConfigError(f"state has shape {psi.shape}, basis dimension is {H.dim}")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise DomainError("initial state is not normalised")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise DomainError("times must be non-negative and increasing")
    # photon layers cannot leak when photon number is conserved and the cutoffs hold it
    nph = H.photon_number().diagonal()
    n_max = float(np.max(nph[np.abs(psi) > 0])) if np.any(psi) else 0.0
    closed = H.conserves_photons and all(c >= n_max for c in H.basis.cutoffs[1:])
    out = np.empty((times.size, H.dim), dtype=complex)
    leak = _leakage(H, psi, closed)
    t = 0.0
    if method == "expm":
        from scipy.sparse.linalg import expm_multiply
        A = (-1j * H.matrix).tocsc()
        for i, ti in enumerate(times):
            psi = expm_multiply(A * (ti - t), psi) if ti > t else psi
            t = ti
            out[i] = psi
            leak = max(leak, _leakage(H, psi, closed))
    elif method == "chebyshev":
        lo, hi = _bounds(H.matrix)
        step = max_phase / max(0.5 * (hi - lo), 1e-300)
        for i, ti in enumerate(times):
            while ti - t > 0:
                h = min(step, ti - t)
                psi = _chebyshev(H.matrix, psi, h, lo, hi, tol)
                t += h
            t = ti
            out[i] = psi
            leak = max(leak, _leakage(H, psi, closed))
    else:
        raise ValueError(f"unknown method {method!r}")
    if leak > leak_limit:
        warnings.warn(f"top Fock layer population reached {leak:.2e}; raise the cutoffs",
                      LeakageWarning, stacklevel=2)
    return out, leak


# ---------------------------------------------------------------------------
# model comparison


@dataclass
class ModelComparison:
    """Fidelities of reduced models against the multimode reference."""

    scenario: str
    times: np.ndarray
    fidelity: dict
    photons: dict
    displacement: dict
    leakage: dict
    parameters: dict

    def to_csv(self, fh=None):
        own = fh is None
        fh = io.StringIO() if own else fh
        names = sorted(self.fidelity)
        cols = ["t"] + [f"fidelity_{n}" for n in names] + [f"n_photon_{n}" for n in sorted(self.photons)]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i, t in enumerate(self.times):
            w.writerow([repr(float(t))] + [repr(float(self.fidelity[n][i])) for n in names]
                       + [repr(float(self.photons[n][i])) for n in sorted(self.photons)])
        return fh.getvalue() if own else None

    def summary(self):
        return {"scenario": self.scenario, "parameters": self.parameters,
                "min_fidelity": {n: float(np.min(v)) for n, v in self.fidelity.items()},
                "final_fidelity": {n: float(v[-1]) for n, v in self.fidelity.items()},
                "leakage": {n: float(v) for n, v in self.leakage.items()}}

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _embed(psi_small, small: FockBasis, big: FockBasis, modes):
    """Place a reduced-model state into ``big``; other photon modes in vacuum."""
    out = np.zeros(big.dim, dtype=complex)
    nz = np.nonzero(psi_small)[0]
    for i in nz:
        occ = small.occupations(i)
        full = [0] * (big.K + 1)
        if occ[0] > big.cutoffs[0]:
            continue
        full[0] = occ[0]
        for src, dst in enumerate(modes):
            full[dst + 1] = occ[src + 1]
        out[big.index(full)] = psi_small[i]
    return out


def _second_order_shift(model: LinearizedModel, pos):
    """Photon-number-dependent ``x^2`` coefficient implied by the linear coupling.

    For static ``x`` the hopping amplitude between modes ``k`` and ``j`` is
    ``x (F_kj + F_jk)``; eliminating the other modes gives
    ``x^2 sum_j (F_kj + F_jk)^2 / (w_k - w_j)``.
    """
    w, F = np.asarray(model.omega), np.asarray(model.F)
    s = 0.0
    for j in range(w.size):
        if j != pos:
            s += (F[pos, j] + F[j, pos]) ** 2 / (w[pos] - w[j])
    return s


def compare_models(config: CavityConfig, scenario="adiabatic", *, k=None, indices=None, mass,
                   Omega=None, spacing_ratio=None, times=None, alpha=1.0, mech_cutoff=None,
                   q0=None, pairs=False, tol=1e-12) -> ModelComparison:
    """Compare reduced models with the linearized multimode model.

    ``scenario="adiabatic"``: one photon in mode ``k`` with the membrane in a
    coherent state ``alpha``; compares the bare single-mode model, the model
    with the second-order ``x^2 a^+a`` shift, and the full model.
    ``Omega`` defaults to ``spacing_ratio`` (1e-3) times the smallest gap.

    ``scenario="resonant"``: one photon in the upper mode ``k`` and the
    membrane in its ground state, ``Omega`` equal to the gap to the mode
    below; compares the single-mode model and the two-mode model.
    """
    if indices is None:
        raise ConfigError("indices of the multimode window are required")
    indices = list(indices)
    if k not in indices:
        raise ConfigError(f"mode {k} not in {indices}")
    lc = linearized_hamiltonian_coeffs(config, q0, indices)
    w = lc.omega
    pos = indices.index(k)
    gaps = np.abs(np.diff(np.sort(w)))
    if scenario == "adiabatic":
        Omega = (spacing_ratio or 1e-3) * gaps.min() if Omega is None else Omega
    elif scenario == "resonant":
        if pos == 0:
            raise ConfigError("resonant scenario needs a lower partner mode in the window")
        Omega = w[pos] - w[pos - 1] if Omega is None else Omega
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    x_zpf = np.sqrt(lc.hbar / (2 * mass * Omega))
    full = LinearizedModel(w, Omega, x_zpf, lc.F / lc.hbar, rwa=False, pairs=pairs)
    K = len(indices)
    if mech_cutoff is None:
        mech_cutoff = int(max(6, np.ceil(abs(alpha) ** 2 + 8 * abs(alpha) + 6)))
    photon_cut = [2 if pairs else 1] * K
    big = FockBasis(mech_cutoff, photon_cut)
    Hf = build_hamiltonian(full, big)
    if times is None:
        times = np.linspace(0, 20 * 2 * np.pi / Omega, 41)
    times = np.asarray(times, dtype=float)

    reduced = {}
    if scenario == "adiabatic":
        small = FockBasis(mech_cutoff, [1])
        occ0 = [0] * K
        occ0[pos] = 1
        psi_full0 = coherent_product_state(big, alpha, occ0)
        psi_small0 = coherent_product_state(small, alpha, [1])
        slope = 2 * full.F[pos, pos]
        B = _second_order_shift(full, pos)
        reduced["bare"] = (QuadraticModel(w[pos], Omega, x_zpf, 0.0, slope), small, [pos], psi_small0)
        reduced["shifted"] = (QuadraticModel(w[pos], Omega, x_zpf, B, slope), small, [pos], psi_small0)
        params = {"Omega": Omega, "x_zpf": x_zpf, "B": B, "alpha": alpha}
    else:
        small1 = FockBasis(mech_cutoff, [1])
        small2 = FockBasis(mech_cutoff, [1, 1])
        occ0 = [0] * K
        occ0[pos] = 1
        psi_full0 = number_state(big, [0] + occ0)
        eta = eta_from_force_matrix(lc.F, pos - 1, pos, mass, Omega, lc.hbar)
        reduced["single"] = (QuadraticModel(w[pos], Omega, x_zpf, 0.0, 2 * full.F[pos, pos]), small1,
                             [pos], number_state(small1, [0, 1]))
        reduced["two_mode"] = (TwoModeResonantModel(w[pos - 1], w[pos], Omega, float(eta), rwa=True),
                               small2, [pos - 1, pos], number_state(small2, [0, 0, 1]))
        params = {"Omega": Omega, "x_zpf": x_zpf, "eta": float(eta)}

    # every model here conserves photon number without pairs, so a common
    # rotating frame only adds a global phase and shrinks the spectral range
    frame = w[pos] if not pairs else 0.0

    def _frame(H):
        return H.rotating(frame) if frame else H

    ref, leak_f = evolve_state(_frame(Hf), psi_full0, times, tol=tol)
    Nf = Hf.photon_number()
    fid, phot, disp, leak = {}, {"full": np.array([expectation(Nf, s) for s in ref])}, {}, {"full": leak_f}
    X = x_zpf * (big.ladder(0) + big.ladder(0).T)
    disp["full"] = np.array([expectation(X, s) for s in ref])
    for name, (model, basis, modes, psi0) in reduced.items():
        Hr = _frame(build_hamiltonian(model, basis))
        states, leak[name] = evolve_state(Hr, psi0, times, tol=tol)
        emb = [_embed(s, basis, big, modes) for s in states]
        fid[name] = np.array([abs(np.vdot(e, r)) ** 2 for e, r in zip(emb, ref)])
        phot[name] = np.array([expectation(Nf, e) for e in emb])
        disp[name] = np.array([expectation(X, e) for e in emb])
    params.update({"indices": indices, "k": k, "mass": mass, "pairs": pairs, "frame": frame,
                   "mech_cutoff": mech_cutoff})
    return ModelComparison(scenario, times, fid, phot, disp, leak, params)


# ---------------------------------------------------------------------------
# counter-rotating terms


@dataclass
class RWAStudy:
    times: np.ndarray
    photons_on: np.ndarray
    photons_off: np.ndarray
    estimate: float
    max_delta: float
    mean_delta: float

    def summary(self):
        return {"estimate": self.estimate, "max_delta": self.max_delta,
                "mean_delta": self.mean_delta, "ratio": self.mean_delta / self.estimate
                if self.estimate else float("nan")}


def pair_photon_estimate(model: StaticQuadraticModel):
    """Time-averaged photon number created from vacuum by the pair terms.

    First-order amplitude of ``|1_k 1_j>`` is ``c (e^{-i(w_k+w_j)t} - 1)/(w_k+w_j)``
    with ``c = xi-_kj + xi-_jk``; averaging ``|e^{i phi} - 1|^2`` gives 2.
    """
    w, xm = np.asarray(model.omega), np.asarray(model.xi_minus)
    est = 0.0
    for k in range(w.size):
        # |2_k>: amplitude sqrt(2) xi-_kk / (2 w_k), two photons
        est += 2 * 2 * (np.sqrt(2) * xm[k, k] / (2 * w[k])) ** 2
        for j in range(k + 1, w.size):
            est += 2 * 2 * ((xm[k, j] + xm[j, k]) / (w[k] + w[j])) ** 2
    return est


def rwa_toggle_study(model: StaticQuadraticModel, basis: FockBasis, times, psi0=None, *, tol=1e-13):
    """Photon number with and without the pair terms of a static quadratic model."""
    on = build_hamiltonian(StaticQuadraticModel(model.omega, model.xi_plus, model.xi_minus, True), basis)
    off = build_hamiltonian(StaticQuadraticModel(model.omega, model.xi_plus, model.xi_minus, False), basis)
    psi0 = number_state(basis, [0] * (basis.K + 1)) if psi0 is None else psi0
    N = on.photon_number()
    s_on, _ = evolve_state(on, psi0, times, tol=tol)
    s_off, _ = evolve_state(off, psi0, times, tol=tol)
    n_on = np.array([expectation(N, s) for s in s_on])
    n_off = np.array([expectation(N, s) for s in s_off])
    d = np.abs(n_on - n_off)
    return RWAStudy(np.asarray(times), n_on, n_off, pair_photon_estimate(model), float(d.max()),
                    float(d.mean()))
