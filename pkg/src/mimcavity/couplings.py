"""Intermode coupling tensors of the moving-membrane cavity.

Conventions (row ``k``, column ``j``, natural units c = 1):

    zeta_kj = int eps (d phi_j/dq) phi_k dx
    g_kj    = -int [eps d phi_j/dq + (eps - 1) d phi_j/dx] phi_k dx
    f_kj(q) = int_{q0}^{q} g_kj(q') dq'
    lambda  = expm(f) - I

Two evaluation routes for ``g`` are provided.  ``"quadrature"`` integrates
the defining expression with a piecewise Gauss-Legendre rule, using
complex-step derivatives of the region coefficients for ``d phi/dq``.
``"interface"`` uses the mode equation to reduce ``zeta`` (k != j) to
interface terms,

    zeta_kj = -w_j^2 I_kj / (w_j^2 - w_k^2),   I_kj = int (d eps/dq) phi_j phi_k,

and evaluates the slab integral in closed form.  ``zeta_kk`` follows from
differentiating the normalisation: ``zeta_kk = -I_kk / 2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError
from .quadrature import adaptive_piecewise, integrate_interval
from .spectral import (
    CavityConfig,
    Spectrum,
    coefficient_derivatives,
    dispersion_roots,
    interface_functional,
    overlap_matrix,
    q_derivative_values,
    slab_gradient_overlap,
)

log = logging.getLogger(__name__)

__all__ = [
    "CouplingSet",
    "antisymmetry_defect",
    "TransformedModes",
    "coupling_block",
    "coupling_f",
    "coupling_g",
    "coupling_matrices",
    "coupling_set",
    "coupling_zeta",
    "gamma_coefficients",
    "lambda_matrix",
    "lambda_series",
    "transformed_modes",
    "xi_coefficients",
]


def _spectrum(config, q, indices, modes):
    if modes is not None:
        return modes if indices is None else modes.subset(indices)
    return dispersion_roots(config, q, indices=indices)


def _zeta_interface(spec: Spectrum):
    I = interface_functional(spec)
    w2 = spec.omega**2
    den = w2[None, :] - w2[:, None]
    off = ~np.eye(len(spec), dtype=bool)
    if np.any(den[off] == 0):
        raise DomainError("degenerate frequencies: interface formula for zeta undefined")
    z = np.zeros_like(I)
    z[off] = -(w2[None, :] * I)[off] / den[off]
    z[~off] = -0.5 * np.diag(I)
    return z


def coupling_block(rows: Spectrum, cols: Spectrum):
    """``(g, zeta)`` for ``k`` in ``rows`` and ``j`` in ``cols`` via interface terms.

    Unlike :func:`coupling_matrices` this never forms the square matrix, so
    one mode can be coupled to a very large set of partners.
    """
    if rows.config.empty:
        z = np.zeros((len(rows), len(cols)))
        return z, z.copy()
    I = interface_functional(rows, cols)
    wk2 = rows.omega[:, None] ** 2
    wj2 = cols.omega[None, :] ** 2
    same = rows.indices[:, None] == cols.indices[None, :]
    den = np.where(same, 1.0, wj2 - wk2)
    zeta = np.where(same, -0.5 * I, -wj2 * I / den)
    return -zeta - slab_gradient_overlap(rows, cols), zeta


def _sheet_terms(spec: Spectrum, dcoef):
    """Point contributions of surrogate sheets to (zeta, slab-gradient) matrices."""
    lay = spec.layers
    K = len(spec)
    zs, ss = np.zeros((K, K)), np.zeros((K, K))
    for i, sig in enumerate(lay.kicks):
        if not sig:
            continue
        e = i + 1
        xe = lay.edges[e]
        pl, _, dl, dr = spec.edge_values(e)
        # one-sided d phi/dq from the two adjacent regions
        left = q_derivative_values(spec, [np.nextafter(xe, -np.inf)], dcoef)[:, 0]
        right = q_derivative_values(spec, [xe], dcoef)[:, 0]
        zs += sig * np.outer(pl, 0.5 * (left + right))
        ss += sig * np.outer(pl, 0.5 * (dl + dr))
    return zs, ss


def _quadrature_parts(spec: Spectrum, rtol=1e-9):
    lay = spec.layers
    da, db, dk = coefficient_derivatives(spec)
    eps = lay.eps

    def fn(x, w):
        r = np.clip(np.searchsorted(lay.edges, x, side="right") - 1, 0, lay.nregions - 1)
        t = x - lay.edges[r]
        e = eps[r]
        k, a, b = spec.kappa[:, r], spec.alpha[:, r], spec.beta[:, r]
        c, s = np.cos(k * t), np.sin(k * t)
        slope = b * c - a * s
        phi = (a * c + b * s) * w
        dq = (da[:, r] * c + db[:, r] * s + (dk[:, r] * t - k * lay.velocity[r]) * slope) * e
        dx = k * slope * (e - 1.0)
        return np.stack([phi @ dq.T, phi @ dx.T])

    panel = 4 * np.pi / float(spec.kappa.max())
    (z, s), err = adaptive_piecewise(fn, lay.edges, panel, rtol=rtol, order=24,
                                     chunk=max(4096, 2**21 // len(spec)))
    zs, ss = _sheet_terms(spec, (da, db, dk))
    return z + zs, s + ss, err


def coupling_matrices(config: CavityConfig, q=None, indices=None, *, modes=None,
                      method="interface", rtol=1e-9):
    """Raw ``(g, zeta, slab_term)`` matrices before antisymmetrisation.

    ``slab_term[k, j] = int (eps - 1) (d phi_j/dx) phi_k dx``.
    """
    spec = _spectrum(config, q, indices, modes)
    K = len(spec)
    if spec.config.empty:
        z = np.zeros((K, K))
        return z, z.copy(), z.copy()
    if method == "interface":
        zeta = _zeta_interface(spec)
        slab = slab_gradient_overlap(spec)
    elif method == "quadrature":
        zeta, slab, _ = _quadrature_parts(spec, rtol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return -zeta - slab, zeta, slab


def antisymmetry_defect(g):
    """``max |g + g^T| / max |g|`` (0 for a zero matrix)."""
    scale = np.max(np.abs(g))
    return float(np.max(np.abs(g + g.T)) / scale) if scale > 0 else 0.0


def coupling_g(config: CavityConfig, q, k, j, modes=None, method="interface", rtol=1e-9):
    """Single coupling ``g_kj`` (1/m), antisymmetrised over the pair."""
    if k == j:
        return 0.0
    spec = _spectrum(config, q, sorted({k, j}), modes)
    g, _, _ = coupling_matrices(config, modes=spec, method=method, rtol=rtol)
    a, b = spec.position(k), spec.position(j)
    return float(0.5 * (g[a, b] - g[b, a]))


def coupling_zeta(config: CavityConfig, q, k, j, modes=None, method="interface", rtol=1e-9):
    """``zeta_kj = int eps (d phi_j/dq) phi_k dx`` (1/m)."""
    spec = _spectrum(config, q, sorted({k, j}), modes)
    _, z, _ = coupling_matrices(config, modes=spec, method=method, rtol=rtol)
    return float(z[spec.position(k), spec.position(j)])


def _antisym_g(config, q, indices, method):
    g, _, _ = coupling_matrices(config, q, indices, method=method)
    return 0.5 * (g - g.T)


def coupling_f(config: CavityConfig, q0, q, indices, *, method="interface", rtol=1e-10):
    """``f(q) = int_{q0}^{q} g(q') dq'`` for the modes ``indices``."""
    indices = list(indices)
    K = len(indices)
    if q == q0 or config.empty:
        return np.zeros((K, K))

    def fn(xs):
        return np.stack([_antisym_g(config, float(x), indices, method) for x in xs])

    val, _ = integrate_interval(fn, float(q0), float(q), rtol=rtol, order=8)
    return 0.5 * (val - val.T)


def lambda_matrix(f):
    """``expm(f) - I``; for antisymmetric ``f`` the result makes ``I + lambda`` orthogonal."""
    f = np.asarray(f, dtype=float)
    return scipy.linalg.expm(f) - np.eye(f.shape[0])


def lambda_series(f, order=3):
    """Truncated power series ``sum_{n=1}^{order} f^n / n!`` (reference only)."""
    f = np.asarray(f, dtype=float)
    term = np.eye(f.shape[0])
    out = np.zeros_like(f)
    for n in range(1, order + 1):
        term = term @ f / n
        out += term
    return out


def xi_coefficients(omega, lam, form="stable"):
    """Photon-number conserving (``+``) and pair (``-``) coefficients.

    xi^(+/-)_kj = 1/4 sqrt(w_k w_j) [2 lam_kj w_k/w_j + (lam^T W^2 lam)_kj/(w_k w_j)
                                     +/- (lam_kj - lam_jk)]

    ``form="direct"`` evaluates this literally.  The default ``"stable"``
    form substitutes ``lam^T lam = -(lam + lam^T)`` (exact when ``I + lam``
    is orthogonal), giving

        2 lam_kj (w_k - w_j)/w_j + (lam_kj - lam_jk)
            + sum_l lam_lk lam_lj (w_l^2 - w_k w_j)/(w_k w_j),

    which avoids the O(1) cancellation inside ``diag(lam)`` and keeps
    second-order shifts accurate for small displacements.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("frequencies must be positive")
    lam = np.asarray(lam, dtype=float)
    wk, wj = w[:, None], w[None, :]
    pref = 0.25 * np.sqrt(wk * wj)
    anti = lam - lam.T
    if form == "direct":
        quad = lam.T @ (w[:, None] ** 2 * lam)
        base = 2 * lam * wk / wj + quad / (wk * wj)
    elif form == "stable":
        dw = wk - wj
        K = w.size
        quad = np.empty((K, K))
        for kk in range(K):
            # w_l^2 - w_k w_j = w_l (w_l - w_k) + w_k (w_l - w_j)
            fac = w[:, None] * (w[:, None] - w[kk]) + w[kk] * (w[:, None] - w[None, :])
            quad[kk] = np.sum(lam[:, kk][:, None] * lam * fac, axis=0)
        base = 2 * lam * dw / wj + anti + quad / (wk * wj)
    else:
        raise ValueError(f"unknown form {form!r}")
    return pref * (base + anti), pref * (base - anti)


def gamma_coefficients(omega, g, hbar=1.0):
    """``c_kj = (hbar/2) g_kj sqrt(w_k / w_j)``."""
    w = np.asarray(omega, dtype=float)
    return 0.5 * hbar * np.asarray(g) * np.sqrt(w[:, None] / w[None, :])


class TransformedModes:
    """Rotated modes ``phi~_k = phi_k + sum_j lam_jk phi_j``."""

    def __init__(self, spec: Spectrum, lam):
        self.spec = spec
        self.T = np.eye(len(spec)) + np.asarray(lam)

    def evaluate(self, x, deriv=False):
        return self.T.T @ self.spec.evaluate(x, deriv)

    def gram(self):
        """Closed-form ``int eps phi~_k phi~_j dx``."""
        return self.T.T @ overlap_matrix(self.spec) @ self.T

    def gram_quadrature(self, order=16):
        """Independent check of :meth:`gram` by piecewise Gauss-Legendre."""
        lay = self.spec.layers
        panel = 2 * np.pi / float(self.spec.kappa.max())
        eps = lay.eps

        def fn(x, w):
            r = np.clip(np.searchsorted(lay.edges, x, side="right") - 1, 0, lay.nregions - 1)
            v = self.evaluate(x)
            return (v * (w * eps[r])) @ v.T

        val, _ = adaptive_piecewise(fn, lay.edges, panel, rtol=1e-12, order=order)
        for i, sig in enumerate(lay.kicks):
            if sig:
                v = self.evaluate([lay.edges[i + 1]])[:, 0]
                val = val + sig * np.outer(v, v)
        return val


def transformed_modes(modes: Spectrum, lam) -> TransformedModes:
    return TransformedModes(modes, lam)


@dataclass(frozen=True)
class CouplingSet:
    """All coupling tensors for modes ``indices`` at position ``q`` (natural units)."""

    q: float
    q0: float
    indices: np.ndarray
    omega: np.ndarray
    g: np.ndarray
    zeta: np.ndarray
    f: np.ndarray
    lam: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    raw_defect: float
    method: str = "interface"

    @property
    def K(self):
        return self.indices.size

    def orthogonality_defect(self):
        T = np.eye(self.K) + self.lam
        return float(np.max(np.abs(T @ T.T - np.eye(self.K))))

    def lambda_identity_defect(self):
        """``max |lam^T lam - lam lam^T|`` (both sums over the first index)."""
        return float(np.max(np.abs(self.lam @ self.lam.T - self.lam.T @ self.lam)))


def coupling_set(config: CavityConfig, q=None, indices=None, *, band=None, q0=None,
                 method="interface", rtol=1e-10) -> CouplingSet:
    """Build every tensor for one membrane position."""
    q = config.q0 if q is None else float(q)
    q0 = config.q0 if q0 is None else float(q0)
    spec = dispersion_roots(config, q, band=band) if indices is None else \
        dispersion_roots(config, q, indices=indices)
    g_raw, zeta, _ = coupling_matrices(config, modes=spec, method=method)
    defect = antisymmetry_defect(g_raw)
    log.info("g antisymmetry defect before enforcement: %.3e", defect)
    g = 0.5 * (g_raw - g_raw.T)
    f = coupling_f(config, q0, q, spec.indices.tolist(), method=method, rtol=rtol)
    lam = lambda_matrix(f)
    xp, xm = xi_coefficients(spec.omega, lam)
    return CouplingSet(q, q0, spec.indices.copy(), spec.omega.copy(), g, zeta, f, lam, xp, xm,
                       defect, method)
