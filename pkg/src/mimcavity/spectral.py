"""Instantaneous eigenmodes of a 1-D cavity with a movable dielectric slab.

The mode problem is ``phi'' + eps(x, q) w^2 phi = 0`` on ``[0, l]`` with
``phi(0) = phi(l) = 0`` and the weighted normalisation
``int eps phi_k phi_j dx = delta_kj``.  Inside every region of constant
index the solution is a sinusoid, so modes are stored as per-region
coefficients ``(alpha, beta)`` of

    phi(x) = alpha cos(kappa (x - e_r)) + beta sin(kappa (x - e_r)),

where ``e_r`` is the left edge of the region and ``kappa = n_r w``.  All
integrals of products of modes are then available in closed form.

Roots are located through the Prufer phase of the shooting solution, which
is monotone in ``w`` and equals ``k*pi`` exactly at the k-th eigenvalue, so
mode indices are exact and doublet members are never skipped.

A zero-width surrogate for thin slabs is supported: the slab is replaced
by a polarisable sheet of strength ``sigma = chi*d`` at ``x = q``, across
which ``phi`` is continuous and ``phi'`` jumps by ``-sigma w^2 phi``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import BranchTrackingError, DomainError
from .units import SI, UnitSystem

__all__ = [
    "CavityConfig",
    "CavityMode",
    "DerivativeResult",
    "DielectricProfile",
    "Layers",
    "Spectrum",
    "cross_overlap",
    "dispersion_roots",
    "frequency_derivative",
    "frequency_slope",
    "mode_function",
    "mode_overlap",
    "overlap_matrix",
]


# ---------------------------------------------------------------------------
# configuration


class Layers(NamedTuple):
    """Piecewise-constant description of eps(x) at one membrane position.

    ``velocity[i]`` is ``d edges[i] / dq``; ``kicks[i]`` is the sheet
    strength on interior edge ``i + 1``.
    """

    edges: np.ndarray
    index: np.ndarray
    kicks: np.ndarray
    velocity: np.ndarray

    @property
    def nregions(self):
        return self.index.size

    @property
    def eps(self):
        return self.index**2


@dataclass(frozen=True)
class CavityConfig:
    """Cavity geometry and membrane material.

    Parameters
    ----------
    length : float
        Mirror separation ``l`` in metres.
    slab_width : float
        Membrane thickness ``d`` in metres.
    chi : float
        Susceptibility; the refractive index is ``sqrt(1 + chi)``.
    q0 : float, optional
        Reference (equilibrium) membrane position, default ``l/2``.
    surrogate : bool
        Replace the slab by a zero-width sheet of strength ``chi*d``.
    """

    length: float
    slab_width: float
    chi: float
    q0: float | None = None
    surrogate: bool = False
    units: UnitSystem = field(default=SI, compare=False)

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"cavity length must be positive, got {self.length}")
        if not 0 <= self.slab_width <= self.length:
            raise DomainError(f"slab width {self.slab_width} outside [0, {self.length}]")
        if not self.chi >= 0:
            raise DomainError(f"susceptibility must be non-negative, got {self.chi}")
        if self.q0 is None:
            object.__setattr__(self, "q0", 0.5 * self.length)
        self.check_position(self.q0)

    @classmethod
    def from_index(cls, length, slab_width, n, **kw):
        return cls(length=length, slab_width=slab_width, chi=n * n - 1.0, **kw)

    @property
    def n(self):
        return float(np.sqrt(1.0 + self.chi))

    @property
    def sigma(self):
        """Sheet strength of the thin-slab surrogate."""
        return self.chi * self.slab_width

    @property
    def empty(self):
        return self.chi == 0 or self.slab_width == 0

    def replace(self, **kw):
        d = dict(length=self.length, slab_width=self.slab_width, chi=self.chi,
                 q0=self.q0, surrogate=self.surrogate, units=self.units)
        d.update(kw)
        return CavityConfig(**d)

    def position_bounds(self):
        if self.surrogate or self.empty:
            return 0.0, self.length
        h = 0.5 * self.slab_width
        return h, self.length - h

    def check_position(self, q):
        lo, hi = self.position_bounds()
        ok = lo < q < hi if (self.surrogate or self.empty) else lo <= q <= hi
        if not (np.isfinite(q) and ok):
            raise DomainError(f"membrane position q={q!r} outside allowed range ({lo}, {hi})")

    def layers(self, q, check=True) -> Layers:
        if check:
            self.check_position(q)
        l = self.length
        if self.empty:
            return Layers(np.array([0.0, l]), np.ones(1), np.zeros(0), np.zeros(2))
        if self.surrogate:
            return Layers(np.array([0.0, q, l]), np.ones(2), np.array([self.sigma]),
                          np.array([0.0, 1.0, 0.0]))
        h = 0.5 * self.slab_width
        edges = [0.0, q - h, q + h, l]
        index = [1.0, self.n, 1.0]
        vel = [0.0, 1.0, 1.0, 0.0]
        # drop zero-length outer regions (slab touching a mirror)
        if edges[1] <= 0.0:
            edges, index, vel = edges[1:], index[1:], vel[1:]
            edges[0] = 0.0
        if edges[-2] >= l:
            edges, index, vel = edges[:-1], index[:-1], vel[:-1]
            edges[-1] = l
        nk = len(index) - 1
        return Layers(np.array(edges, dtype=float), np.array(index), np.zeros(nk), np.array(vel))


class DielectricProfile:
    """Callable ``eps(x, q)``; the surrogate sheet is not representable pointwise."""

    def __init__(self, config: CavityConfig):
        self.config = config

    def __call__(self, x, q):
        cfg = self.config
        x = np.asarray(x, dtype=float)
        if cfg.empty or cfg.surrogate:
            return np.ones_like(x)
        h = 0.5 * cfg.slab_width
        inside = (x >= q - h) & (x <= q + h)
        return np.where(inside, 1.0 + cfg.chi, 1.0)

    def discontinuities(self, q):
        cfg = self.config
        if cfg.empty:
            return np.zeros(0)
        if cfg.surrogate:
            return np.array([q])
        h = 0.5 * cfg.slab_width
        return np.array([q - h, q + h])


# ---------------------------------------------------------------------------
# closed-form building blocks


def _sinc(z):
    # numpy's sinc, but safe for complex-step arguments
    z = np.asarray(z)
    pz = np.pi * np.where(z == 0, 1.0, z)
    return np.where(z == 0, 1.0, np.sin(pz) / pz)


def _int_cos(u, L):
    """int_0^L cos(u x) dx"""
    return L * _sinc(u * L / np.pi)


def _int_sin(u, L):
    """int_0^L sin(u x) dx"""
    s = _sinc(u * L / (2 * np.pi))
    return L * (0.5 * u * L) * s * s


def piece_integral(a1, b1, k1, a2, b2, k2, L):
    """int_0^L (a1 cos k1 x + b1 sin k1 x)(a2 cos k2 x + b2 sin k2 x) dx.

    Arguments broadcast; product-to-sum identities keep the result accurate
    for nearly equal wavenumbers.
    """
    up = k1 + k2
    um = k1 - k2
    cm, cp = _int_cos(um, L), _int_cos(up, L)
    sm, sp = _int_sin(um, L), _int_sin(up, L)
    return 0.5 * (a1 * a2 * (cm + cp) + b1 * b2 * (cm - cp)
                  + a1 * b2 * (sp - sm) + b1 * a2 * (sp + sm))


def _propagate(w, lay: Layers):
    """Region coefficients of the normalised modes at frequencies ``w``.

    Works for complex input (complex-step differentiation).
    Returns ``alpha, beta, kappa`` of shape ``(K, R)``.
    """
    w = np.atleast_1d(w)
    edges, index, kicks = lay.edges, lay.index, lay.kicks
    R = index.size
    L = np.diff(edges)
    kap = w[:, None] * index[None, :]
    dt = np.result_type(w, edges, float)
    alpha = np.zeros(kap.shape, dtype=dt)
    beta = np.zeros(kap.shape, dtype=dt)
    a = np.zeros(w.shape, dtype=dt)
    b = 1.0 / kap[:, 0]
    norm2 = np.zeros(w.shape, dtype=dt)
    for r in range(R):
        alpha[:, r] = a
        beta[:, r] = b
        k = kap[:, r]
        norm2 = norm2 + index[r] ** 2 * piece_integral(a, b, k, a, b, k, L[r])
        if r < R - 1:
            c, s = np.cos(k * L[r]), np.sin(k * L[r])
            phi = a * c + b * s
            dphi = k * (b * c - a * s) - kicks[r] * w * w * phi
            norm2 = norm2 + kicks[r] * phi * phi
            a = phi
            b = dphi / kap[:, r + 1]
    scale = 1.0 / np.sqrt(norm2)
    return alpha * scale[:, None], beta * scale[:, None], kap


def _region_of(edges, x):
    r = np.searchsorted(edges, x, side="right") - 1
    return np.clip(r, 0, edges.size - 2)


# ---------------------------------------------------------------------------
# mode containers


@dataclass(frozen=True, eq=False)
class CavityMode:
    """One normalised instantaneous eigenmode (natural units, c = 1)."""

    k: int
    omega: float
    q: float
    layers: Layers
    alpha: np.ndarray
    beta: np.ndarray
    kappa: np.ndarray
    units: UnitSystem = SI

    @property
    def omega_si(self):
        return self.units.omega_to_si(self.omega)

    @property
    def wavelength(self):
        """Vacuum wavelength in metres."""
        return 2 * np.pi / self.omega

    def _eval(self, x, deriv):
        x = np.asarray(x, dtype=float)
        r = _region_of(self.layers.edges, x)
        t = x - self.layers.edges[r]
        k, a, b = self.kappa[r], self.alpha[r], self.beta[r]
        c, s = np.cos(k * t), np.sin(k * t)
        if deriv:
            return k * (b * c - a * s)
        return a * c + b * s

    def __call__(self, x):
        return self._eval(x, False)

    def dx(self, x):
        """Spatial derivative; at an interface the right-hand limit is returned."""
        return self._eval(x, True)

    def one_sided(self, edge):
        """``(phi_left, phi_right, dphi_left, dphi_right)`` at interior edge number ``edge``."""
        r = edge
        L = self.layers.edges[r] - self.layers.edges[r - 1]
        k, a, b = self.kappa[r - 1], self.alpha[r - 1], self.beta[r - 1]
        c, s = np.cos(k * L), np.sin(k * L)
        return (a * c + b * s, self.alpha[r], k * (b * c - a * s), self.kappa[r] * self.beta[r])

    @property
    def norm_scale(self):
        """Normalisation applied to the shooting solution with ``phi'(0) = 1``."""
        return self.beta[0] * self.kappa[0]


class Spectrum:
    """A set of modes at one membrane position, stored as arrays.

    Attributes
    ----------
    indices : (K,) int
        1-based mode numbers (ascending frequency).
    omega : (K,) float
        Eigenfrequencies in rad/m (natural units).
    alpha, beta, kappa : (K, R)
        Region coefficients, see module docstring.
    """

    def __init__(self, config: CavityConfig, q, indices, omega, layers=None):
        self.config = config
        self.q = float(q)
        self.layers = layers if layers is not None else config.layers(q)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.omega = np.asarray(omega, dtype=float)
        self.alpha, self.beta, self.kappa = _propagate(self.omega, self.layers)
        for arr in (self.indices, self.omega, self.alpha, self.beta, self.kappa):
            arr.setflags(write=False)

    def __len__(self):
        return self.indices.size

    def __repr__(self):
        return (f"Spectrum(q={self.q!r}, K={len(self)}, "
                f"k=[{self.indices[:1].tolist()}..{self.indices[-1:].tolist()}])")

    @property
    def omega_si(self):
        return self.config.units.omega_to_si(self.omega)

    def position(self, k):
        hit = np.flatnonzero(self.indices == k)
        if hit.size == 0:
            raise DomainError(f"mode {k} not in computed band")
        return int(hit[0])

    def mode(self, k) -> CavityMode:
        i = self.position(k)
        return CavityMode(int(k), float(self.omega[i]), self.q, self.layers,
                          self.alpha[i].copy(), self.beta[i].copy(), self.kappa[i].copy(),
                          self.config.units)

    def subset(self, ks):
        pos = [self.position(k) for k in ks]
        return Spectrum(self.config, self.q, self.indices[pos], self.omega[pos], self.layers)

    def evaluate(self, x, deriv=False):
        """Mode values (or x-derivatives) at points ``x``; shape ``(K, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        r = _region_of(self.layers.edges, x)
        t = x - self.layers.edges[r]
        k = self.kappa[:, r]
        a, b = self.alpha[:, r], self.beta[:, r]
        c, s = np.cos(k * t), np.sin(k * t)
        if deriv:
            return k * (b * c - a * s)
        return a * c + b * s

    def edge_values(self, edge):
        """One-sided values at interior edge ``edge`` (1..R-1), each shape ``(K,)``."""
        r = edge
        L = self.layers.edges[r] - self.layers.edges[r - 1]
        k, a, b = self.kappa[:, r - 1], self.alpha[:, r - 1], self.beta[:, r - 1]
        c, s = np.cos(k * L), np.sin(k * L)
        return a * c + b * s, self.alpha[:, r], k * (b * c - a * s), self.kappa[:, r] * self.beta[:, r]

    def boundary_slopes(self):
        """``phi'(0)`` and ``phi'(l)`` for every mode."""
        kl, al, bl = self.kappa[:, -1], self.alpha[:, -1], self.beta[:, -1]
        L = self.layers.edges[-1] - self.layers.edges[-2]
        return self.kappa[:, 0] * self.beta[:, 0], kl * (bl * np.cos(kl * L) - al * np.sin(kl * L))

    def parity(self):
        """+1 (even about l/2), -1 (odd) per mode; meaningful only at q = l/2."""
        d0, dl = self.boundary_slopes()
        return np.where(d0 * dl < 0, 1, -1)

    def boundary_residual(self):
        """``|phi(l)|`` relative to the mode amplitude scale."""
        kl, al, bl = self.kappa[:, -1], self.alpha[:, -1], self.beta[:, -1]
        L = self.layers.edges[-1] - self.layers.edges[-2]
        end = al * np.cos(kl * L) + bl * np.sin(kl * L)
        return np.abs(end) / np.sqrt(al**2 + bl**2)


# ---------------------------------------------------------------------------
# overlaps and interface functionals


def _shift(alpha, beta, kappa, t0):
    c, s = np.cos(kappa * t0), np.sin(kappa * t0)
    return alpha * c + beta * s, beta * c - alpha * s


def cross_overlap(sa: Spectrum, sb: Spectrum, weight="b"):
    """Matrix ``int eps_b phi^a_i phi^b_j dx`` for modes at possibly different q.

    ``weight`` selects whose dielectric profile is used (``"a"`` or ``"b"``).
    """
    wl = sb.layers if weight == "b" else sa.layers
    brk = np.union1d(sa.layers.edges, sb.layers.edges)
    out = np.zeros((len(sa), len(sb)))
    for x0, x1 in zip(brk[:-1], brk[1:]):
        if x1 <= x0:
            continue
        mid = 0.5 * (x0 + x1)
        ra = int(_region_of(sa.layers.edges, mid))
        rb = int(_region_of(sb.layers.edges, mid))
        rw = int(_region_of(wl.edges, mid))
        aa, ba = _shift(sa.alpha[:, ra], sa.beta[:, ra], sa.kappa[:, ra], x0 - sa.layers.edges[ra])
        ab, bb = _shift(sb.alpha[:, rb], sb.beta[:, rb], sb.kappa[:, rb], x0 - sb.layers.edges[rb])
        out += wl.index[rw] ** 2 * piece_integral(
            aa[:, None], ba[:, None], sa.kappa[:, ra][:, None],
            ab[None, :], bb[None, :], sb.kappa[:, rb][None, :], x1 - x0)
    for i, sig in enumerate(wl.kicks):
        if sig == 0:
            continue
        xe = wl.edges[i + 1]
        out += sig * np.outer(sa.evaluate(xe)[:, 0], sb.evaluate(xe)[:, 0])
    return out


def overlap_matrix(spec: Spectrum):
    """Closed-form Gram matrix ``int eps phi_k phi_j dx``."""
    lay = spec.layers
    L = np.diff(lay.edges)
    K = len(spec)
    out = np.zeros((K, K))
    for r in range(lay.nregions):
        a, b, k = spec.alpha[:, r], spec.beta[:, r], spec.kappa[:, r]
        out += lay.index[r] ** 2 * piece_integral(a[:, None], b[:, None], k[:, None],
                                                  a[None, :], b[None, :], k[None, :], L[r])
    for i, sig in enumerate(lay.kicks):
        if sig:
            pl = spec.edge_values(i + 1)[0]
            out += sig * np.outer(pl, pl)
    return out


def interface_functional(spec: Spectrum, other: Spectrum | None = None):
    """Matrix ``I_kj = int (d eps/dq) phi_j phi_k dx`` as interface terms.

    Rows run over ``spec``, columns over ``other`` (default ``spec``); both
    must be at the same position.  A moving step contributes
    ``-v (eps_right - eps_left) F(e)`` and a moving sheet ``v sigma <F'>(e)``
    with ``<.>`` the mean of the one-sided limits.
    """
    other = spec if other is None else other
    lay = spec.layers
    out = np.zeros((len(spec), len(other)))
    eps = lay.eps
    for i in range(1, lay.nregions):
        v = lay.velocity[i]
        if v == 0:
            continue
        pk, _, dlk, drk = spec.edge_values(i)
        pj, _, dlj, drj = other.edge_values(i)
        jump = eps[i] - eps[i - 1]
        if jump:
            out -= v * jump * np.outer(pk, pj)
        sig = lay.kicks[i - 1]
        if sig:
            out += v * sig * (np.outer(pk, 0.5 * (dlj + drj)) + np.outer(0.5 * (dlk + drk), pj))
    return out


def slab_gradient_overlap(spec: Spectrum, other: Spectrum | None = None):
    """Matrix ``int (eps - 1) (d phi_j/dx) phi_k dx`` (rows ``spec``, columns ``other``)."""
    other = spec if other is None else other
    lay = spec.layers
    L = np.diff(lay.edges)
    out = np.zeros((len(spec), len(other)))
    for r in range(lay.nregions):
        chi_r = lay.index[r] ** 2 - 1.0
        if chi_r == 0:
            continue
        a, b, k = spec.alpha[:, r], spec.beta[:, r], spec.kappa[:, r]
        aj, bj, kj = other.alpha[:, r], other.beta[:, r], other.kappa[:, r]
        # phi_j' = k_j (beta_j cos - alpha_j sin)
        out += chi_r * piece_integral(a[:, None], b[:, None], k[:, None],
                                      (kj * bj)[None, :], (-kj * aj)[None, :], kj[None, :], L[r])
    for i, sig in enumerate(lay.kicks):
        if sig:
            pk = spec.edge_values(i + 1)[0]
            _, _, dl, dr = other.edge_values(i + 1)
            out += sig * np.outer(pk, 0.5 * (dl + dr))
    return out


# ---------------------------------------------------------------------------
# roots


@functools.lru_cache(maxsize=256)
def _roots_cached(config: CavityConfig, q: float, indices: tuple, backend: str):
    kern = _kernels.get_backend(backend) if backend else _kernels
    lay = config.layers(q)
    ks = np.asarray(indices, dtype=float)
    if config.empty:
        return ks * np.pi / config.length
    lopt = float(np.sum(lay.index * np.diff(lay.edges)))
    # each interface or sheet moves the phase by less than pi
    slack = lay.nregions
    lo = np.maximum((ks - slack) * np.pi / lopt, 0.0)
    hi = (ks + slack) * np.pi / lopt
    w = kern.solve_roots(ks, lo, hi, lay.edges, lay.index, lay.kicks)
    w = np.asarray(w, dtype=float)
    w.setflags(write=False)
    return w


def _scan_band(config: CavityConfig, q, w_lo, w_hi, kern, floor=1e-14):
    """Bracket every root in ``[w_lo, w_hi]`` by a phase-counting scan."""
    lay = config.layers(q)
    step = np.pi / (4 * lay.index.max() * config.length)
    npts = max(int(np.ceil((w_hi - w_lo) / step)), 1) + 1
    grid = np.linspace(w_lo, w_hi, npts)
    th = kern.prufer_phase(grid, lay.edges, lay.index, lay.kicks)
    cnt = np.floor(th / np.pi).astype(np.int64)
    brackets = []
    stack = [(grid[i], grid[i + 1], cnt[i], cnt[i + 1]) for i in np.flatnonzero(np.diff(cnt))]
    stack.reverse()
    while stack:
        a, b, ca, cb = stack.pop()
        if cb - ca == 1:
            brackets.append((a, b, cb))
            continue
        if b - a < floor * max(abs(b), 1.0):
            raise BranchTrackingError(
                f"roots {ca + 1}..{cb} closer than refinement floor near w={a!r}",
                indices=range(ca + 1, cb + 1))
        m = 0.5 * (a + b)
        cm = int(np.floor(kern.prufer_phase(m, lay.edges, lay.index, lay.kicks) / np.pi))
        for piece in ((m, b, cm, cb), (a, m, ca, cm)):
            if piece[3] > piece[2]:
                stack.append(piece)
    brackets.sort(key=lambda t: t[2])
    return brackets


def dispersion_roots(config: CavityConfig, q=None, band=None, *, indices=None,
                     backend=None) -> Spectrum:
    """Eigenfrequencies and modes at membrane position ``q``.

    Parameters
    ----------
    band : int or (float, float), optional
        Either the number of lowest modes, or a frequency interval in rad/m.
        Frequency bands are bracketed by a scan with step ``pi/(4 n l)``.
    indices : sequence of int, optional
        Explicit 1-based mode numbers (bracketed directly from the phase).
    backend : {"python", "compiled"}, optional
        Kernel override; default is whatever was selected at import.
    """
    q = config.q0 if q is None else float(q)
    config.check_position(q)
    if (band is None) == (indices is None):
        raise ValueError("give exactly one of band or indices")
    if indices is not None:
        ks = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if ks.size == 0 or ks.min() < 1:
            raise DomainError("mode indices must be >= 1")
    elif np.ndim(band) == 0:
        if int(band) < 1:
            raise DomainError("band must contain at least one mode")
        ks = np.arange(1, int(band) + 1)
    else:
        w_lo, w_hi = (float(v) for v in band)
        if not 0 <= w_lo < w_hi:
            raise DomainError(f"empty frequency band ({w_lo}, {w_hi})")
        kern = _kernels.get_backend(backend) if backend else _kernels
        br = _scan_band(config, q, w_lo, w_hi, kern)
        if not br:
            raise DomainError("no modes in requested band")
        ks = np.array([t[2] for t in br], dtype=np.int64)
        if config.empty:
            w = ks * np.pi / config.length
        else:
            lay = config.layers(q)
            w = kern.solve_roots(ks.astype(float), [t[0] for t in br], [t[1] for t in br],
                                 lay.edges, lay.index, lay.kicks)
        return Spectrum(config, q, ks, w)
    w = _roots_cached(config, q, tuple(int(k) for k in ks), backend or "")
    return Spectrum(config, q, ks, w)


def mode_function(config: CavityConfig, q, k) -> CavityMode:
    """Normalised mode ``k`` at position ``q``."""
    return dispersion_roots(config, q, indices=[k]).mode(k)


def mode_overlap(config: CavityConfig, q, k, j):
    """``int eps phi_k phi_j dx`` in closed form."""
    spec = dispersion_roots(config, q, indices=sorted({k, j}))
    i, jj = spec.position(k), spec.position(j)
    return float(overlap_matrix(spec)[i, jj])


# ---------------------------------------------------------------------------
# derivatives with respect to the membrane position


def frequency_slope(spec: Spectrum):
    """Hellmann-Feynman ``d w_k / dq = -(w_k/2) int (d eps/dq) phi_k^2``."""
    return -0.5 * spec.omega * np.diag(interface_functional(spec))


class DerivativeResult(NamedTuple):
    value: np.ndarray
    error: np.ndarray
    step: float


def _richardson(samples, h0, order, levels=2):
    """Central-difference Richardson table; returns best value, error, step.

    ``samples(h)`` returns ``(f(q-h), f(q), f(q+h))`` arrays.
    """
    nh = levels + 4
    hs = h0 / 2.0 ** np.arange(nh)
    D = []
    scale = None
    for h in hs:
        fm, f0, fp = samples(h)
        scale = np.maximum(np.abs(f0), np.abs(fp)) if scale is None else scale
        D.append((fp - fm) / (2 * h) if order == 1 else (fp - 2 * f0 + fm) / (h * h))
    T = np.array(D)
    for lev in range(1, levels + 1):
        p = 4.0**lev
        T = (p * T[1:] - T[:-1]) / (p - 1)
    trunc = np.abs(np.diff(T, axis=0))
    cand = T[1:]
    eps = np.finfo(float).eps
    round_ = (2.0 if order == 1 else 4.0) * eps * scale[None, :] / hs[levels + 1:, None] ** order
    err = trunc + round_
    best = np.argmin(err, axis=0)
    cols = np.arange(cand.shape[1])
    return cand[best, cols], err[best, cols], float(hs[levels + 1:][best].min())


def _branch_check(config, q, qs, ks, ref: Spectrum, backend):
    """Verify that index ``k`` at ``qs`` is the continuation of ``k`` at ``q``."""
    for qq in qs:
        nb = sorted({int(j) for k in ks for j in (k - 1, k, k + 1) if j >= 1})
        other = dispersion_roots(config, qq, indices=nb, backend=backend)
        O = np.abs(cross_overlap(ref, other))
        for i, k in enumerate(ref.indices):
            row = O[i]
            best = int(np.argmax(row))
            if other.indices[best] != k:
                raise BranchTrackingError(
                    f"mode {k} at q={q} overlaps most with mode {other.indices[best]} at q={qq} "
                    f"({row[best]:.3f} vs {row[other.position(k)]:.3f})",
                    indices=(int(k), int(other.indices[best])))


def frequency_derivative(config: CavityConfig, q, k, order=1, *, h=None, method="fd",
                         check_branch=True, backend=None) -> DerivativeResult:
    """First or second derivative of ``w_k(q)`` (rad/m per m^order).

    ``method="fd"`` differences the root frequencies, ``method="hf"`` uses the
    analytic Hellmann-Feynman slope (and differences it once for order 2).
    Central differences are Richardson-extrapolated over a halving step
    sequence; the step with the smallest truncation-plus-roundoff estimate is
    kept.  ``k`` may be a scalar or a sequence.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    scalar = np.ndim(k) == 0
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    ref = dispersion_roots(config, q, indices=ks, backend=backend)
    if config.empty:
        z = np.zeros(ks.size)
        return DerivativeResult(z[0] if scalar else z, z[0] if scalar else z, 0.0)
    lo, hi = config.position_bounds()
    room = min(q - lo, hi - q)
    if h is None:
        h = 0.1 / float(ref.omega.max() * config.n)
    h = min(h, 0.25 * room)
    if h <= 0:
        raise DomainError("no room for a finite-difference stencil")

    def freq(qq):
        return dispersion_roots(config, qq, indices=ks, backend=backend).omega

    def slope(qq):
        return frequency_slope(dispersion_roots(config, qq, indices=ks, backend=backend))

    if method == "hf" and order == 1:
        v = frequency_slope(ref)
        e = np.abs(v) * 1e-12
        return DerivativeResult(v[0] if scalar else v, e[0] if scalar else e, 0.0)
    fn, eff_order = (freq, order) if method == "fd" else (slope, 1)
    if method not in ("fd", "hf"):
        raise ValueError(f"unknown method {method!r}")
    base = fn(q)

    def samples(hh):
        return fn(q - hh), base, fn(q + hh)

    val, err, step = _richardson(samples, h, eff_order)
    if check_branch:
        _branch_check(config, q, (q - h, q + h), ks, ref, backend)
    if scalar:
        return DerivativeResult(float(val[0]), float(err[0]), step)
    return DerivativeResult(val, err, step)


def coefficient_derivatives(spec: Spectrum, slope=None, h=1e-30):
    """Total q-derivatives of the region coefficients along each branch.

    Uses complex-step differentiation of the closed-form coefficient map with
    the edges moved by ``i h v`` and the frequency by ``i h w'``.
    Returns ``(d_alpha, d_beta, d_kappa)``, each ``(K, R)``.
    """
    lay = spec.layers
    if slope is None:
        slope = frequency_slope(spec)
    cl = Layers(lay.edges + 1j * h * lay.velocity, lay.index, lay.kicks, lay.velocity)
    a, b, _ = _propagate(spec.omega + 1j * h * slope, cl)
    dk = slope[:, None] * lay.index[None, :]
    return a.imag / h, b.imag / h, dk


def q_derivative_values(spec: Spectrum, x, dcoef=None):
    """``d phi_k / dq`` at fixed ``x``; shape ``(K, len(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if dcoef is None:
        dcoef = coefficient_derivatives(spec)
    da, db, dk = dcoef
    lay = spec.layers
    r = _region_of(lay.edges, x)
    t = x - lay.edges[r]
    k, a, b = spec.kappa[:, r], spec.alpha[:, r], spec.beta[:, r]
    c, s = np.cos(k * t), np.sin(k * t)
    dphase = dk[:, r] * t - k * lay.velocity[r]
    return da[:, r] * c + db[:, r] * s + dphase * (b * c - a * s)
