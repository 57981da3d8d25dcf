"""Classical co-simulation of the cavity field and the membrane.

The field lives on a uniform grid ``x_i = i dx`` with fixed ends, and the
membrane moves through the grid.  The scheme is derived from a discrete
Lagrangian,

    L = 1/2 dx sum V_i^2 - 1/2 sum (A_{i+1} - A_i)^2 / dx
        + 1/2 sum mu_i(q) (V_i + qdot Ax_i)^2 + 1/2 m qdot^2 - U(q),

where ``mu_i`` is the extra polarisable mass of cell ``i``.  For a
resolved slab ``mu_i = chi dx * coverage_i``; for the thin-slab surrogate
the sheet ``sigma = chi d`` is spread over three nodes with quadratic
B-spline weights, which keeps the Lagrangian smooth as the sheet crosses
nodes.  The field update is velocity Verlet; the membrane acceleration
entering the field equation is lagged by one step.

Everything here uses c = 1: times are in metres of light travel, and field
energies are per unit transverse area in arbitrary consistent units.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalError
from .spectral import CavityConfig, dispersion_roots

__all__ = [
    "ClassicalState",
    "PotentialSpec",
    "SimOptions",
    "Trajectory",
    "acceleration_ratio",
    "adiabatic_invariant_probe",
    "evolve_classical",
    "field_energy",
    "gaussian_packet",
    "make_grid",
    "mode_state",
    "project_modes",
    "radiation_force",
    "read_snapshot",
    "total_energy",
    "write_snapshot",
]

MAX_SPEED = 0.01

_MOTION = {"dynamic": _kernels.MOTION_DYNAMIC, "frozen": _kernels.MOTION_FROZEN,
           "sine": _kernels.MOTION_SINE, "ramp": _kernels.MOTION_RAMP}


@dataclass
class ClassicalState:
    """Field samples and membrane coordinates (c = 1)."""

    x: np.ndarray
    A: np.ndarray
    V: np.ndarray
    q: float
    qdot: float = 0.0
    t: float = 0.0
    qddot: float = 0.0

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    def copy(self):
        return replace(self, x=self.x.copy(), A=self.A.copy(), V=self.V.copy())


@dataclass(frozen=True)
class PotentialSpec:
    """External potential on the membrane.

    kind ``"harmonic"`` needs ``mass`` and ``Omega`` (``q_center`` defaults
    to the cavity reference position); ``"table"`` interpolates a force
    table ``(table_q, table_f)``.
    """

    kind: str = "free"
    mass: float = 1.0
    Omega: float = 0.0
    q_center: float | None = None
    table_q: tuple = ()
    table_f: tuple = ()

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "table"):
            raise ConfigError(f"unknown potential {self.kind!r}")
        if not self.mass > 0:
            raise ConfigError("membrane mass must be positive")
        if self.kind == "harmonic" and not self.Omega > 0:
            raise ConfigError("harmonic potential requires Omega > 0")
        if self.kind == "table" and len(self.table_q) < 2:
            raise ConfigError("force table needs at least two points")

    def kernel_args(self, config: CavityConfig):
        qc = config.q0 if self.q_center is None else self.q_center
        if self.kind == "harmonic":
            code, p = _kernels.POTENTIAL_HARMONIC, [self.mass * self.Omega**2, qc]
        elif self.kind == "table":
            code, p = _kernels.POTENTIAL_TABLE, [0.0, 0.0]
        else:
            code, p = _kernels.POTENTIAL_FREE, [0.0, 0.0]
        tq = np.asarray(self.table_q if self.kind == "table" else [0.0, 1.0], dtype=float)
        tf = np.asarray(self.table_f if self.kind == "table" else [0.0, 0.0], dtype=float)
        return code, np.asarray(p, dtype=float), tq, tf

    def energy(self, q, config: CavityConfig):
        qc = config.q0 if self.q_center is None else self.q_center
        if self.kind == "harmonic":
            return 0.5 * self.mass * self.Omega**2 * (q - qc) ** 2
        if self.kind == "table":
            # U(q) = -int F dq from the first table point
            tq, tf = np.asarray(self.table_q), np.asarray(self.table_f)
            grid = np.concatenate([tq[tq < q], [q]])
            return -float(np.trapz(np.interp(grid, tq, tf), grid))
        return 0.0


@dataclass(frozen=True)
class SimOptions:
    """Integration and output options.

    motion : ``"dynamic"``, ``"frozen"``, ``"sine"`` or ``"ramp"``
    motion_params : sine ``(q0, amplitude, Omega, phase)``;
        ramp ``(q_start, q_end, t_start, t_end)`` with a cosine profile
    modes : mode indices projected at every sample
    sample_every : steps between diagnostics samples
    probes : positions where ``A`` is recorded at every sample
    """

    motion: str = "dynamic"
    motion_params: tuple = ()
    modes: tuple = ()
    sample_every: int = 10
    snapshot_every: int = 0
    backend: str | None = None
    cfl_safety: float = 0.5
    probes: tuple = ()


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    E_total: np.ndarray
    E_mech: np.ndarray
    E_modes: np.ndarray
    mode_indices: tuple
    final: ClassicalState
    force: np.ndarray = field(default_factory=lambda: np.zeros(0))
    accel_ratio: float = float("nan")
    snapshots: list = field(default_factory=list)
    probe: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def to_csv(self, fh=None):
        """Write ``t, q, qdot, E_total, E_mech, E_mode_<k>...``; returns text if no handle."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "q", "qdot", "E_total", "E_mech"] + [f"E_mode_{k}" for k in self.mode_indices])
        for i in range(self.t.size):
            w.writerow([repr(float(v)) for v in
                        (self.t[i], self.q[i], self.qdot[i], self.E_total[i], self.E_mech[i],
                         *self.E_modes[i])])
        return fh.getvalue() if own else None


# ---------------------------------------------------------------------------
# grid, initial conditions, diagnostics


def make_grid(config: CavityConfig, n_cells: int):
    return np.linspace(0.0, config.length, n_cells + 1)


def _material(config: CavityConfig, dx):
    if config.empty:
        return 0, np.array([0.0])
    if config.surrogate:
        return 0, np.array([config.sigma])
    if config.slab_width < 4 * dx:
        raise ConfigError(f"slab of width {config.slab_width} spans fewer than 4 cells "
                          f"(dx={dx}); refine the grid or use the surrogate")
    return 1, np.array([config.chi, config.slab_width])


def _sheet(x, q):
    """Node slice and quadratic B-spline weights ``(w, dw/ds)`` of the sheet."""
    c, w, dw, _ = _kernels._fallback.sheet_weights(q, x[1] - x[0])
    return slice(c - 1, c + 2), w, dw


def _weighted_inner(config: CavityConfig, x, q, f, g):
    """Discrete ``int eps f g`` consistent with the integrator's mass matrix."""
    dx = x[1] - x[0]
    kind, p = _material(config, dx)
    if kind == 0:
        val = dx * (f @ g.T) if f.ndim > 1 else dx * np.dot(f, g)
        if p[0]:
            sl, w, _ = _sheet(x, q)
            fq = f[..., sl] @ w
            gq = g[..., sl] @ w
            val = val + p[0] * (np.multiply.outer(fq, gq) if f.ndim > 1 else fq * gq)
        return val
    h = 0.5 * config.slab_width
    lo = np.maximum(x - 0.5 * dx, q - h)
    hi = np.minimum(x + 0.5 * dx, q + h)
    mu = dx * config.chi * np.clip(hi - lo, 0, None) / dx
    wts = dx + mu
    return (f * wts) @ g.T if f.ndim > 1 else np.dot(f * wts, g)


def mode_state(config: CavityConfig, x, q, amplitudes, modes, phases=None):
    """Field ``A = sum a_k cos(p_k) phi_k``, ``V = sum a_k w_k sin(p_k) phi_k`` on the grid."""
    spec = dispersion_roots(config, q, indices=list(modes))
    phi = spec.evaluate(x)
    phi[:, 0] = phi[:, -1] = 0.0
    a = np.asarray(amplitudes, dtype=float)
    ph = np.zeros_like(a) if phases is None else np.asarray(phases, dtype=float)
    A = (a * np.cos(ph)) @ phi
    V = (a * spec.omega * np.sin(ph)) @ phi
    return ClassicalState(x=x, A=A, V=V, q=float(q))


def gaussian_packet(config: CavityConfig, x, q, center, width, k0, amplitude=1.0):
    """Right-moving Gaussian wave packet in the vacuum region."""
    env = amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)
    A = env * np.cos(k0 * (x - center))
    # d/dt of f(x - t)
    dA = np.gradient(A, x)
    A[0] = A[-1] = 0.0
    V = -dA
    V[0] = V[-1] = 0.0
    return ClassicalState(x=x, A=A, V=V, q=float(q))


def project_modes(config: CavityConfig, state: ClassicalState, modes, cache=None):
    """Per-mode energies ``(adot^2 + w^2 a^2)/2`` of the instantaneous modes.

    ``cache`` (a dict) keeps the sampled mode functions of the last position.
    """
    if not len(modes):
        return np.zeros(0), None
    if cache is not None and cache.get("q") == state.q:
        spec, phi = cache["spec"], cache["phi"]
    else:
        spec = dispersion_roots(config, state.q, indices=list(modes))
        phi = spec.evaluate(state.x)
        if cache is not None:
            cache.update(q=state.q, spec=spec, phi=phi)
    a = _weighted_inner(config, state.x, state.q, phi, state.A[None, :])[:, 0]
    ad = _weighted_inner(config, state.x, state.q, phi, state.V[None, :])[:, 0]
    return 0.5 * (ad**2 + spec.omega**2 * a**2), spec


def field_energy(config: CavityConfig, state: ClassicalState):
    """Conserved field part including the motional term ``1/2 mu (V + qdot Ax)^2``."""
    x, A, V = state.x, state.A, state.V
    dx = state.dx
    kind, p = _material(config, dx)
    e = 0.5 * dx * np.dot(V, V) + 0.5 * np.sum(np.diff(A) ** 2) / dx
    u = state.qdot
    if kind == 0:
        if p[0]:
            sl, w, dw = _sheet(x, state.q)
            D = w @ V[sl] + u * (dw @ A[sl]) / dx
            e += 0.5 * p[0] * D * D
        return e
    h = 0.5 * config.slab_width
    lo = np.maximum(x - 0.5 * dx, state.q - h)
    hi = np.minimum(x + 0.5 * dx, state.q + h)
    mu = dx * config.chi * np.clip(hi - lo, 0, None) / dx
    Ax = np.zeros_like(A)
    Ax[1:-1] = (A[2:] - A[:-2]) / (2 * dx)
    D = V + u * Ax
    return e + 0.5 * np.dot(mu, D * D)


def total_energy(config, state, potential: PotentialSpec):
    mech = 0.5 * potential.mass * state.qdot**2 + potential.energy(state.q, config)
    return field_energy(config, state) + mech, mech


def radiation_force(state: ClassicalState, config: CavityConfig, form="bracket", backend=None):
    """Force of the field on the membrane.

    ``form="bracket"``: ``(chi/(1+chi))/2 [(Ax)^2]`` evaluated from the right
    face to the left face, using one-sided gradients from the smooth regions
    outside the slab (for the surrogate the prefactor tends to one).
    ``form="lagrangian"``: the exact force of the discrete scheme, which is
    what the integrator applies.
    """
    x, A = state.x, state.A
    dx = state.dx
    kind, p = _material(config, dx)
    if config.empty:
        return 0.0
    if form == "lagrangian":
        kern = _kernels.get_backend(backend) if backend else _kernels
        out = np.empty_like(A)
        return float(kern.field_accel(A, state.V, state.q, state.qdot, state.qddot, dx, kind, p,
                                      x, out))
    if form != "bracket":
        raise ValueError(f"unknown form {form!r}")

    def grad(i, xe):
        # quadratic through nodes i, i+1, i+2, differentiated at xe
        xs = x[i:i + 3]
        return np.polyval(np.polyder(np.polyfit(xs - xe, A[i:i + 3], 2)), 0.0)

    if kind == 0:
        # extrapolate from the unloaded nodes on either side of the sheet support
        sl, _, _ = _sheet(x, state.q)
        left, right = grad(sl.start - 3, state.q), grad(sl.stop, state.q)
        return 0.5 * (left**2 - right**2)
    h = 0.5 * config.slab_width
    ga = grad(int(np.floor((state.q - h) / dx)) - 2, state.q - h)
    gb = grad(int(np.ceil((state.q + h) / dx)), state.q + h)
    return 0.5 * config.chi / (1 + config.chi) * (ga**2 - gb**2)


def acceleration_ratio(qddot, qdot, slope, sdot):
    """RMS of the acceleration source over the velocity term, ``|qdd Ax| / |2 qdot Axt|``."""
    num = np.sqrt(np.mean((np.asarray(qddot) * slope) ** 2))
    den = np.sqrt(np.mean((2 * np.asarray(qdot) * sdot) ** 2))
    return float(num / den) if den > 0 else float("nan")


# ---------------------------------------------------------------------------
# snapshots

_SNAP_MAGIC = b"MIMSNAP1"
_SNAP_HEAD = struct.Struct("<8sqdddd")


def write_snapshot(fh, state: ClassicalState):
    """Binary field dump.

    Layout (little endian): 8-byte magic ``MIMSNAP1``, int64 ``N``, float64
    ``t, q, qdot, qddot``, then ``x``, ``A``, ``V`` as ``N`` float64 each.
    """
    n = state.x.size
    fh.write(_SNAP_HEAD.pack(_SNAP_MAGIC, n, state.t, state.q, state.qdot, state.qddot))
    for arr in (state.x, state.A, state.V):
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(fh) -> ClassicalState:
    head = fh.read(_SNAP_HEAD.size)
    magic, n, t, q, qd, qdd = _SNAP_HEAD.unpack(head)
    if magic != _SNAP_MAGIC:
        raise ValueError("not a field snapshot")
    arrs = [np.frombuffer(fh.read(8 * n), dtype="<f8").copy() for _ in range(3)]
    return ClassicalState(x=arrs[0], A=arrs[1], V=arrs[2], q=q, qdot=qd, t=t, qddot=qdd)


# ---------------------------------------------------------------------------
# integration


def _validate(config, state, dt, opts):
    dx = state.dx
    if not np.allclose(np.diff(state.x), dx, rtol=1e-9, atol=0):
        raise ConfigError("grid must be uniform")
    if abs(state.x[-1] - config.length) > 1e-9 * config.length or state.x[0] != 0:
        raise ConfigError("grid must span [0, l]")
    limit = opts.cfl_safety * dx  # sqrt(eps_min) = 1
    if not 0 < dt <= limit:
        raise ConfigError(f"time step {dt} violates CFL bound {limit}")
    if abs(state.qdot) > MAX_SPEED:
        raise ConfigError(f"membrane speed {state.qdot} exceeds {MAX_SPEED} c")
    if opts.motion not in _MOTION:
        raise ConfigError(f"unknown motion {opts.motion!r}")
    if opts.motion in ("sine", "ramp") and len(opts.motion_params) != 4:
        raise ConfigError(f"{opts.motion} motion needs four parameters")
    _material(config, dx)
    if opts.motion == "sine":
        q0, amp, om, _ = opts.motion_params
        if abs(amp * om) > MAX_SPEED:
            raise ConfigError(f"prescribed speed {abs(amp * om)} exceeds {MAX_SPEED} c")


def _prime(config, state, potential, opts, kern, kind, p):
    """Initial field acceleration and membrane acceleration (fixed point on the lag)."""
    acc = np.empty_like(state.A)
    code, pp, tq, tf = potential.kernel_args(config)
    qdd = state.qddot
    if opts.motion == "frozen":
        return kern.field_accel(state.A, state.V, state.q, 0.0, 0.0, state.dx, kind, p, state.x, acc), acc, 0.0
    if opts.motion in ("sine", "ramp"):
        state.q, state.qdot, qdd = _kernels._fallback._prescribed(_MOTION[opts.motion],
                                                                  np.asarray(opts.motion_params, float),
                                                                  state.t)
        f = kern.field_accel(state.A, state.V, state.q, state.qdot, qdd, state.dx, kind, p, state.x, acc)
        return f, acc, qdd
    for _ in range(3):
        f = kern.field_accel(state.A, state.V, state.q, state.qdot, qdd, state.dx, kind, p, state.x, acc)
        qdd = (f + _kernels._fallback._external_force(code, pp, tq, tf, state.q)) / potential.mass
    return f, acc, qdd


def evolve_classical(config: CavityConfig, state0: ClassicalState, potential: PotentialSpec,
                     t_end, dt, options: SimOptions = SimOptions()) -> Trajectory:
    """Integrate field and membrane from ``state0.t`` to ``t_end``."""
    _validate(config, state0, dt, options)
    kern = _kernels.get_backend(options.backend) if options.backend else _kernels
    st = state0.copy()
    dx = st.dx
    kind, p = _material(config, dx)
    code, pp, tq, tf = potential.kernel_args(config)
    mcode = _MOTION[options.motion]
    mp = np.asarray(options.motion_params if options.motion_params else [0.0] * 4, dtype=float)
    f, acc, qdd = _prime(config, st, potential, options, kern, kind, p)
    st.qddot = qdd
    mstate = np.array([st.t, st.q, st.qdot, qdd, f], dtype=float)
    nsteps = int(round((t_end - st.t) / dt))
    every = max(1, options.sample_every)
    modes = tuple(int(k) for k in options.modes)
    rows, forces, emodes, snaps, probe = [], [], [], [], []
    px = np.asarray(options.probes, dtype=float)
    cache = {}
    acc_q, vel_q, slopes, sdots = [], [], [], []

    def sample():
        st.t, st.q, st.qdot, st.qddot = mstate[0], mstate[1], mstate[2], mstate[3]
        etot, emech = total_energy(config, st, potential)
        rows.append((st.t, st.q, st.qdot, etot, emech))
        forces.append(mstate[4])
        em, _ = project_modes(config, st, modes, cache)
        emodes.append(em)
        if px.size:
            probe.append(np.interp(px, st.x, st.A))
        if kind == 0 and p[0]:
            sl, _, dw = _sheet(st.x, st.q)
            slopes.append(dw @ st.A[sl] / dx)
            sdots.append(dw @ st.V[sl] / dx)
            acc_q.append(st.qddot)
            vel_q.append(st.qdot)

    sample()
    done = 0
    while done < nsteps:
        n = min(every, nsteps - done)
        ran = kern.advance(st.A, st.V, acc, mstate, n, dt, dx, kind, p, st.x, mcode, mp,
                           potential.mass, code, pp, tq, tf)
        done += n
        if ran < n:
            raise NumericalError(f"membrane reached the grid edge at t={mstate[0]}")
        if not np.all(np.isfinite(mstate)):
            raise NumericalError(f"integration diverged at t={mstate[0]}")
        if abs(mstate[2]) > MAX_SPEED:
            raise NumericalError(f"membrane speed {mstate[2]:.3e} exceeded {MAX_SPEED} c at t={mstate[0]}")
        lo, hi = config.position_bounds()
        if not lo + dx < mstate[1] < hi - dx:
            raise NumericalError(f"membrane left the cavity interior at t={mstate[0]}")
        sample()
        if options.snapshot_every and (done // every) % options.snapshot_every == 0:
            snaps.append(st.copy())
    arr = np.array(rows)
    ratio = acceleration_ratio(acc_q, vel_q, np.array(slopes), np.array(sdots)) if slopes else float("nan")
    return Trajectory(t=arr[:, 0], q=arr[:, 1], qdot=arr[:, 2], E_total=arr[:, 3], E_mech=arr[:, 4],
                      E_modes=np.array(emodes) if modes else np.zeros((arr.shape[0], 0)),
                      mode_indices=modes, final=st, force=np.array(forces), accel_ratio=ratio,
                      snapshots=snaps, probe=np.array(probe) if px.size else np.zeros((arr.shape[0], 0)))


@dataclass(frozen=True)
class InvariantReport:
    t: np.ndarray
    q: np.ndarray
    invariant: np.ndarray
    drift: float


def adiabatic_invariant_probe(config: CavityConfig, k, q_start, q_end, duration, *, n_cells=1000,
                              dt=None, amplitude=1.0, sample_every=20, backend=None,
                              extra_modes=()) -> tuple:
    """Sweep the membrane with a cosine ramp and track ``E_k / w_k(q(t))``.

    Returns ``(InvariantReport, Trajectory)``; ``drift`` is the maximum
    relative deviation of the invariant from its initial value.
    """
    x = make_grid(config, n_cells)
    dt = 0.5 * (x[1] - x[0]) if dt is None else dt
    st = mode_state(config, x, q_start, [amplitude], [k])
    if duration <= 0:
        motion = SimOptions(motion="frozen", modes=(k, *extra_modes), sample_every=sample_every,
                            backend=backend)
        t_end = 50 * 2 * np.pi / dispersion_roots(config, q_start, indices=[k]).omega[0]
    else:
        motion = SimOptions(motion="ramp", motion_params=(q_start, q_end, 0.0, duration),
                            modes=(k, *extra_modes), sample_every=sample_every, backend=backend)
        t_end = duration
    traj = evolve_classical(config, st, PotentialSpec(), t_end, dt, motion)
    w = np.array([dispersion_roots(config, qq, indices=[k]).omega[0] for qq in traj.q])
    inv = traj.E_modes[:, 0] / w
    return InvariantReport(traj.t, traj.q, inv, float(np.max(np.abs(inv / inv[0] - 1)))), traj
