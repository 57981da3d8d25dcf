"""Pure numpy implementation of the numerical kernels.

Semantics here are the reference; ``_core.pyx`` must reproduce them to
rounding error.  Layer stacks are described by three arrays:

edges
    region boundaries ``0 = e_0 < e_1 < ... < e_R = l``
index
    refractive index of each of the ``R`` regions
kicks
    areal polarizability of a zero-width sheet sitting on each interior
    edge (length ``R - 1``); zero for ordinary interfaces
"""

import numpy as np

# motion codes shared with the compiled core
MOTION_DYNAMIC = 0
MOTION_FROZEN = 1
MOTION_SINE = 2
MOTION_RAMP = 3

POTENTIAL_FREE = 0
POTENTIAL_HARMONIC = 1
POTENTIAL_TABLE = 2


def _branch_map(theta, k_old, k_new, kick_w2):
    # keep the new angle on the same pi-branch as the old one
    m = np.floor(theta / np.pi)
    s = np.sin(theta)
    c = np.cos(theta)
    t = np.mod(np.arctan2(k_new * s, k_old * c - kick_w2 * s), np.pi)
    return m * np.pi + t


def prufer_phase(omega, edges, index, kicks):
    """Prufer angle at ``x = l`` of the solution with ``phi(0)=0, phi'(0)>0``.

    The k-th eigenfrequency is the unique root of ``theta(omega) = k*pi``.
    """
    w = np.asarray(omega, dtype=float)
    edges = np.asarray(edges, dtype=float)
    index = np.asarray(index, dtype=float)
    kicks = np.asarray(kicks, dtype=float)
    theta = np.zeros_like(w)
    nreg = index.size
    for r in range(nreg):
        kr = index[r] * w
        theta = theta + kr * (edges[r + 1] - edges[r])
        if r + 1 < nreg:
            theta = _branch_map(theta, kr, index[r + 1] * w, kicks[r] * w * w)
    return theta


def solve_roots(targets, lo, hi, edges, index, kicks, rtol=1e-15, maxiter=200):
    """Solve ``prufer_phase(w) = targets*pi`` on brackets ``[lo, hi]``.

    Vectorised Illinois (regula falsi) iteration; every bracket must contain
    exactly one root, which the monotonicity of the phase guarantees.
    """
    targets = np.asarray(targets, dtype=float) * np.pi
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    fa = prufer_phase(a, edges, index, kicks) - targets
    fb = prufer_phase(b, edges, index, kicks) - targets
    if np.any(fa > 0) or np.any(fb < 0):
        raise ValueError("bracket does not enclose the requested root")
    side = np.zeros(a.shape, dtype=int)
    x = 0.5 * (a + b)
    active = np.ones(a.shape, dtype=bool)
    for _ in range(maxiter):
        if not active.any():
            break
        denom = fb - fa
        x = np.where(denom > 0, (a * fb - b * fa) / np.where(denom > 0, denom, 1.0), 0.5 * (a + b))
        # fall back to bisection when the secant point leaves the bracket
        bad = ~((x > a) & (x < b))
        x = np.where(bad, 0.5 * (a + b), x)
        fx = prufer_phase(x, edges, index, kicks) - targets
        left = fx < 0
        a = np.where(active & left, x, a)
        fa = np.where(active & left, fx, fa)
        b = np.where(active & ~left, x, b)
        fb = np.where(active & ~left, fx, fb)
        # Illinois modification: halve the stale endpoint's function value
        fb = np.where(active & left & (side == 1), 0.5 * fb, fb)
        fa = np.where(active & ~left & (side == -1), 0.5 * fa, fa)
        side = np.where(active, np.where(left, 1, -1), side)
        active &= (b - a) > rtol * np.abs(x) + 5e-324
        active &= fx != 0
    return np.where(fa == 0, a, np.where(fb == 0, b, x))


def sheet_weights(q, dx):
    """Quadratic B-spline weights of the sheet on nodes ``c-1, c, c+1``.

    Returns ``(c, w, dw, d2w)`` with derivatives taken with respect to
    ``s = q/dx``.  The weights are C1 in ``q``, so the sheet slope
    ``dw . A / dx`` does not jump when the membrane crosses a node.
    """
    s = q / dx
    c = int(np.floor(s + 0.5))
    f = s - c
    w = np.array([0.5 * (0.5 - f) ** 2, 0.75 - f * f, 0.5 * (0.5 + f) ** 2])
    dw = np.array([f - 0.5, -2.0 * f, 0.5 + f])
    d2w = np.array([1.0, -2.0, 1.0])
    return c, w, dw, d2w


def _surrogate_accel(A, V, q, u, qdd, dx, sigma, out):
    n = A.size
    c, w, dw, d2w = sheet_weights(q, dx)
    sl = slice(c - 1, c + 2)
    inv = 1.0 / dx
    out[:] = 0.0
    out[1:-1] = (A[2:] - 2.0 * A[1:-1] + A[:-2]) * inv
    slope = np.dot(dw, A[sl]) * inv
    sdot = np.dot(dw, V[sl]) * inv
    curv = np.dot(d2w, A[sl]) * inv * inv
    src = 2.0 * u * sdot + qdd * slope + u * u * curv
    out[sl] -= sigma * w * src
    coef = sigma * np.dot(w, out[sl]) / (dx + sigma * np.dot(w, w))
    out[sl] -= coef * w
    out *= inv
    out[0] = 0.0
    out[n - 1] = 0.0
    amdd = np.dot(w, out[sl]) + src
    return -sigma * amdd * slope


def _coverage(x, dx, a, b):
    lo = np.maximum(x - 0.5 * dx, a)
    hi = np.minimum(x + 0.5 * dx, b)
    return np.clip(hi - lo, 0.0, None) / dx


def _slab_accel(A, V, q, u, qdd, dx, chi, width, x, out):
    a = q - 0.5 * width
    b = q + 0.5 * width
    mu = dx * chi * _coverage(x, dx, a, b)
    ind_b = ((x - 0.5 * dx) <= b) & (b < (x + 0.5 * dx))
    ind_a = ((x - 0.5 * dx) <= a) & (a < (x + 0.5 * dx))
    mup = chi * (ind_b.astype(float) - ind_a.astype(float))
    inv = 1.0 / dx
    Ax = np.zeros_like(A)
    Vx = np.zeros_like(A)
    Ax[1:-1] = (A[2:] - A[:-2]) * (0.5 * inv)
    Vx[1:-1] = (V[2:] - V[:-2]) * (0.5 * inv)
    D = V + u * Ax
    muD = mu * D
    rhs = np.zeros_like(A)
    rhs[1:-1] = (A[2:] - 2.0 * A[1:-1] + A[:-2]) * inv
    rhs -= mu * (qdd * Ax + u * Vx) + mup * u * D
    rhs[1:-1] += u * (muD[:-2] - muD[2:]) * (0.5 * inv)
    out[:] = rhs / (dx + mu)
    out[0] = 0.0
    out[-1] = 0.0
    Ddot = out + qdd * Ax + u * Vx
    return 0.5 * np.sum(mup * D * D) - np.sum(mup * u * D * Ax + mu * Ddot * Ax + muD * Vx)


def _prescribed(motion, p, t):
    if motion == MOTION_SINE:
        q0, amp, om, ph = p[0], p[1], p[2], p[3]
        arg = om * t + ph
        return q0 + amp * np.sin(arg), amp * om * np.cos(arg), -amp * om * om * np.sin(arg)
    if motion == MOTION_RAMP:
        q_a, q_b, t_a, t_b = p[0], p[1], p[2], p[3]
        if t <= t_a:
            return q_a, 0.0, 0.0
        if t >= t_b:
            return q_b, 0.0, 0.0
        span = t_b - t_a
        z = np.pi * (t - t_a) / span
        half = 0.5 * (q_b - q_a)
        return (q_a + half * (1.0 - np.cos(z)), half * np.sin(z) * np.pi / span,
                half * np.cos(z) * (np.pi / span) ** 2)
    raise ValueError(f"unknown prescribed motion {motion}")


def _external_force(kind, p, table_q, table_f, q):
    if kind == POTENTIAL_FREE:
        return 0.0
    if kind == POTENTIAL_HARMONIC:
        return -p[0] * (q - p[1])
    return float(np.interp(q, table_q, table_f))


def advance(A, V, accA, mstate, nsteps, dt, dx, material, mat_params, x,
            motion, motion_params, mass, potential, pot_params, table_q, table_f):
    """Advance the field/membrane system ``nsteps`` velocity-Verlet steps.

    ``mstate`` is ``[t, q, qdot, qddot, force]`` and is updated in place, as
    are ``A``, ``V`` and ``accA``.  ``material`` is 0 for the zero-width
    surrogate (``mat_params = [sigma]``) and 1 for a resolved slab
    (``mat_params = [chi, width]``).  Returns the number of completed steps,
    which is short of ``nsteps`` if the membrane reached the grid edge.
    """
    t, q, u, qdd, force = mstate
    dynamic = motion == MOTION_DYNAMIC
    n = A.size
    half = 0.0 if material == 0 else 0.5 * mat_params[1]
    q_lo, q_hi = 2.0 * dx + half, (n - 3) * dx - half
    done = 0
    for _ in range(nsteps):
        V += 0.5 * dt * accA
        if dynamic:
            u += 0.5 * dt * qdd
            q += dt * u
        A += dt * V
        t += dt
        if motion == MOTION_FROZEN:
            u_eval, qdd_lag = 0.0, 0.0
        elif dynamic:
            u_eval, qdd_lag = u, qdd
        else:
            q, u, qdd_new = _prescribed(motion, motion_params, t)
            u_eval, qdd_lag = u, qdd_new
        if not q_lo <= q <= q_hi:
            break
        if material == 0:
            force = _surrogate_accel(A, V, q, u_eval, qdd_lag, dx, mat_params[0], accA)
        else:
            force = _slab_accel(A, V, q, u_eval, qdd_lag, dx, mat_params[0], mat_params[1], x, accA)
        if dynamic:
            qdd = (force + _external_force(potential, pot_params, table_q, table_f, q)) / mass
            u += 0.5 * dt * qdd
        elif motion != MOTION_FROZEN:
            qdd = qdd_lag
        V += 0.5 * dt * accA
        done += 1
    mstate[:] = (t, q, u, qdd, force)
    return done


def field_accel(A, V, q, u, qdd, dx, material, mat_params, x, out):
    """Field acceleration at fixed membrane state; returns the membrane force."""
    if material == 0:
        return _surrogate_accel(A, V, q, u, qdd, dx, mat_params[0], out)
    return _slab_accel(A, V, q, u, qdd, dx, mat_params[0], mat_params[1], x, out)
