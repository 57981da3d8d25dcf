# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback.py`` (same signatures)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, atan2, floor, fmod, fabs, M_PI

cnp.import_array()

cdef enum:
    MOTION_DYNAMIC = 0
    MOTION_FROZEN = 1
    MOTION_SINE = 2
    MOTION_RAMP = 3


cdef inline double _phase(double w, const double[:] edges, const double[:] index,
                          const double[:] kicks) noexcept nogil:
    cdef Py_ssize_t r, nreg = index.shape[0]
    cdef double theta = 0.0, kr, kn, m, s, c, t
    for r in range(nreg):
        kr = index[r] * w
        theta += kr * (edges[r + 1] - edges[r])
        if r + 1 < nreg:
            kn = index[r + 1] * w
            m = floor(theta / M_PI)
            s = sin(theta)
            c = cos(theta)
            t = atan2(kn * s, kr * c - kicks[r] * w * w * s)
            t = fmod(t, M_PI)
            if t < 0:
                t += M_PI
            theta = m * M_PI + t
    return theta


def prufer_phase(omega, edges, index, kicks):
    cdef const double[:] e = np.ascontiguousarray(edges, dtype=float)
    cdef const double[:] n = np.ascontiguousarray(index, dtype=float)
    cdef const double[:] kk = np.ascontiguousarray(kicks, dtype=float)
    if np.ndim(omega) == 0:
        return _phase(float(omega), e, n, kk)
    w_arr = np.ascontiguousarray(omega, dtype=float)
    out = np.empty_like(w_arr)
    cdef const double[:] w = w_arr.ravel()
    cdef double[:] o = out.reshape(-1)
    cdef Py_ssize_t i
    with nogil:
        for i in range(w.shape[0]):
            o[i] = _phase(w[i], e, n, kk)
    return out


cdef double _brent(double target, double a, double b, const double[:] e, const double[:] n,
                   const double[:] kk, double rtol, int maxiter) noexcept nogil:
    # Brent's method on phase(w) - target
    cdef double fa = _phase(a, e, n, kk) - target
    cdef double fb = _phase(b, e, n, kk) - target
    cdef double c = a, fc = fa, d = b - a, ee = d
    cdef double tol, m, p, q, r, s
    cdef int it
    if fa == 0:
        return a
    if fb == 0:
        return b
    for it in range(maxiter):
        if (fb > 0) == (fc > 0):
            c = a
            fc = fa
            d = b - a
            ee = d
        if fabs(fc) < fabs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol = 2.0 * 2.2e-16 * fabs(b) + 0.5 * rtol * fabs(b)
        m = 0.5 * (c - b)
        if fabs(m) <= tol or fb == 0:
            return b
        if fabs(ee) >= tol and fabs(fa) > fabs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < 3.0 * m * q - fabs(tol * q) and p < fabs(0.5 * ee * q):
                ee = d
                d = p / q
            else:
                d = m
                ee = m
        else:
            d = m
            ee = m
        a = b
        fa = fb
        if fabs(d) > tol:
            b += d
        elif m > 0:
            b += tol
        else:
            b -= tol
        fb = _phase(b, e, n, kk) - target
    return b


def solve_roots(targets, lo, hi, edges, index, kicks, rtol=1e-15, maxiter=200):
    cdef const double[:] e = np.ascontiguousarray(edges, dtype=float)
    cdef const double[:] n = np.ascontiguousarray(index, dtype=float)
    cdef const double[:] kk = np.ascontiguousarray(kicks, dtype=float)
    tg = np.ascontiguousarray(np.asarray(targets, dtype=float) * np.pi).ravel()
    la = np.ascontiguousarray(lo, dtype=float).ravel()
    ha = np.ascontiguousarray(hi, dtype=float).ravel()
    fa = prufer_phase(la, edges, index, kicks) - tg
    fb = prufer_phase(ha, edges, index, kicks) - tg
    if np.any(fa > 0) or np.any(fb < 0):
        raise ValueError("bracket does not enclose the requested root")
    out = np.empty_like(tg)
    cdef const double[:] t = tg
    cdef const double[:] l_ = la
    cdef const double[:] h_ = ha
    cdef double[:] o = out
    cdef double rt = rtol
    cdef int mi = maxiter
    cdef Py_ssize_t i
    with nogil:
        for i in range(t.shape[0]):
            o[i] = _brent(t[i], l_[i], h_[i], e, n, kk, rt, mi)
    return out.reshape(np.shape(targets))


cdef double _surrogate_accel(double[:] A, double[:] V, double q, double u, double qdd,
                             double dx, double sigma, double[:] out) noexcept nogil:
    cdef Py_ssize_t i, n = A.shape[0]
    cdef double inv = 1.0 / dx
    cdef double s = q / dx
    cdef Py_ssize_t c = <Py_ssize_t>floor(s + 0.5)
    cdef double f = s - c
    cdef double w0 = 0.5 * (0.5 - f) * (0.5 - f), w1 = 0.75 - f * f, w2 = 0.5 * (0.5 + f) * (0.5 + f)
    cdef double d0 = f - 0.5, d1 = -2.0 * f, d2 = 0.5 + f
    cdef double slope, sdot, curv, src, wy, coef, amdd
    out[0] = 0.0
    out[n - 1] = 0.0
    for i in range(1, n - 1):
        out[i] = (A[i + 1] - 2.0 * A[i] + A[i - 1]) * inv
    slope = (d0 * A[c - 1] + d1 * A[c] + d2 * A[c + 1]) * inv
    sdot = (d0 * V[c - 1] + d1 * V[c] + d2 * V[c + 1]) * inv
    curv = (A[c - 1] - 2.0 * A[c] + A[c + 1]) * inv * inv
    src = 2.0 * u * sdot + qdd * slope + u * u * curv
    out[c - 1] -= sigma * w0 * src
    out[c] -= sigma * w1 * src
    out[c + 1] -= sigma * w2 * src
    wy = w0 * out[c - 1] + w1 * out[c] + w2 * out[c + 1]
    coef = sigma * wy / (dx + sigma * (w0 * w0 + w1 * w1 + w2 * w2))
    out[c - 1] -= coef * w0
    out[c] -= coef * w1
    out[c + 1] -= coef * w2
    for i in range(1, n - 1):
        out[i] *= inv
    out[0] = 0.0
    out[n - 1] = 0.0
    amdd = w0 * out[c - 1] + w1 * out[c] + w2 * out[c + 1] + src
    return -sigma * amdd * slope


cdef inline double _cover(double xi, double dx, double a, double b) noexcept nogil:
    cdef double lo = xi - 0.5 * dx, hi = xi + 0.5 * dx
    if a > lo:
        lo = a
    if b < hi:
        hi = b
    if hi <= lo:
        return 0.0
    return (hi - lo) / dx


cdef double _slab_accel(double[:] A, double[:] V, double q, double u, double qdd,
                        double dx, double chi, double width, const double[:] x,
                        double[:] out, double[:] mu, double[:] mup, double[:] D) noexcept nogil:
    cdef Py_ssize_t i, n = A.shape[0]
    cdef double inv = 1.0 / dx
    cdef double a = q - 0.5 * width, b = q + 0.5 * width
    cdef double lo, hi, ax, vx, ddot, force = 0.0
    for i in range(n):
        mu[i] = dx * chi * _cover(x[i], dx, a, b)
        lo = x[i] - 0.5 * dx
        hi = x[i] + 0.5 * dx
        mup[i] = 0.0
        if lo <= b and b < hi:
            mup[i] += chi
        if lo <= a and a < hi:
            mup[i] -= chi
        if 0 < i < n - 1:
            ax = (A[i + 1] - A[i - 1]) * 0.5 * inv
        else:
            ax = 0.0
        D[i] = V[i] + u * ax
    out[0] = 0.0
    out[n - 1] = 0.0
    for i in range(1, n - 1):
        ax = (A[i + 1] - A[i - 1]) * 0.5 * inv
        vx = (V[i + 1] - V[i - 1]) * 0.5 * inv
        out[i] = ((A[i + 1] - 2.0 * A[i] + A[i - 1]) * inv
                  - mu[i] * (qdd * ax + u * vx) - mup[i] * u * D[i]
                  + u * (mu[i - 1] * D[i - 1] - mu[i + 1] * D[i + 1]) * 0.5 * inv) / (dx + mu[i])
    for i in range(n):
        if 0 < i < n - 1:
            ax = (A[i + 1] - A[i - 1]) * 0.5 * inv
            vx = (V[i + 1] - V[i - 1]) * 0.5 * inv
        else:
            ax = 0.0
            vx = 0.0
        ddot = out[i] + qdd * ax + u * vx
        force += 0.5 * mup[i] * D[i] * D[i] - (mup[i] * u * D[i] * ax + mu[i] * ddot * ax + mu[i] * D[i] * vx)
    return force


cdef void _prescribed(int motion, const double[:] p, double t, double* q, double* u,
                      double* qdd) noexcept nogil:
    cdef double arg, span, z, half
    if motion == MOTION_SINE:
        arg = p[2] * t + p[3]
        q[0] = p[0] + p[1] * sin(arg)
        u[0] = p[1] * p[2] * cos(arg)
        qdd[0] = -p[1] * p[2] * p[2] * sin(arg)
    else:
        if t <= p[2]:
            q[0] = p[0]
            u[0] = 0.0
            qdd[0] = 0.0
        elif t >= p[3]:
            q[0] = p[1]
            u[0] = 0.0
            qdd[0] = 0.0
        else:
            span = p[3] - p[2]
            z = M_PI * (t - p[2]) / span
            half = 0.5 * (p[1] - p[0])
            q[0] = p[0] + half * (1.0 - cos(z))
            u[0] = half * sin(z) * M_PI / span
            qdd[0] = half * cos(z) * (M_PI / span) * (M_PI / span)


cdef double _external(int kind, const double[:] p, const double[:] tq, const double[:] tf,
                      double q) noexcept nogil:
    cdef Py_ssize_t i, n
    cdef double f
    if kind == 0:
        return 0.0
    if kind == 1:
        return -p[0] * (q - p[1])
    n = tq.shape[0]
    if q <= tq[0]:
        return tf[0]
    if q >= tq[n - 1]:
        return tf[n - 1]
    i = 0
    while tq[i + 1] < q:
        i += 1
    f = (q - tq[i]) / (tq[i + 1] - tq[i])
    return tf[i] + f * (tf[i + 1] - tf[i])


def advance(double[:] A, double[:] V, double[:] accA, double[:] mstate, int nsteps, double dt,
            double dx, int material, mat_params, x, int motion, motion_params, double mass,
            int potential, pot_params, table_q, table_f):
    cdef const double[:] mp = np.ascontiguousarray(mat_params, dtype=float)
    cdef const double[:] xs = np.ascontiguousarray(x, dtype=float)
    cdef const double[:] mop = np.ascontiguousarray(motion_params, dtype=float)
    cdef const double[:] pp = np.ascontiguousarray(pot_params, dtype=float)
    cdef const double[:] tq = np.ascontiguousarray(table_q, dtype=float)
    cdef const double[:] tf = np.ascontiguousarray(table_f, dtype=float)
    cdef Py_ssize_t n = A.shape[0], i
    cdef double[:] mu = np.zeros(n)
    cdef double[:] mup = np.zeros(n)
    cdef double[:] D = np.zeros(n)
    cdef double t = mstate[0], q = mstate[1], u = mstate[2], qdd = mstate[3], force = mstate[4]
    cdef double u_eval, qdd_lag, qdd_new
    cdef bint dynamic = motion == MOTION_DYNAMIC
    cdef int step, done = 0
    # keep the membrane stencil inside the grid
    cdef double half = 0.0 if material == 0 else 0.5 * mp[1]
    cdef double q_lo = 2.0 * dx + half, q_hi = (n - 3) * dx - half
    with nogil:
        for step in range(nsteps):
            for i in range(n):
                V[i] += 0.5 * dt * accA[i]
            if dynamic:
                u += 0.5 * dt * qdd
                q += dt * u
            for i in range(n):
                A[i] += dt * V[i]
            t += dt
            if motion == MOTION_FROZEN:
                u_eval = 0.0
                qdd_lag = 0.0
            elif dynamic:
                u_eval = u
                qdd_lag = qdd
            else:
                _prescribed(motion, mop, t, &q, &u, &qdd_new)
                u_eval = u
                qdd_lag = qdd_new
            if not (q_lo <= q <= q_hi):
                break
            if material == 0:
                force = _surrogate_accel(A, V, q, u_eval, qdd_lag, dx, mp[0], accA)
            else:
                force = _slab_accel(A, V, q, u_eval, qdd_lag, dx, mp[0], mp[1], xs, accA, mu, mup, D)
            if dynamic:
                qdd = (force + _external(potential, pp, tq, tf, q)) / mass
                u += 0.5 * dt * qdd
            elif motion != MOTION_FROZEN:
                qdd = qdd_lag
            for i in range(n):
                V[i] += 0.5 * dt * accA[i]
            done += 1
    mstate[0] = t
    mstate[1] = q
    mstate[2] = u
    mstate[3] = qdd
    mstate[4] = force
    return done


def field_accel(double[:] A, double[:] V, double q, double u, double qdd, double dx,
                int material, mat_params, x, double[:] out):
    cdef const double[:] mp = np.ascontiguousarray(mat_params, dtype=float)
    cdef const double[:] xs = np.ascontiguousarray(x, dtype=float)
    cdef Py_ssize_t n = A.shape[0]
    if material == 0:
        return _surrogate_accel(A, V, q, u, qdd, dx, mp[0], out)
    return _slab_accel(A, V, q, u, qdd, dx, mp[0], mp[1], xs, out, np.zeros(n), np.zeros(n), np.zeros(n))
