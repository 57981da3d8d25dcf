"""Piecewise Gauss-Legendre quadrature for oscillatory, piecewise-smooth integrands."""

import numpy as np

from .errors import QuadratureError

_RULES = {}


def gauss_rule(order):
    if order not in _RULES:
        _RULES[order] = np.polynomial.legendre.leggauss(order)
    return _RULES[order]


def panel_nodes(breaks, panel, order=16):
    """Nodes and weights of a composite rule.

    Every interval between consecutive ``breaks`` is split into equal panels
    no wider than ``panel``; integrands may jump at the breaks.
    """
    t, w = gauss_rule(order)
    xs, ws = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        n = max(1, int(np.ceil((hi - lo) / panel)))
        e = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        xs.append((mid[:, None] + half[:, None] * t).ravel())
        ws.append((half[:, None] * w).ravel())
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def accumulate(fn, x, w, chunk=65536):
    """Sum ``fn(x_chunk, w_chunk)`` over chunks; ``fn`` returns the weighted partial sum."""
    total = None
    for s in range(0, x.size, chunk):
        part = fn(x[s:s + chunk], w[s:s + chunk])
        total = part if total is None else total + part
    return total


def adaptive_piecewise(fn, breaks, panel, *, rtol=1e-9, atol=0.0, order=16, max_doublings=6,
                       chunk=65536):
    """Integrate with successive panel halving until two levels agree.

    ``fn(x, w)`` must return the weighted sum over the given nodes (any array
    shape).  Returns ``(value, error_estimate)``; raises ``QuadratureError``
    with the achieved tolerance if ``max_doublings`` is exhausted.
    """
    prev = accumulate(fn, *panel_nodes(breaks, panel, order), chunk=chunk)
    err = np.inf
    for _ in range(max_doublings):
        panel *= 0.5
        cur = accumulate(fn, *panel_nodes(breaks, panel, order), chunk=chunk)
        diff = np.max(np.abs(cur - prev))
        scale = np.max(np.abs(cur))
        err = diff
        if diff <= rtol * scale + atol:
            return cur, err
        prev = cur
    raise QuadratureError(f"quadrature did not converge: achieved {err:.3e}", achieved=err)


def integrate_interval(fn, a, b, *, rtol=1e-10, atol=0.0, order=10, max_depth=30):
    """Globally adaptive Gauss-Legendre on ``[a, b]`` for array-valued ``fn(x)``.

    ``fn`` maps a node array of shape ``(m,)`` to ``(m, ...)``.  Intervals are
    bisected where an ``order`` and ``2*order`` rule disagree.
    """
    if a == b:
        return np.asarray(fn(np.array([a])))[0] * 0.0, 0.0
    t1, w1 = gauss_rule(order)
    t2, w2 = gauss_rule(2 * order)

    def rule(lo, hi):
        h, m = 0.5 * (hi - lo), 0.5 * (hi + lo)
        f1 = np.asarray(fn(m + h * t1))
        f2 = np.asarray(fn(m + h * t2))
        i1 = h * np.tensordot(w1, f1, axes=(0, 0))
        i2 = h * np.tensordot(w2, f2, axes=(0, 0))
        return i2, np.max(np.abs(i2 - i1))

    work = [(a, b, *rule(a, b), 0)]
    done_val = None
    done_err = 0.0
    while work:
        total = sum(v for _, _, v, _, _ in work) + (0 if done_val is None else done_val)
        tol = rtol * np.max(np.abs(total)) + atol
        errs = [e for *_, e, _ in work]
        if sum(errs) + done_err <= tol:
            break
        i = int(np.argmax(errs))
        lo, hi, v, e, depth = work.pop(i)
        if depth >= max_depth:
            raise QuadratureError(f"interval quadrature did not converge: achieved {e:.3e}",
                                  achieved=e)
        m = 0.5 * (lo + hi)
        work.append((lo, m, *rule(lo, m), depth + 1))
        work.append((m, hi, *rule(m, hi), depth + 1))
        # retire converged intervals to keep the list short
        keep = []
        for item in work:
            if item[3] < 1e-3 * tol / max(len(work), 1):
                done_val = item[2] if done_val is None else done_val + item[2]
                done_err += item[3]
            else:
                keep.append(item)
        work = keep
    total = sum(v for _, _, v, _, _ in work) + (0 if done_val is None else done_val)
    return total, sum(e for *_, e, _ in work) + done_err
