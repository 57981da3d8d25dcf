"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from mimcavity import _kernels
from mimcavity._kernels import _fallback


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    edges = np.array([0.0, 0.03 - 25e-9, 0.03 + 25e-9, 0.06])
    index = np.array([1.0, 2.2, 1.0])
    kicks = np.zeros(2)
    w = np.linspace(1.0, 6e6, 200_000)
    k = np.arange(112_700, 112_900, dtype=float)
    lo = (k - 0.999) * np.pi / (0.06 * 1.0001)
    hi = (k + 0.001) * np.pi / 0.06 * 1.0001
    lo = np.minimum(lo, k * np.pi / 0.06 - 1e3)
    yield "prufer_phase (2e5 freqs)", lambda kern: kern.prufer_phase(w, edges, index, kicks)
    yield "solve_roots (200 modes)", lambda kern: kern.solve_roots(k, lo, hi, edges, index, kicks)

    n = 1001
    x = np.linspace(0.0, 1.0, n)
    base = np.sin(6 * np.pi * x)

    def step(material, params):
        def run(kern):
            A, V, acc = base.copy(), np.zeros(n), np.zeros(n)
            ms = np.array([0.0, 0.53, 0.0, 0.0, 0.0])
            kern.advance(A, V, acc, ms, 2000, 5e-4, 1e-3, material, np.array(params), x,
                         _fallback.MOTION_DYNAMIC, np.zeros(4), 4e4, _fallback.POTENTIAL_HARMONIC,
                         np.array([4e4, 0.528]), np.array([0.0, 1.0]), np.zeros(2))
        return run

    yield "advance, sheet (2000 steps, N=1000)", step(0, [0.03])
    yield "advance, slab (2000 steps, N=1000)", step(1, [3.0, 0.05])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    names = _kernels.available_backends()
    print(f"{'kernel':40s}" + "".join(f"{n:>12s}" for n in names) + "    speedup")
    for label, fn in cases():
        t = [best_of(lambda: fn(_kernels.get_backend(n)), args.repeat) for n in names]
        speed = f"{t[0] / t[-1]:9.1f}x" if len(t) > 1 else ""
        print(f"{label:40s}" + "".join(f"{v * 1e3:10.2f}ms" for v in t) + "  " + speed)


if __name__ == "__main__":
    main()
