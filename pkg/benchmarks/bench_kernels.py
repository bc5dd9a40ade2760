"""Compiled vs numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is timed on both backends and the outputs are compared.
"""
import argparse
import timeit

import numpy as np

from gpvortex import _pykernels as py

try:
    from gpvortex import _ckernels as cy
except ImportError:
    cy = None


def cases(rng):
    pos = rng.uniform(-3, 3, (16, 2))
    d = rng.choice([-1.0, 1.0], 16)
    acc = rng.normal(size=(16, 2))
    X, Y = np.meshgrid(np.linspace(-5, 5, 400), np.linspace(-5, 5, 400))
    u0 = np.exp(1j * rng.uniform(0, 2 * np.pi, (1024, 1024))) * rng.uniform(0.5, 1.5, (1024, 1024))
    return {
        "kirchhoff_velocity n=16": (lambda k: k.kirchhoff_velocity(pos, d)),
        "rk4_run n=16, 2000 steps": (lambda k: k.rk4_run(pos, d, 1e-5, 2000, 1e-6)[0][-1]),
        "forcing_a 400x400, n=16": (lambda k: k.forcing_a(X, Y, pos, d, acc, 0.05, 0.1)),
        "phase_rotate 1024^2": (lambda k: _rot(k, u0)),
    }


def _rot(k, u0):
    u = u0.copy()
    k.phase_rotate(u, 0.3)
    return u


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, f in cases(rng).items():
        tp = min(timeit.repeat(lambda: f(py), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: f(cy), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(f(py)) - np.asarray(f(cy)))))
        print(f"{name:28s} {1e3 * tp:12.2f} {1e3 * tc:12.2f} {tp / tc:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
