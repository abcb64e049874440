"""Compiled vs numpy kernels: per-kernel timings and whole-step timings.

    python benchmarks/bench_kernels.py [--sizes 32 64] [--repeat 7]
"""
import argparse
import contextlib
import sys
import timeit

import numpy as np

from nlms import _kernels_py, kernels
from nlms.integrators import rk4_step, splitting_step
from nlms.physics import PhysParams

try:
    from nlms import _kernels
except ImportError:
    _kernels = None

NAMES = ("power_nonlinearity", "abs_power", "phase_rotate", "current", "magnetic_grad_sq",
         "abs_rate")


def kernel_args(N, rng):
    shape = (N, N, N)
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    du = rng.standard_normal((3, *shape)) + 1j * rng.standard_normal((3, *shape))
    A = rng.standard_normal((3, *shape))
    return {
        "power_nonlinearity": (u, 2.5),
        "abs_power": (u, 1.5),
        "phase_rotate": (u, rng.standard_normal(shape), 0.01),
        "current": (u, du, A),
        "magnetic_grad_sq": (u, du, A),
        "abs_rate": (u, u.conj(), 1e-12),
    }


def best(fn, repeat, number=3):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


@contextlib.contextmanager
def backend(mod):
    saved = {n: getattr(kernels, n) for n in NAMES}
    try:
        for n in NAMES:
            setattr(kernels, n, getattr(mod, n))
        yield
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'N':>4} {'kernel':<20} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for N in args.sizes:
        for name, a in kernel_args(N, rng).items():
            tp = best(lambda: getattr(_kernels_py, name)(*a), args.repeat)
            tc = best(lambda: getattr(_kernels, name)(*a), args.repeat)
            print(f"{N:>4} {name:<20} {1e3 * tp:>10.3f} {1e3 * tc:>12.3f} {tp / tc:>8.2f}")

    # whole steps: FFTs dominate, so the gain here is much smaller
    sys.path.insert(0, "tests")
    from conftest import standard_state

    p = PhysParams(2.5)
    print(f"\n{'N':>4} {'step':<20} {'python ms':>10} {'dispatch ms':>12} {'speedup':>8}")
    for N in args.sizes:
        s = standard_state(N)
        for label, step in (("rk4_step", rk4_step), ("splitting_step", splitting_step)):
            times = []
            # default dispatch vs everything forced to numpy
            for ctx in (backend(_kernels_py), contextlib.nullcontext()):
                with ctx:
                    times.append(best(lambda: step(s, 1e-3, p), max(3, args.repeat // 2), 1))
            tp, tc = times
            print(f"{N:>4} {label:<20} {1e3 * tp:>10.2f} {1e3 * tc:>12.2f} {tp / tc:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
