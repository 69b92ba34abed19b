"""Compare the numba and numpy kernel backends.

Times each elementwise kernel and the full fused nonlinear right-hand side
(kernels plus FFTs) at a few grid sizes, after checking that both backends
agree.  Run with ``python3 benchmarks/bench_kernels.py [--sizes 32 64]``.
"""

from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from hallmhd import _kernels
from hallmhd.initial import random_solenoidal_state
from hallmhd.rhs import nonlinear_rhs
from hallmhd.spectral import GridSpec


def _best(fn, repeat: int, number: int) -> float:
    """Best-of-``repeat`` seconds per call."""
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(grid: GridSpec, rng: np.random.Generator):
    n, h = grid.n, grid.n // 2 + 1
    phys = rng.standard_normal((3, n, n, n))
    u, B, J = phys, rng.standard_normal(phys.shape), rng.standard_normal(phys.shape)
    sym, cross = np.empty((6, n, n, n)), np.empty((3, n, n, n))
    T = rng.standard_normal((6, n, n, h)) + 1j * rng.standard_normal((6, n, n, h))
    F = T[:3].copy()
    out = np.empty((3, n, n, h), complex)
    kx, ky, kz = grid.axis_wavenumbers
    mx, my, mz = grid.axis_masks
    power = np.abs(rng.standard_normal((n, n, h)))
    logs = np.empty((n, n, h))
    return {
        "sym_and_cross": lambda k: k.sym_and_cross(u, B, J, sym, cross),
        "momentum_project": lambda k: k.momentum_project(T, kx, ky, kz, mx, my, mz, out),
        "curl_masked": lambda k: k.curl_masked(F, kx, ky, kz, mx, my, mz, 1.0, out),
        "log_weighted_terms": lambda k: k.log_weighted_terms(power, grid.kmag, 0.7, 5.5, logs),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    numpy_k = _kernels.get_backend("numpy")
    numba_k = _kernels.get_backend("numba")
    rng = np.random.default_rng(0)
    print(f"{'n':>4} {'case':<22} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for n in args.sizes:
        grid = GridSpec(n, 2 * math.pi)
        number = max(1, int(2 * (64 / n) ** 3))
        cases = kernel_cases(grid, rng)
        for name, call in cases.items():
            call(numba_k)  # compile outside the timed region
            tn = _best(lambda: call(numpy_k), args.repeat, number)
            tb = _best(lambda: call(numba_k), args.repeat, number)
            print(f"{n:>4} {name:<22} {1e3 * tn:>11.3f} {1e3 * tb:>11.3f} {tn / tb:>7.2f}x")

        s = random_solenoidal_state(grid, rng)
        ref = nonlinear_rhs(grid, s.u.coeffs, s.B.coeffs, backend=numpy_k)
        got = nonlinear_rhs(grid, s.u.coeffs, s.B.coeffs, backend=numba_k)
        scale = max(np.abs(ref[0]).max(), np.abs(ref[1]).max())
        err = max(np.abs(got[0] - ref[0]).max(), np.abs(got[1] - ref[1]).max()) / scale
        tn = _best(lambda: nonlinear_rhs(grid, s.u.coeffs, s.B.coeffs, backend=numpy_k), args.repeat, number)
        tb = _best(lambda: nonlinear_rhs(grid, s.u.coeffs, s.B.coeffs, backend=numba_k), args.repeat, number)
        print(f"{n:>4} {'nonlinear_rhs (full)':<22} {1e3 * tn:>11.3f} {1e3 * tb:>11.3f} {tn / tb:>7.2f}x"
              f"   backends agree to {err:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
