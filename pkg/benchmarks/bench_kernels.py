#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from confcurv import _kernels
from confcurv._kernels import _fallback
from confcurv import solver as sv
from confcurv.metric import bundled_spec


def timeit(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_tape():
    spec = bundled_spec("sphere_n4")
    tape, _ = spec.derivative_tape(4)
    rng = np.random.default_rng(0)
    print(f"metric 4-jet tape: {tape.ops.shape[0]} instructions")
    for n_points, label in ((1, "single point (jet hot path)"),
                            (512, "batched 512 points")):
        points = rng.uniform(-0.5, 0.5, size=(n_points, 4))
        t_fb = timeit(_fallback.eval_tape, tape, points, repeat=20)
        print(f"  {label}:")
        print(f"    fallback: {t_fb * 1e3:8.3f} ms")
        if _kernels._native is not None:
            t_nat = timeit(_kernels._native.eval_tape, tape, points, repeat=20)
            print(f"    native:   {t_nat * 1e3:8.3f} ms   ({t_fb / t_nat:.1f}x)")
            a = _kernels._native.eval_tape(tape, points)
            b = _fallback.eval_tape(tape, points)
            print(f"    agreement: {np.abs(a - b).max():.2e}")
        else:
            print("    native:   not built")


def bench_energy():
    spec = bundled_spec("sphere_n3")
    grid = sv.Grid(box=[[-0.4, 0.4]] * 3, shape=(33, 33, 33))
    geo = sv.CellGeometry(spec, grid, 1e-8)
    rng = np.random.default_rng(1)
    u = sv.GridMap.identity(grid)
    u.values += 0.02 * rng.normal(size=u.values.shape)
    flat = np.ascontiguousarray(u.flat())
    args = (flat, geo.base, geo.offsets, geo.coeff, geo.ginv, geo.weight,
            geo.eps_reg ** 2, 1.5)
    t_fb = timeit(_fallback.cell_energy_gradient, *args)
    print(f"energy+gradient: {geo.base.shape[0]} cells x 3 functions")
    print(f"  fallback: {t_fb * 1e3:8.2f} ms")
    if _kernels._native is not None:
        t_nat = timeit(_kernels._native.cell_energy_gradient, *args)
        print(f"  native:   {t_nat * 1e3:8.2f} ms   ({t_fb / t_nat:.1f}x)")
        e_n, g_n = _kernels._native.cell_energy_gradient(*args)
        e_f, g_f = _fallback.cell_energy_gradient(*args)
        print(f"  agreement: energy {abs(e_n - e_f):.2e}, "
              f"gradient {np.abs(g_n - g_f).max():.2e}")
    else:
        print("  native:   not built")


if __name__ == "__main__":
    print(f"active backend: {_kernels.BACKEND}")
    bench_tape()
    bench_energy()
