"""Timing comparison of the compiled kernels against the numpy fallbacks.

Run as a script.  The evolution right-hand side supports per-call backend
selection, so both paths are timed in-process.  The lattice shortest-path
kernel picks its backend at import time from WAVEMETRIC_DISABLE_NUMBA, so
each timing runs in a child interpreter with the flag set accordingly.
"""

import os
import subprocess
import sys
import timeit

import numpy as np

import wavemetric as wm
from wavemetric._accel import has_numba


def best_of(fn, repeats=5, number=3):
    return min(timeit.repeat(fn, repeat=repeats, number=number)) / number


def bench_rhs_const():
    sys_obj = wm.maxwell_isotropic("1", "1")
    grid = wm.Grid(sys_obj.domain, (24, 24, 24))
    state = wm.gaussian_state(grid, [0, 0, 1, 0, 0, 0], [0.5] * 3, 0.1)
    out = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not has_numba:
            out[backend] = None
            continue
        wm.apply_operator(sys_obj, state, backend=backend)  # warm / compile
        out[backend] = best_of(
            lambda: wm.apply_operator(sys_obj, state, backend=backend)
        )
    return "evolution rhs (constant A)", "24^3 x 6", out


def bench_rhs_variable():
    sys_obj = wm.telegraph("1 + 0.5*sin(3*x)", "2 - x")
    grid = wm.Grid(sys_obj.domain, (4096,))
    state = wm.gaussian_state(grid, [1, 0], [0.5], 0.02)
    out = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not has_numba:
            out[backend] = None
            continue
        wm.apply_operator(sys_obj, state, backend=backend)
        out[backend] = best_of(
            lambda: wm.apply_operator(sys_obj, state, backend=backend)
        )
    return "evolution rhs (variable A)", "4096 x 2", out


_DIJKSTRA_CHILD = """
import timeit
import numpy as np
import wavemetric as wm
from wavemetric.geometry import MetricField, lattice_geodesic

grid = wm.Grid(wm.BoxDomain((0.0, 0.0), (1.0, 1.0)), (97, 97))
metric = MetricField(grid, np.broadcast_to(np.eye(2), grid.shape + (2, 2)).copy())
lattice_geodesic(metric, [(48, 48)])  # warm / compile
t = min(timeit.repeat(lambda: lattice_geodesic(metric, [(48, 48)]),
                      repeat=3, number=1))
print(t)
"""


def bench_dijkstra():
    out = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not has_numba:
            out[backend] = None
            continue
        env = dict(os.environ)
        env["WAVEMETRIC_DISABLE_NUMBA"] = "0" if backend == "numba" else "1"
        res = subprocess.run(
            [sys.executable, "-c", _DIJKSTRA_CHILD],
            capture_output=True, text=True, env=env, check=True,
        )
        out[backend] = float(res.stdout.strip().splitlines()[-1])
    return "lattice dijkstra (geodesic)", "97^2", out


def fmt(t):
    if t is None:
        return "-"
    return f"{1e3 * t:8.3f} ms"


def main():
    rows = [bench_rhs_const(), bench_rhs_variable(), bench_dijkstra()]
    print(f"{'kernel':<30} {'size':<12} {'numba':>12} {'numpy':>12} {'speedup':>8}")
    for name, size, res in rows:
        nb, npy = res["numba"], res["numpy"]
        ratio = "-" if nb is None else f"{npy / nb:6.1f}x"
        print(f"{name:<30} {size:<12} {fmt(nb):>12} {fmt(npy):>12} {ratio:>8}")
    if not has_numba:
        print("(numba unavailable or disabled; only the fallback was timed)")


if __name__ == "__main__":
    main()
