"""Time the numba and numpy variants of the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from actuator_opt import _kernels
from actuator_opt.discretization import assemble_fem_1d, project_initial_condition
from actuator_opt.geometry import Intervals1D
from actuator_opt.lqr import rk4_propagator, solve_lq


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def rollout_case():
    sys_ = assemble_fem_1d(200, 0.01)
    sol = solve_lq(Intervals1D(((0.4, 0.6),)), sys_)
    P, _ = rk4_propagator(sol.closed_loop, 0.01)
    f = project_initial_condition(lambda x: np.sin(np.pi * x), sys_)
    n_steps = 20000
    args = (P, sol.gain, f, n_steps, sys_.M, sol.gamma, 0.01, n_steps, 1e12)
    return args


def sweep_case(m=128):
    ax = (np.arange(m) + 0.5) / m
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    r = np.hypot(X - 0.5, Y - 0.5) - 0.25
    fixed = np.abs(r) < 1.0 / m
    d = np.where(fixed, np.abs(r), _kernels._FAR)
    return d, fixed, 1.0 / m


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = []
    rargs = rollout_case()
    if _kernels.rollout_numba is not None:
        _kernels.rollout_numba(*rargs)  # compile
        rows.append(("rollout 199 dofs x 2e4 steps", "numba", best_of(lambda: _kernels.rollout_numba(*rargs), args.repeat)))
    rows.append(("rollout 199 dofs x 2e4 steps", "numpy", best_of(lambda: _kernels.rollout_numpy(*rargs), args.repeat)))

    d, fixed, h = sweep_case()
    if _kernels._sweep_2d_jit is not None:
        _kernels.sweep_2d_numba(d, fixed, h)
        rows.append(("fast sweeping 128x128", "numba", best_of(lambda: _kernels.sweep_2d_numba(d, fixed, h), args.repeat)))
    rows.append(("fast sweeping 128x128", "numpy", best_of(lambda: _kernels.sweep_2d_numpy(d, fixed, h), args.repeat)))

    print(f"{'kernel':32s} {'backend':8s} {'seconds':>10s}")
    for name, backend, t in rows:
        print(f"{name:32s} {backend:8s} {t:10.4f}")


if __name__ == "__main__":
    main()
