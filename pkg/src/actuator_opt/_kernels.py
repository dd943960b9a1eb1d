"""Hot loops: closed-loop rollout and fast-sweeping Eikonal updates.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  Dispatch is chosen once at import time from the environment
variable ``ACTUATOR_OPT_NUMBA`` ("0" selects numpy).  Both versions are
always importable so tests and benchmarks can compare them directly.
"""
import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ACTUATOR_OPT_NUMBA", "1") != "0"

_FAR = 1e10


# ---------------------------------------------------------------------------
# closed-loop rollout
# ---------------------------------------------------------------------------

def rollout_numpy(P, k, y0, n_steps, mass, gamma, dt, stride, blowup):
    """Iterate y <- P y and record the quantities needed downstream.

    Returns (sqnorm, u, moment, cost, states, n_done).  ``sqnorm`` holds
    y^T M y, ``u`` the feedback control -k.y, ``moment`` the trapezoidal
    integral of u(t) y(t) and ``cost`` the trapezoidal running cost.
    ``n_done`` < n_steps signals that the norm exceeded ``blowup``.
    """
    n = y0.shape[0]
    sqnorm = np.zeros(n_steps + 1)
    u = np.zeros(n_steps + 1)
    states = np.zeros((n_steps // stride + 1, n))
    moment = np.zeros(n)
    cost = 0.0
    y = y0.copy()
    limit = blowup * max(float(y0 @ mass @ y0), 1e-300)
    for i in range(n_steps + 1):
        if i > 0:
            y = P @ y
        ui = -(k @ y)
        s = float(y @ (mass @ y))
        sqnorm[i] = s
        u[i] = ui
        if i % stride == 0:
            states[i // stride] = y
        w = 0.5 * dt if (i == 0 or i == n_steps) else dt
        moment += (w * ui) * y
        cost += w * (s + gamma * ui * ui)
        if s > limit:
            return sqnorm, u, moment, cost, states, i
    return sqnorm, u, moment, cost, states, n_steps


def _rollout_loop(P, k, y0, n_steps, mass, gamma, dt, stride, blowup):
    n = y0.shape[0]
    sqnorm = np.zeros(n_steps + 1)
    u = np.zeros(n_steps + 1)
    states = np.zeros((n_steps // stride + 1, n))
    moment = np.zeros(n)
    cost = 0.0
    y = y0.copy()
    limit = blowup * max(np.dot(y0, np.dot(mass, y0)), 1e-300)
    for i in range(n_steps + 1):
        if i > 0:
            y = np.dot(P, y)
        ui = -np.dot(k, y)
        s = np.dot(y, np.dot(mass, y))
        sqnorm[i] = s
        u[i] = ui
        if i % stride == 0:
            states[i // stride, :] = y
        w = 0.5 * dt if (i == 0 or i == n_steps) else dt
        for a in range(n):
            moment[a] += w * ui * y[a]
        cost += w * (s + gamma * ui * ui)
        if s > limit:
            return sqnorm, u, moment, cost, states, i
    return sqnorm, u, moment, cost, states, n_steps


# ---------------------------------------------------------------------------
# fast sweeping (Godunov upwind, unit speed)
# ---------------------------------------------------------------------------

def _sweep_2d_loop(d, fixed, h, tol, max_sweeps):
    nx, ny = d.shape
    for it in range(max_sweeps):
        change = 0.0
        for s in range(4):
            for ii in range(nx):
                i = ii if (s == 0 or s == 3) else nx - 1 - ii
                for jj in range(ny):
                    j = jj if (s == 0 or s == 1) else ny - 1 - jj
                    if fixed[i, j]:
                        continue
                    a = _FAR
                    if i > 0:
                        a = d[i - 1, j]
                    if i < nx - 1 and d[i + 1, j] < a:
                        a = d[i + 1, j]
                    b = _FAR
                    if j > 0:
                        b = d[i, j - 1]
                    if j < ny - 1 and d[i, j + 1] < b:
                        b = d[i, j + 1]
                    if a >= _FAR and b >= _FAR:
                        continue
                    if a >= _FAR:
                        cand = b + h
                    elif b >= _FAR:
                        cand = a + h
                    elif abs(a - b) >= h:
                        cand = min(a, b) + h
                    else:
                        cand = 0.5 * (a + b + math.sqrt(2.0 * h * h - (a - b) ** 2))
                    if cand < d[i, j]:
                        diff = d[i, j] - cand
                        if diff > change:
                            change = diff
                        d[i, j] = cand
        if change < tol:
            return it + 1
    return max_sweeps


def sweep_2d_numpy(d, fixed, h, tol=1e-8, max_sweeps=100000):
    """Jacobi form of the Godunov update, vectorised over the grid.

    Converges to the same discrete solution as the Gauss-Seidel sweeps
    but needs O(grid size) passes.
    """
    d = d.copy()
    free = ~fixed
    for it in range(max_sweeps):
        pad = np.pad(d, 1, constant_values=_FAR)
        a = np.minimum(pad[:-2, 1:-1], pad[2:, 1:-1])
        b = np.minimum(pad[1:-1, :-2], pad[1:-1, 2:])
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        one_sided = hi - lo >= h
        rad = np.where(one_sided, 0.0, 2.0 * h * h - (hi - lo) ** 2)
        cand = np.where(one_sided, lo + h, 0.5 * (a + b + np.sqrt(rad)))
        cand = np.where(lo >= _FAR, _FAR, cand)
        new = np.where(free, np.minimum(d, cand), d)
        change = float(np.max(d - new)) if d.size else 0.0
        d = new
        if change < tol:
            return d, it + 1
    return d, max_sweeps


def sweep_1d_numpy(d, fixed, h):
    d = d.copy()
    for i in range(1, d.size):
        if not fixed[i]:
            d[i] = min(d[i], d[i - 1] + h)
    for i in range(d.size - 2, -1, -1):
        if not fixed[i]:
            d[i] = min(d[i], d[i + 1] + h)
    return d


def _sweep_1d_loop(d, fixed, h):
    n = d.shape[0]
    for i in range(1, n):
        if not fixed[i] and d[i - 1] + h < d[i]:
            d[i] = d[i - 1] + h
    for i in range(n - 2, -1, -1):
        if not fixed[i] and d[i + 1] + h < d[i]:
            d[i] = d[i + 1] + h
    return d


if numba is not None:
    rollout_numba = numba.njit(cache=True)(_rollout_loop)
    _sweep_2d_jit = numba.njit(cache=True)(_sweep_2d_loop)
    _sweep_1d_jit = numba.njit(cache=True)(_sweep_1d_loop)
else:  # pragma: no cover
    rollout_numba = None
    _sweep_2d_jit = None
    _sweep_1d_jit = None


def sweep_2d_numba(d, fixed, h, tol=1e-8, max_sweeps=100000):
    d = np.array(d, dtype=np.float64, copy=True)
    n_sweeps = _sweep_2d_jit(d, np.ascontiguousarray(fixed, dtype=np.bool_), float(h), tol, max_sweeps)
    return d, n_sweeps


def sweep_1d_numba(d, fixed, h):
    d = np.array(d, dtype=np.float64, copy=True)
    return _sweep_1d_jit(d, np.ascontiguousarray(fixed, dtype=np.bool_), float(h))


def rollout(P, k, y0, n_steps, mass, gamma, dt, stride=1, blowup=1e12):
    args = (
        np.ascontiguousarray(P, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.float64),
        np.ascontiguousarray(y0, dtype=np.float64),
        int(n_steps),
        np.ascontiguousarray(mass, dtype=np.float64),
        float(gamma),
        float(dt),
        max(int(stride), 1),
        float(blowup),
    )
    if USE_NUMBA:
        return rollout_numba(*args)
    return rollout_numpy(*args)


def sweep_2d(d, fixed, h, tol=1e-8):
    if USE_NUMBA:
        return sweep_2d_numba(d, fixed, h, tol)
    return sweep_2d_numpy(d, fixed, h, tol)


def sweep_1d(d, fixed, h):
    if USE_NUMBA:
        return sweep_1d_numba(d, fixed, h)
    return sweep_1d_numpy(d, fixed, h)
