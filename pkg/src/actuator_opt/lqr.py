"""Closed-loop LQ costs, RK4 simulation, adjoints and worst-case initial data."""
import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .discretization import actuator_load
from .geometry import measure
from .riccati import RiccatiSolution, generalized_symmetric_eig, solve_are

__all__ = [
    "InstabilityError",
    "CostReport",
    "ClosedLoopTrajectory",
    "WorstCaseSet",
    "LQSolution",
    "solve_lq",
    "lq_cost",
    "penalty",
    "total_cost",
    "worst_case_cost",
    "simulate_closed_loop",
    "rk4_propagator",
    "adjoint_at",
    "worst_case_initial",
    "write_trajectory_csv",
]

GAMMA = 1e-3
# RK4 is stable on the negative real axis up to |lambda| dt ~ 2.78
RK4_STABLE_STEP = 2.5


class InstabilityError(RuntimeError):
    pass


@dataclass
class CostReport:
    total: float
    lq_part: float
    penalty_part: float
    size: float
    alpha: float = 0.0
    c: float = 0.0
    iterations: int = 0

    def as_dict(self):
        return asdict(self)


@dataclass
class ClosedLoopTrajectory:
    times: np.ndarray
    states: np.ndarray  # recorded every `record_every` steps
    state_times: np.ndarray
    controls: np.ndarray
    sq_norms: np.ndarray  # y^T M y at every step
    running_cost: float  # trapezoidal integral of y^T M y + gamma u^2
    substeps: int = 1
    moment: np.ndarray = field(default=None, repr=False)  # trapezoidal integral of u(t) y(t)


@dataclass
class WorstCaseSet:
    lambda_max: float
    representatives: list
    eigenvalues: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class LQSolution:
    """Everything the sensitivities need for one actuator."""

    shape: object
    sys: object
    gamma: float
    bhat: np.ndarray
    B: np.ndarray
    riccati: RiccatiSolution

    @property
    def Pi(self):
        return self.riccati.Pi

    @property
    def gain(self):
        """Row K of the optimal feedback u = -K y."""
        return (self.B @ self.Pi) / self.gamma

    @property
    def closed_loop(self):
        return self.sys.A - np.outer(self.B, self.gain)

    @property
    def size(self):
        return measure(self.shape)


def solve_lq(shape, sys, gamma=GAMMA, Pi0=None):
    bhat = actuator_load(shape, sys.basis)
    B = sys.solve_mass(bhat)
    ric = solve_are(sys.A, B, sys.M, gamma, Pi0=Pi0)
    return LQSolution(shape=shape, sys=sys, gamma=gamma, bhat=bhat, B=B, riccati=ric)


def lq_cost(Pi, f):
    """Infinite-horizon LQ value f^T Pi f."""
    Pi = Pi.Pi if isinstance(Pi, RiccatiSolution) else np.asarray(Pi)
    f = np.asarray(f, dtype=float)
    return float(f @ Pi @ f)


def penalty(size, alpha, c):
    return alpha * (size - c) ** 2


def _report(lq, size, alpha, c):
    pen = penalty(size, alpha, c)
    return CostReport(total=lq + pen, lq_part=lq, penalty_part=pen, size=size, alpha=alpha, c=c)


def total_cost(shape, f, alpha, c, sys, gamma=GAMMA, solution=None):
    """Penalised cost of an actuator for a fixed initial condition."""
    sol = solution if solution is not None else solve_lq(shape, sys, gamma)
    return _report(lq_cost(sol.riccati, f), measure(shape), alpha, c)


def worst_case_cost(shape, alpha, c, sys, gamma=GAMMA, solution=None):
    """Penalised worst-case cost: largest eigenvalue of the pencil (Pi, S)."""
    sol = solution if solution is not None else solve_lq(shape, sys, gamma)
    wc = worst_case_initial(sol.riccati, sys.S)
    return _report(wc.lambda_max, measure(shape), alpha, c)


def rk4_propagator(A, dt):
    """Matrix advancing y' = A y by ``dt`` with classical RK4.

    The step is split into the fewest equal substeps keeping every
    eigenvalue inside the RK4 stability region; for a linear autonomous
    system one RK4 substep is exactly the degree-4 Taylor polynomial.
    """
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    n_sub = max(1, math.ceil(rho * dt / RK4_STABLE_STEP))
    hA = A * (dt / n_sub)
    eye = np.eye(A.shape[0])
    P = eye + hA @ (eye + hA @ (eye / 2 + hA @ (eye / 6 + hA / 24)))
    return np.linalg.matrix_power(P, n_sub), n_sub


def _steps(T, dt):
    if not dt > 0 or not T >= dt:
        raise ValueError("need dt > 0 and T >= dt")
    return int(round(T / dt))


def rollout(sys, B, gain, f, T, dt, gamma, record_every=None):
    """Simulate y' = (A - B K) y from ``f`` and collect trajectory data."""
    n_steps = _steps(T, dt)
    Acl = sys.A - np.outer(B, gain)
    P, n_sub = rk4_propagator(Acl, dt)
    if record_every is None:
        record_every = max(1, n_steps // 2000)
    sq, u, moment, cost, states, done = _kernels.rollout(
        P, gain, np.asarray(f, dtype=float), n_steps, sys.M, gamma, dt, record_every
    )
    if done < n_steps:
        raise InstabilityError(f"closed-loop norm grew by more than 1e6 at t={done * dt:g}")
    times = np.arange(n_steps + 1) * dt
    return ClosedLoopTrajectory(
        times=times,
        states=states,
        state_times=times[::record_every][: states.shape[0]],
        controls=u,
        sq_norms=sq,
        running_cost=float(cost),
        substeps=n_sub,
        moment=moment,
    )


def simulate_closed_loop(sys, B, Pi, f, T=1000.0, dt=0.01, gamma=GAMMA, record_every=None):
    """RK4 integration of the optimal closed loop u = -B^T Pi y / gamma."""
    Pi = Pi.Pi if isinstance(Pi, RiccatiSolution) else np.asarray(Pi)
    B = np.asarray(B, dtype=float)
    gain = (B @ Pi) / gamma
    return rollout(sys, B, gain, f, T, dt, gamma, record_every)


def adjoint_at(Pi, y, M=None):
    """Adjoint coefficients 2 Pi y.

    With the mass matrix ``M`` the result is the coefficient vector of the
    adjoint *function*, 2 M^{-1} Pi y, whose point values can be obtained
    by basis evaluation.
    """
    Pi = Pi.Pi if isinstance(Pi, RiccatiSolution) else np.asarray(Pi)
    p = 2.0 * (Pi @ np.asarray(y, dtype=float))
    if M is None:
        return p
    return np.linalg.solve(M, p)


def worst_case_initial(Pi, S, rtol=1e-8):
    """Maximisers of f^T Pi f over f^T S f = 1 and the maximal value."""
    Pi = Pi.Pi if isinstance(Pi, RiccatiSolution) else np.asarray(Pi)
    lam, V = generalized_symmetric_eig(Pi, S)
    lam_max = float(lam[0])
    k = int(np.count_nonzero(lam >= lam_max - rtol * abs(lam_max)))
    reps = []
    for j in range(k):
        v = V[:, j]
        # deterministic orientation: largest-magnitude entry positive
        v = v * np.sign(v[np.argmax(np.abs(v))])
        reps.extend([v, -v])
    return WorstCaseSet(lambda_max=lam_max, representatives=reps, eigenvalues=lam)


def write_trajectory_csv(path, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sq_norm_M", "u"])
        for t, s, u in zip(traj.times, traj.sq_norms, traj.controls):
            w.writerow([f"{t:.6g}", f"{s:.6g}", f"{u:.6g}"])
