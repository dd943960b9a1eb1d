"""Shape and topological sensitivities of the closed-loop cost.

Both derivatives reduce to the space-time quantity

    G(x) = int_0^T u(t) q(x, t) dt,    q = adjoint function, coefficients 2 M^{-1} Pi y(t),

where u = -K y is the optimal feedback control.  Inserting actuator material
near x changes the LQ cost at the rate G(x), so

    g(x) = G(x) + 2 alpha (|omega| - c)

is the topological derivative outside the actuator and -g the one inside.
Translating the actuator by X changes the cost at the rate
sum over boundary points of G(s) (X . nu(s)).

Here q is the usual costate (the gradient of the value function); the
adjoint used in the optimality system with 2 gamma u = int_omega p carries
the opposite sign, p = -q, which is why g reads -int u p + penalty there.
"""
from dataclasses import dataclass

import numpy as np

from .discretization import evaluate, nodal_values
from .geometry import difference, disk, measure, translate, union
from .lqr import GAMMA, _steps, rk4_propagator, rollout, solve_lq, total_cost, worst_case_cost
from .riccati import solve_lyapunov

__all__ = [
    "Quadrature",
    "ShapeGradient",
    "SensitivityField",
    "control_moment",
    "adjoint_control_integral",
    "shape_gradient",
    "topological_field",
    "fd_shape_oracle",
    "fd_topo_oracle",
    "stationarity_violation",
]


@dataclass(frozen=True)
class Quadrature:
    """Time quadrature for int_0^T u(t) y(t) dt.

    ``trapezoid`` and ``stepping`` give the same trapezoidal sum over the
    RK4 trajectory (closed form vs. explicit time loop); ``exact`` integrates
    the continuous closed loop over [0, inf) through a Lyapunov equation.
    """

    T: float = 1000.0
    dt: float = 0.01
    method: str = "trapezoid"


@dataclass
class ShapeGradient:
    b: np.ndarray  # descent displacement: moving by +beta*b lowers the cost to first order
    per_boundary_terms: list  # (point, dJ/dX contribution)
    clamped: bool = False

    @property
    def derivative(self):
        """Gradient of the cost with respect to a rigid translation."""
        return -self.b


@dataclass
class SensitivityField:
    g: np.ndarray
    alpha: float
    c: float
    size: float


def _trapezoid_gramian(P, F, n_steps, dt):
    """dt * sum_k w_k P^k F P^kT over k = 0..n_steps, trapezoid weights w."""
    n_terms = n_steps + 1
    total = np.zeros_like(F)
    offset = np.eye(P.shape[0])  # P^(terms already summed)
    block, Pblock = F.copy(), P.copy()  # sum of 2^j terms, and P^(2^j)
    j = 0
    while n_terms >> j:
        if (n_terms >> j) & 1:
            total += offset @ block @ offset.T
            offset = offset @ Pblock
        block = block + Pblock @ block @ Pblock.T
        Pblock = Pblock @ Pblock
        j += 1
    # offset now equals P^(n_steps + 1); the last term uses P^n_steps
    last = np.linalg.matrix_power(P, n_steps)
    return dt * (total - 0.5 * F - 0.5 * last @ F @ last.T)


def control_moment(sol, f, quad=Quadrature()):
    """int_0^T u(t) y(t) dt for the optimal closed loop started at ``f``."""
    f = np.asarray(f, dtype=float)
    K = sol.gain
    if quad.method == "stepping":
        traj = rollout(sol.sys, sol.B, K, f, quad.T, quad.dt, sol.gamma, record_every=_steps(quad.T, quad.dt))
        return traj.moment
    Acl = sol.closed_loop
    F = np.outer(f, f)
    if quad.method == "trapezoid":
        P, _ = rk4_propagator(Acl, quad.dt)
        W = _trapezoid_gramian(P, F, _steps(quad.T, quad.dt), quad.dt)
    elif quad.method == "exact":
        W = solve_lyapunov(Acl.T, F)
    else:
        raise ValueError(f"unknown quadrature method {quad.method!r}")
    return -(W @ K)


def adjoint_control_integral(sol, f, quad=Quadrature()):
    """Coefficients of G = int u(t) q(., t) dt."""
    z = control_moment(sol, f, quad)
    return 2.0 * sol.sys.solve_mass(sol.Pi @ z)


def shape_gradient(shape, f, sys, quad=Quadrature(), gamma=GAMMA, solution=None):
    sol = solution if solution is not None else solve_lq(shape, sys, gamma)
    G = adjoint_control_integral(sol, f, quad)
    if shape.dim == 1:
        return _shape_gradient_1d(shape, sys, G)
    return _shape_gradient_2d(shape, sys, G)


def _shape_gradient_1d(shape, sys, G):
    terms = []
    clamped = False
    grad = 0.0
    for a, b in shape.intervals:
        for point, normal in ((a, -1.0), (b, 1.0)):
            if point <= 0.0 or point >= 1.0:
                clamped = True
                terms.append((point, 0.0))
                continue
            val = float(evaluate(sys, G, point)) * normal
            terms.append((point, val))
            grad += val
    return ShapeGradient(b=np.array([-grad]), per_boundary_terms=terms, clamped=clamped)


def _shape_gradient_2d(shape, sys, G):
    mask = shape.mask
    m = mask.shape[0]
    h = 1.0 / m
    ax = (np.arange(m) + 0.5) * h
    points, normals = [], []
    for axis in (0, 1):
        inside = np.moveaxis(mask, axis, 0)
        # facets between cell i and i+1 along `axis`
        lo_in = inside[:-1] & ~inside[1:]
        hi_in = ~inside[:-1] & inside[1:]
        for sel, sgn in ((lo_in, 1.0), (hi_in, -1.0)):
            i, j = np.nonzero(sel)
            face = (i + 1) * h
            pts = np.stack([face, ax[j]], axis=1) if axis == 0 else np.stack([ax[j], face], axis=1)
            nrm = np.zeros((i.size, 2))
            nrm[:, axis] = sgn
            points.append(pts)
            normals.append(nrm)
    clamped = bool(mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any())
    points = np.concatenate(points) if points else np.zeros((0, 2))
    normals = np.concatenate(normals) if normals else np.zeros((0, 2))
    vals = evaluate(sys, G, points) if len(points) else np.zeros(0)
    contrib = h * vals[:, None] * normals
    grad = contrib.sum(axis=0)
    terms = [(tuple(p), tuple(cv)) for p, cv in zip(points, contrib)]
    return ShapeGradient(b=-grad, per_boundary_terms=terms, clamped=clamped)


def topological_field(shape, f, sys, alpha, c, quad=Quadrature(), gamma=GAMMA, solution=None):
    """g on the level-set grid: G(x) + 2 alpha (|omega| - c)."""
    sol = solution if solution is not None else solve_lq(shape, sys, gamma)
    G = adjoint_control_integral(sol, f, quad)
    size = measure(shape)
    g = nodal_values(sys, G) + 2.0 * alpha * (size - c)
    return SensitivityField(g=g, alpha=alpha, c=c, size=size)


def _cost(shape, f, sys, alpha, c, gamma):
    if f is None:
        return worst_case_cost(shape, alpha, c, sys, gamma).total
    return total_cost(shape, f, alpha, c, sys, gamma).total


def fd_shape_oracle(shape, f, sys, delta, alpha=0.0, c=0.0, gamma=GAMMA):
    """Central differences of the total cost under coordinate translations.

    ``f=None`` differentiates the worst-case cost instead.
    """
    grad = np.zeros(shape.dim)
    for i in range(shape.dim):
        e = np.zeros(shape.dim)
        e[i] = delta
        fwd, bwd = translate(shape, e), translate(shape, -e)
        if fwd.clamped or bwd.clamped:
            raise ValueError("translated shape leaves the domain; reduce delta")
        grad[i] = (_cost(fwd, f, sys, alpha, c, gamma) - _cost(bwd, f, sys, alpha, c, gamma)) / (2 * delta)
    return grad


def fd_topo_oracle(shape, f, sys, eta0, eps, alpha=0.0, c=0.0, gamma=GAMMA, check_resolution=True):
    """Difference quotient of the total cost for inserting (eta0 outside)
    or removing (eta0 inside) a ball of radius ``eps``.

    Returns (quotient, inside).  Compare ``quotient`` with g(eta0) outside
    and with -g(eta0) inside.  In 1D the ball is integrated exactly, so
    ``check_resolution=False`` may be used to probe radii below two cells.
    """
    h = sys.basis.h
    if check_resolution and eps < 2 * h:
        raise ValueError("ball must span at least two cells")
    if shape.dim == 1:
        eta = float(np.atleast_1d(eta0)[0])
        bpts = [p for p in shape.boundary_points if 0.0 < p < 1.0]
        if bpts and min(abs(eta - p) for p in bpts) < h:
            raise ValueError("eta0 lies within one cell of the actuator boundary")
        ball = disk(eta, eps)
        inside = eta in shape
    else:
        m = sys.basis.grid_size
        i, j = np.minimum((np.asarray(eta0) * m).astype(int), m - 1)
        window = shape.mask[max(i - 1, 0): i + 2, max(j - 1, 0): j + 2]
        if window.any() and not window.all():
            raise ValueError("eta0 lies within one cell of the actuator boundary")
        ball = disk(eta0, eps, m)
        inside = bool(shape.mask[i, j])
    new = difference(shape, ball) if inside else union(shape, ball)
    q = (_cost(new, f, sys, alpha, c, gamma) - _cost(shape, f, sys, alpha, c, gamma)) / measure(ball)
    return q, inside


def stationarity_violation(field, shape):
    """Largest violation of g <= 0 on the actuator and g >= 0 off it."""
    g = np.asarray(field.g)
    if shape.dim == 1:
        x = np.linspace(0.0, 1.0, g.size)
        inside = np.array([xi in shape for xi in x])
    else:
        inside = shape.mask
    v_in = g[inside].max() if inside.any() else -np.inf
    v_out = (-g[~inside]).max() if (~inside).any() else -np.inf
    return float(max(v_in, v_out, 0.0))
