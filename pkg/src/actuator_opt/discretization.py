"""Method-of-lines systems y' = A y + B u for the controlled heat equation.

Two bases are supported: uniform P1 finite elements on (0, 1) with
homogeneous Dirichlet conditions, and the L2-orthonormal Dirichlet
Laplacian eigenfunctions 2 sin(k pi x) sin(l pi y) on the unit square.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss
import scipy.linalg as sla

__all__ = [
    "FEM1DBasis",
    "Spectral2DBasis",
    "SystemMatrices",
    "assemble_fem_1d",
    "assemble_spectral_2d",
    "actuator_load",
    "project_initial_condition",
    "evaluate",
    "levelset_points",
]


@dataclass(frozen=True, eq=False)
class FEM1DBasis:
    n_elements: int
    diffusion: np.ndarray  # per-element sigma

    kind = "fem1d"

    @property
    def h(self):
        return 1.0 / self.n_elements

    @cached_property
    def all_nodes(self):
        return np.linspace(0.0, 1.0, self.n_elements + 1)

    @property
    def nodes(self):
        """Interior nodes, one per degree of freedom."""
        return self.all_nodes[1:-1]


@dataclass(frozen=True, eq=False)
class Spectral2DBasis:
    mode_pairs: np.ndarray  # (n, 2) integer (k, l)
    sigma: float
    grid_size: int

    kind = "spectral2d"

    @property
    def h(self):
        return 1.0 / self.grid_size

    @property
    def cell_area(self):
        return 1.0 / self.grid_size**2

    @cached_property
    def axis(self):
        """Cell-centre coordinates along one axis."""
        return (np.arange(self.grid_size) + 0.5) / self.grid_size

    @cached_property
    def grid_modes(self):
        """Basis functions sampled at cell centres, shape (m*m, n)."""
        m = self.grid_size
        sx = np.sin(np.pi * np.outer(self.axis, self.mode_pairs[:, 0]))  # (m, n)
        sy = np.sin(np.pi * np.outer(self.axis, self.mode_pairs[:, 1]))
        return (2.0 * sx[:, None, :] * sy[None, :, :]).reshape(m * m, -1)

    def modes_at(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        sx = np.sin(np.pi * np.outer(points[:, 0], self.mode_pairs[:, 0]))
        sy = np.sin(np.pi * np.outer(points[:, 1], self.mode_pairs[:, 1]))
        return 2.0 * sx * sy


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    M: np.ndarray
    S: np.ndarray
    basis: object

    @property
    def n(self):
        return self.M.shape[0]

    @cached_property
    def A(self):
        return -sla.cho_solve(self.mass_factor, self.S)

    @cached_property
    def mass_factor(self):
        return sla.cho_factor(self.M)

    def solve_mass(self, rhs):
        return sla.cho_solve(self.mass_factor, rhs)


def _element_sigma(diffusion, n_elements):
    h = 1.0 / n_elements
    mid = (np.arange(n_elements) + 0.5) * h
    if callable(diffusion):
        sig = np.asarray(diffusion(mid), dtype=float) * np.ones(n_elements)
    else:
        sig = np.full(n_elements, float(diffusion))
    if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
        raise ValueError("diffusion must be strictly positive on (0, 1)")
    return sig


def assemble_fem_1d(n_elements, diffusion=1.0):
    """Interior-node P1 mass and stiffness matrices on a uniform mesh.

    ``diffusion`` is a constant or a vectorised callable; it is sampled at
    element midpoints.
    """
    n_elements = int(n_elements)
    if n_elements < 2:
        raise ValueError("n_elements must be at least 2")
    sig = _element_sigma(diffusion, n_elements)
    h = 1.0 / n_elements
    nn = n_elements + 1
    M = np.zeros((nn, nn))
    S = np.zeros((nn, nn))
    e = np.arange(n_elements)
    for (i, j), mval, sval in (((0, 0), 2.0, 1.0), ((0, 1), 1.0, -1.0), ((1, 0), 1.0, -1.0), ((1, 1), 2.0, 1.0)):
        np.add.at(M, (e + i, e + j), mval * h / 6.0)
        np.add.at(S, (e + i, e + j), sval * sig / h)
    basis = FEM1DBasis(n_elements=n_elements, diffusion=sig)
    return SystemMatrices(M=M[1:-1, 1:-1].copy(), S=S[1:-1, 1:-1].copy(), basis=basis)


def spectral_mode_pairs(n_modes):
    """First ``n_modes`` index pairs ordered by k^2 + l^2, ties by smaller k."""
    kmax = int(n_modes)
    k, l = np.meshgrid(np.arange(1, kmax + 1), np.arange(1, kmax + 1), indexing="ij")
    k, l = k.ravel(), l.ravel()
    order = np.lexsort((k, k * k + l * l))
    return np.stack([k[order], l[order]], axis=1)[:n_modes]


def assemble_spectral_2d(n_modes, sigma, eval_grid_size=128):
    if int(n_modes) < 1:
        raise ValueError("n_modes must be at least 1")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    pairs = spectral_mode_pairs(int(n_modes))
    m = int(eval_grid_size)
    if m < 2 * pairs.max():
        raise ValueError(
            f"eval_grid_size={m} under-resolves mode index {pairs.max()} (need >= {2 * pairs.max()})"
        )
    eig = sigma * np.pi**2 * (pairs[:, 0] ** 2 + pairs[:, 1] ** 2)
    basis = Spectral2DBasis(mode_pairs=pairs, sigma=float(sigma), grid_size=m)
    return SystemMatrices(M=np.eye(len(pairs)), S=np.diag(eig.astype(float)), basis=basis)


def _hat_antiderivative(t, nodes, h):
    """Integral of each interior hat function from -inf to t."""
    s = np.clip(t - (nodes - h), 0.0, 2.0 * h)
    left = s * s / (2.0 * h)
    r = 2.0 * h - s
    right = h - r * r / (2.0 * h)
    return np.where(s <= h, left, right)


def actuator_load(shape, basis):
    """Vector of integrals of each basis function over the actuator."""
    if basis.kind == "fem1d":
        nodes = basis.nodes
        out = np.zeros(nodes.size)
        for a, b in shape.intervals:
            out += _hat_antiderivative(b, nodes, basis.h) - _hat_antiderivative(a, nodes, basis.h)
        return out
    mask = np.asarray(shape.mask, dtype=float).ravel()
    if mask.size != basis.grid_size**2:
        raise ValueError("shape mask does not match the evaluation grid")
    return basis.cell_area * (basis.grid_modes.T @ mask)


def project_initial_condition(f, sys):
    """Galerkin (L2) projection coefficients of a function onto the basis."""
    basis = sys.basis
    if basis.kind == "fem1d":
        h = basis.h
        gp, gw = leggauss(3)
        left = np.arange(basis.n_elements) * h
        xs = left[:, None] + 0.5 * (gp[None, :] + 1.0) * h
        ws = 0.5 * h * gw
        fv = np.broadcast_to(np.asarray(f(xs), dtype=float), xs.shape)
        phi_r = (xs - left[:, None]) / h
        load = np.zeros(basis.n_elements + 1)
        load[:-1] += (fv * (1.0 - phi_r)) @ ws
        load[1:] += (fv * phi_r) @ ws
        return sys.solve_mass(load[1:-1])
    X, Y = np.meshgrid(basis.axis, basis.axis, indexing="ij")
    fv = np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape).ravel()
    return basis.cell_area * (basis.grid_modes.T @ fv)


def evaluate(sys, coeffs, points):
    """Point values of the expansion with coefficient vector ``coeffs``.

    1D: piecewise-linear interpolation with zero boundary values.
    2D: direct modal summation; ``points`` has shape (p, 2).
    """
    basis = sys.basis
    if basis.kind == "fem1d":
        full = np.concatenate(([0.0], np.asarray(coeffs, dtype=float), [0.0]))
        return np.interp(points, basis.all_nodes, full)
    return basis.modes_at(points) @ coeffs


def levelset_points(basis):
    """Coordinates where level-set and sensitivity fields live."""
    if basis.kind == "fem1d":
        return basis.all_nodes
    X, Y = np.meshgrid(basis.axis, basis.axis, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def nodal_values(sys, coeffs):
    """Expansion evaluated on the level-set grid (1D nodes or 2D cells)."""
    basis = sys.basis
    if basis.kind == "fem1d":
        return np.concatenate(([0.0], np.asarray(coeffs, dtype=float), [0.0]))
    m = basis.grid_size
    return (basis.grid_modes @ coeffs).reshape(m, m)
