"""Actuator shapes, level-set fields and signed-distance reinitialization.

1D shapes are unions of closed intervals in [0, 1]; 2D shapes are boolean
masks over the cells of a uniform m x m grid on the unit square.  Level-set
fields live on the 1D mesh nodes (including both boundary nodes) or on the
2D cell centres, and the shape they describe is always {psi < 0}.
"""
import csv
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "Intervals1D",
    "GridIndicator2D",
    "LevelSetField",
    "DegenerateLevelSetWarning",
    "measure",
    "shape_from_levelset",
    "reinitialize",
    "symmetric_difference_measure",
    "translate",
    "union",
    "difference",
    "disk",
    "levelset_from_shape",
    "count_components",
    "write_levelset_csv",
]


class DegenerateLevelSetWarning(UserWarning):
    """Level set without a sign change; reinitialization was skipped."""


def _normalize(intervals):
    ivs = sorted((max(float(a), 0.0), min(float(b), 1.0)) for a, b in intervals)
    out = []
    for a, b in ivs:
        if b <= a:
            continue
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return tuple(out)


@dataclass(frozen=True)
class Intervals1D:
    intervals: tuple = ()
    clamped: bool = False

    dim = 1

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    def __contains__(self, x):
        return any(a <= x <= b for a, b in self.intervals)

    @property
    def boundary_points(self):
        return [p for a, b in self.intervals for p in (a, b)]


@dataclass(frozen=True, eq=False)
class GridIndicator2D:
    mask: np.ndarray
    clamped: bool = False

    dim = 2

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ValueError("mask must be a square 2D array")
        object.__setattr__(self, "mask", mask)

    @property
    def grid_size(self):
        return self.mask.shape[0]

    def __eq__(self, other):
        return isinstance(other, GridIndicator2D) and np.array_equal(self.mask, other.mask)


@dataclass(frozen=True, eq=False)
class LevelSetField:
    """Nodal level-set values; ``psi.ndim`` selects the 1D or 2D grid."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if not np.all(np.isfinite(psi)):
            raise ValueError("level-set values must be finite")
        object.__setattr__(self, "psi", psi)

    @property
    def dim(self):
        return self.psi.ndim

    @property
    def h(self):
        if self.dim == 1:
            return 1.0 / (self.psi.size - 1)
        return 1.0 / self.psi.shape[0]

    @property
    def coords(self):
        if self.dim == 1:
            return np.linspace(0.0, 1.0, self.psi.size)
        m = self.psi.shape[0]
        return (np.arange(m) + 0.5) / m


def measure(shape):
    if shape.dim == 1:
        return float(sum(b - a for a, b in shape.intervals))
    return float(np.count_nonzero(shape.mask)) / shape.mask.size


def _crossings_1d(psi, x):
    neg = psi < 0
    idx = np.nonzero(neg[:-1] != neg[1:])[0]
    t = psi[idx] / (psi[idx] - psi[idx + 1])
    return idx, x[idx] + t * (x[idx + 1] - x[idx])


def shape_from_levelset(field):
    psi = field.psi
    if field.dim == 2:
        return GridIndicator2D(psi < 0)
    x = field.coords
    neg = psi < 0
    idx, xc = _crossings_1d(psi, x)
    starts = [x[0]] if neg[0] else []
    ends = []
    for i, c in zip(idx, xc):
        (starts if neg[i + 1] else ends).append(c)
    if neg[-1]:
        ends.append(x[-1])
    return Intervals1D(tuple(zip(starts, ends)))


def reinitialize(field, tol=1e-8):
    """Signed distance to the zero level set, negative inside the actuator.

    Nodes next to the interface get their distance from linearly
    interpolated crossings; the rest follows from fast sweeping.  The
    sign of every node is preserved, so the induced shape is unchanged.
    """
    psi = field.psi
    neg = psi < 0
    if neg.all() or not neg.any():
        warnings.warn("level set has no sign change; returned unchanged", DegenerateLevelSetWarning, stacklevel=2)
        return field
    sign = np.where(neg, -1.0, np.where(psi > 0, 1.0, 0.0))
    h = field.h
    d = np.full(psi.shape, _kernels._FAR)
    fixed = np.zeros(psi.shape, dtype=bool)
    if field.dim == 1:
        x = field.coords
        idx, xc = _crossings_1d(psi, x)
        for i, c in zip(idx, xc):
            for j in (i, i + 1):
                d[j] = min(d[j], abs(x[j] - c))
                fixed[j] = True
        d = _kernels.sweep_1d(d, fixed, h)
    else:
        d, fixed = _interface_distances_2d(psi, neg, h)
        d, _ = _kernels.sweep_2d(d, fixed, h, tol)
    return LevelSetField(sign * d)


def _interface_distances_2d(psi, neg, h):
    # per-axis distance to the nearest linearly interpolated crossing
    theta = [np.full(psi.shape, np.inf), np.full(psi.shape, np.inf)]
    for axis in (0, 1):
        a = np.moveaxis(psi, axis, 0)
        na = np.moveaxis(neg, axis, 0)
        th = np.moveaxis(theta[axis], axis, 0)
        cross = na[:-1] != na[1:]
        frac = np.where(cross, a[:-1] / np.where(cross, a[:-1] - a[1:], 1.0), np.inf)
        lo = frac * h
        hi = (1.0 - frac) * h
        th[:-1] = np.where(cross, np.minimum(th[:-1], lo), th[:-1])
        th[1:] = np.where(cross, np.minimum(th[1:], hi), th[1:])
    tx, ty = theta
    fixed = np.isfinite(tx) | np.isfinite(ty)
    both = np.isfinite(tx) & np.isfinite(ty)
    d = np.full(psi.shape, _kernels._FAR)
    with np.errstate(invalid="ignore", divide="ignore"):
        d_both = tx * ty / np.sqrt(tx * tx + ty * ty)
    d = np.where(both, np.where(np.isfinite(d_both), d_both, 0.0), d)
    d = np.where(fixed & ~both, np.minimum(tx, ty), d)
    return d, fixed


def symmetric_difference_measure(a, b):
    if a.dim != b.dim:
        raise ValueError("shapes live in different dimensions")
    if a.dim == 2:
        if a.mask.shape != b.mask.shape:
            raise ValueError("shapes live on different grids")
        return float(np.count_nonzero(a.mask ^ b.mask)) / a.mask.size
    pts = sorted({0.0, 1.0, *a.boundary_points, *b.boundary_points})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo + hi)
        if (mid in a) != (mid in b):
            total += hi - lo
    return total


def translate(shape, v):
    """Rigid translation; a displacement that would leave the unit domain
    is shortened until the shape touches the boundary and ``clamped`` is set."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if shape.dim == 1:
        if not shape.intervals:
            return shape
        lo = shape.intervals[0][0]
        hi = shape.intervals[-1][1]
        step = float(np.clip(v[0], -lo, 1.0 - hi))
        clamped = not np.isclose(step, v[0], rtol=0.0, atol=1e-15)
        return Intervals1D(tuple((a + step, b + step) for a, b in shape.intervals), clamped=clamped)
    m = shape.grid_size
    shift = np.rint(v * m).astype(int)
    rows = np.nonzero(shape.mask.any(axis=1))[0]
    cols = np.nonzero(shape.mask.any(axis=0))[0]
    if rows.size == 0:
        return shape
    lim = [(-rows[0], m - 1 - rows[-1]), (-cols[0], m - 1 - cols[-1])]
    eff = np.array([np.clip(shift[i], *lim[i]) for i in range(2)])
    out = np.roll(shape.mask, tuple(eff), axis=(0, 1))
    return GridIndicator2D(out, clamped=bool(np.any(eff != shift)))


def union(a, b):
    if a.dim == 1:
        return Intervals1D(a.intervals + b.intervals)
    return GridIndicator2D(a.mask | b.mask)


def difference(a, b):
    if a.dim == 2:
        return GridIndicator2D(a.mask & ~b.mask)
    out = []
    for lo, hi in a.intervals:
        pieces = [(lo, hi)]
        for c, d in b.intervals:
            nxt = []
            for p, q in pieces:
                if d <= p or c >= q:
                    nxt.append((p, q))
                    continue
                if c > p:
                    nxt.append((p, c))
                if d < q:
                    nxt.append((d, q))
            pieces = nxt
        out.extend(pieces)
    return Intervals1D(tuple(out))


def disk(center, radius, grid_size=None):
    """Ball of the given radius: an interval in 1D, a cell mask in 2D."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size == 1:
        c = float(center[0])
        return Intervals1D(((c - radius, c + radius),))
    ax = (np.arange(grid_size) + 0.5) / grid_size
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    return GridIndicator2D((X - center[0]) ** 2 + (Y - center[1]) ** 2 < radius**2)


def levelset_from_shape(shape, n_points):
    """Signed-distance level set of a shape.

    ``n_points`` is the number of 1D nodes (n_elements + 1) or the 2D grid
    size; a 2D mask must match it.
    """
    if shape.dim == 1:
        x = np.linspace(0.0, 1.0, n_points)
        pts = [p for p in shape.boundary_points if 0.0 < p < 1.0]
        inside = np.array([xi in shape for xi in x])
        if not pts:
            return LevelSetField(np.where(inside, -1.0, 1.0))
        dist = np.min(np.abs(x[:, None] - np.asarray(pts)[None, :]), axis=1)
        return LevelSetField(np.where(inside, -dist, dist))
    if shape.grid_size != n_points:
        raise ValueError("mask does not match the requested grid")
    h = 1.0 / n_points
    field = LevelSetField(np.where(shape.mask, -0.5 * h, 0.5 * h))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateLevelSetWarning)
        return reinitialize(field)


def count_components(shape):
    if shape.dim == 1:
        return len(shape.intervals)
    from scipy import ndimage

    _, n = ndimage.label(shape.mask)
    return int(n)


def write_levelset_csv(path, field, name="psi"):
    """One row per node: x[,y],<name>."""
    values = field.psi if isinstance(field, LevelSetField) else np.asarray(field)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if values.ndim == 1:
            x = np.linspace(0.0, 1.0, values.size)
            w.writerow(["x", name])
            for xi, v in zip(x, values):
                w.writerow([f"{xi:.6g}", f"{v:.6g}"])
        else:
            m = values.shape[0]
            ax = (np.arange(m) + 0.5) / m
            w.writerow(["x", "y", name])
            for i in range(m):
                for j in range(m):
                    w.writerow([f"{ax[i]:.6g}", f"{ax[j]:.6g}", f"{values[i, j]:.6g}"])
