"""Tensor grids on boxes with homogeneous Dirichlet boundary.

Only interior nodes carry unknowns.  With zero boundary values the
trapezoid rule gives every interior node the same weight ``prod(h)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    extents: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2.0 * L / (n + 1) for L, n in zip(self.extents, self.counts))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        out = []
        for L, n, h in zip(self.extents, self.counts, self.spacing):
            # integer offsets about the centre keep the nodes symmetric about 0
            k = np.arange(n) - (n - 1) / 2.0
            out.append(k * h)
        return tuple(out)

    @cached_property
    def weight(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=-1)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def same_as(self, other: "Grid") -> bool:
        return self is other or (self.extents == other.extents and self.counts == other.counts)

    def field(self, values) -> "GridField":
        return GridField(self, np.asarray(values, dtype=float).reshape(self.shape))

    def sample(self, fn) -> "GridField":
        """Evaluate ``fn(points)`` (points with trailing axis ``dim``)."""
        return self.field(fn(self.points))

    def zeros(self) -> "GridField":
        return GridField(self, np.zeros(self.shape))


@dataclass(eq=False)
class GridField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {self.values.shape} != grid {self.grid.shape}")

    def _check(self, other: "GridField"):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.grid, self.values + other.values)
        return GridField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.grid, self.values - other.values)
        return GridField(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.grid, self.values * other.values)
        return GridField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(self.grid, -self.values)

    def __truediv__(self, c):
        return GridField(self.grid, self.values / c)

    def copy(self):
        return GridField(self.grid, self.values.copy())

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def build_grid(dim: int, extents, node_counts) -> Grid:
    extents = tuple(float(e) for e in np.broadcast_to(np.atleast_1d(extents), (dim,)))
    counts = tuple(int(n) for n in np.broadcast_to(np.atleast_1d(node_counts), (dim,)))
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if any(not e > 0 for e in extents):
        raise ValueError(f"extents must be positive, got {extents}")
    if any(n < 3 for n in counts):
        raise ValueError(f"node counts must be >= 3, got {counts}")
    return Grid(extents, counts)


def laplacian_apply(grid: Grid, f: GridField) -> GridField:
    """Second-order central Laplacian with zero boundary values (not negated)."""
    if not grid.same_as(f.grid):
        raise GridMismatchError("field does not live on this grid")
    inv_h2 = tuple(1.0 / h**2 for h in grid.spacing)
    # -Delta f with unit diffusion and no potential, then flip sign
    out = kernels.apply(f.values, np.zeros(grid.shape), 1.0, inv_h2, 0.0)
    return GridField(grid, -out)


def inner_product(grid: Grid, f: GridField, g: GridField) -> float:
    if not (grid.same_as(f.grid) and grid.same_as(g.grid)):
        raise GridMismatchError("fields do not live on this grid")
    return grid.weight * float(np.vdot(f.values, g.values))


def norm(f: GridField) -> float:
    return float(np.sqrt(inner_product(f.grid, f, f)))


def interpolate(f: GridField, x) -> float:
    """Multilinear interpolation; boundary nodes hold the Dirichlet zero."""
    grid = f.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (grid.dim,):
        raise ValueError(f"point must have shape ({grid.dim},)")
    for xi, L in zip(x, grid.extents):
        if abs(xi) > L * (1 + 1e-14):
            raise ValueError(f"point {x} outside the grid extents {grid.extents}")
    padded = np.pad(f.values, 1)
    idx, frac = [], []
    for xi, L, h, n in zip(x, grid.extents, grid.spacing, grid.counts):
        t = (xi + L) / h  # 0 at the lower boundary node
        i = min(max(int(np.floor(t)), 0), n)
        idx.append(i)
        frac.append(t - i)
    total = 0.0
    for corner in np.ndindex(*(2,) * grid.dim):
        w = 1.0
        for c, fr in zip(corner, frac):
            w *= fr if c else 1.0 - fr
        if w != 0.0:
            total += w * padded[tuple(i + c for i, c in zip(idx, corner))]
    return float(total)
