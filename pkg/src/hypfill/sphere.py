"""Discretised S^{n-1} with its Haar probability measure.

Elements of L^inf(S) are carried as their samples on the grid nodes.  For
n = 2 the grid is equispaced (the trapezoid rule, exact on trigonometric
polynomials of degree < N); for n = 3 an equal-weight Fibonacci lattice.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

DEFAULT_NODES = {2: 720, 3: 1024}


@dataclass(frozen=True, eq=False)
class SphereGrid:
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    angles: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights <= 0):
            raise ValueError("weights must be positive and sum to one")
        if np.max(np.abs(np.linalg.norm(self.nodes, axis=1) - 1.0)) > 1e-12:
            raise ValueError("grid nodes must be unit vectors")

    @property
    def size(self):
        return len(self.weights)

    @property
    def spacing(self):
        """Typical angular distance between neighbouring nodes."""
        if self.n == 2:
            return 2 * np.pi / self.size
        return np.sqrt(4 * np.pi / self.size)

    def key(self):
        return (self.n, self.size)

    def function(self, values):
        return BoundaryFunction(self, np.asarray(values, dtype=float))

    def evaluate(self, f):
        """Sample a callable ``f(nodes) -> values`` on the grid."""
        return self.function(f(self.nodes))

    def constant(self, c):
        return self.function(np.full(self.size, float(c)))


def make_grid(n=2, N=None):
    if n not in (2, 3):
        raise ValueError(f"unsupported sphere dimension n={n}; use 2 or 3")
    N = DEFAULT_NODES[n] if N is None else int(N)
    if N < 4:
        raise ValueError("need at least four nodes")
    if n == 2:
        th = 2 * np.pi * np.arange(N) / N
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        nodes[np.abs(nodes) < 1e-15] = 0.0
        return SphereGrid(2, nodes, np.full(N, 1.0 / N), th)
    k = np.arange(N) + 0.5
    polar = np.arccos(1.0 - 2.0 * k / N)
    azim = 2.0 * np.pi * k / ((1.0 + 5.0**0.5) / 2.0)
    nodes = np.column_stack(
        [np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)]
    )
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    return SphereGrid(3, nodes, np.full(N, 1.0 / N))


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary function values must be finite")
        object.__setattr__(self, "values", v)

    def _other(self, other):
        if isinstance(other, BoundaryFunction):
            if other.grid is not self.grid and other.grid.key() != self.grid.key():
                raise GridMismatch("boundary functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return BoundaryFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return BoundaryFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return BoundaryFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, c):
        return BoundaryFunction(self.grid, self.values * self._other(c))

    __rmul__ = __mul__

    def __neg__(self):
        return BoundaryFunction(self.grid, -self.values)

    def to_csv_row(self):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow([repr(float(v)) for v in self.values])
        return buf.getvalue()

    @classmethod
    def from_csv_row(cls, grid, row):
        vals = next(csv.reader([row]))
        return cls(grid, np.array([float(v) for v in vals]))


def _check(f, g):
    if f.grid is not g.grid and f.grid.key() != g.grid.key():
        raise GridMismatch("boundary functions live on different grids")


def integrate(f):
    return float(np.dot(f.grid.weights, f.values))


def sup_norm(f):
    return float(np.max(np.abs(f.values)))


def l2_norm(f):
    return float(np.sqrt(np.dot(f.grid.weights, f.values**2)))


def weighted_l2(f, density):
    dens = density.values if isinstance(density, BoundaryFunction) else np.asarray(density)
    if isinstance(density, BoundaryFunction):
        _check(f, density)
    if dens.shape != f.values.shape:
        raise GridMismatch("density does not match the grid")
    return float(np.sqrt(np.dot(f.grid.weights * dens, f.values**2)))


def l2_inner(f, g):
    _check(f, g)
    return float(np.dot(f.grid.weights, f.values * g.values))


def cutoff(phi, R):
    """Clamp values to ``[-R/2, R/2]``."""
    if R <= 0:
        raise ValueError("cutoff radius must be positive")
    return BoundaryFunction(phi.grid, np.clip(phi.values, -R / 2, R / 2))
