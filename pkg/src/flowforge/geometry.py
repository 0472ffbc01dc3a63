"""Periodic grids, sampled graph heights, and finite-difference geometry.

A surface is represented as the graph of a periodic height function sampled
on a uniform lattice over a flat torus of dimension 1 or 2.  All derivative
operators are second-order central differences with periodic wraparound, and
everything downstream (curvature, the quasilinear flow right-hand side) is
assembled from those stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DegenerateDirection, GridMismatch

__all__ = [
    "PeriodicGrid",
    "GraphField",
    "Direction",
    "gradient",
    "hessian",
    "normal_field",
    "normal_vector",
    "curvature",
    "flow_parts",
    "flow_rhs",
    "sup_dist",
]


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform sampling lattice on the torus prod_k [0, L_k).

    Attributes:
        period: positive extent L_k of each axis.
        points: sample count N_k per axis (at least 8).

    The spacing L_k / N_k and the dimension are always derived, never stored,
    so they cannot drift out of sync with the defining fields.
    """

    period: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        period = tuple(float(L) for L in self.period)
        points = tuple(int(n) for n in self.points)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "points", points)
        if len(period) != len(points):
            raise ValueError("period and points must have the same length")
        if len(period) not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {len(period)}")
        if any(L <= 0 for L in period):
            raise ValueError(f"periods must be positive, got {period}")
        if any(n < 8 for n in points):
            raise ValueError(f"need at least 8 points per axis, got {points}")

    @property
    def dim(self) -> int:
        return len(self.period)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.period, self.points))

    def axis(self, k: int) -> np.ndarray:
        """Sample coordinates along axis k."""
        return np.arange(self.points[k]) * (self.period[k] / self.points[k])

    def coords(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays broadcast to the full grid shape."""
        return list(np.meshgrid(*(self.axis(k) for k in range(self.dim)), indexing="ij"))


@dataclass(eq=False)
class GraphField:
    """Periodic height samples of a graph surface on a :class:`PeriodicGrid`.

    ``values[i]`` (or ``values[i, j]``) is the height above the lattice node
    with those indices; index arithmetic wraps modulo the point counts.  The
    optional ``diagnostics`` slot is filled by solver operations that attach
    a per-run record; it never takes part in numerical comparisons.
    """

    grid: PeriodicGrid
    values: np.ndarray
    diagnostics: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field samples must be finite")
        self.values = vals

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn: Callable[..., np.ndarray]) -> "GraphField":
        """Sample ``fn(x)`` or ``fn(x, y)`` on the grid."""
        return cls(grid, np.asarray(fn(*grid.coords()), dtype=float))

    def with_values(self, values: np.ndarray) -> "GraphField":
        return GraphField(self.grid, values)

    def shifted(self, c: float) -> "GraphField":
        return GraphField(self.grid, self.values + c)

    def copy(self) -> "GraphField":
        return GraphField(self.grid, self.values.copy())


@dataclass(frozen=True)
class Direction:
    """Fixed unit vector with strictly positive last (vertical) component."""

    components: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) < 2:
            raise ValueError("direction needs at least 2 components")
        norm = float(np.linalg.norm(comps))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must be unit length, |r| = {norm!r}")
        if comps[-1] <= 0:
            raise ValueError("direction must point upward (last component > 0)")

    @classmethod
    def of(cls, vec: Sequence[float]) -> "Direction":
        """Normalize ``vec`` and validate the upward orientation."""
        arr = np.asarray(vec, dtype=float)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(tuple(arr / norm))

    @classmethod
    def vertical(cls, dim: int) -> "Direction":
        """The distinguished vertical direction e_n for a dim-dimensional base."""
        return cls((0.0,) * dim + (1.0,))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.components)

    @property
    def horizontal(self) -> np.ndarray:
        """First d components (the part tangent to the base torus)."""
        return np.array(self.components[:-1])

    @property
    def upward(self) -> float:
        """Last component (strictly positive)."""
        return self.components[-1]

    def is_vertical(self) -> bool:
        return all(c == 0.0 for c in self.components[:-1])


def _check_direction(f: GraphField, r: Direction) -> None:
    if len(r.components) != f.grid.dim + 1:
        raise GridMismatch(
            f"direction has {len(r.components)} components, grid needs {f.grid.dim + 1}"
        )


def gradient(f: GraphField) -> np.ndarray:
    """Central-difference gradient, shape ``(d,) + grid.shape``.

    Component k at a node is (f(i+e_k) - f(i-e_k)) / (2 h_k) with periodic
    index wrap.
    """
    v = f.values
    h = f.grid.spacing
    out = np.empty((f.grid.dim,) + v.shape)
    for k in range(f.grid.dim):
        out[k] = (np.roll(v, -1, axis=k) - np.roll(v, 1, axis=k)) / (2.0 * h[k])
    return out


def hessian(f: GraphField) -> np.ndarray:
    """Central-difference Hessian, shape ``(d, d) + grid.shape``.

    Diagonal entries use the classic three-point second difference; the mixed
    entry uses the centered four-corner cross stencil.  The output is
    symmetric by construction.
    """
    v = f.values
    h = f.grid.spacing
    d = f.grid.dim
    out = np.empty((d, d) + v.shape)
    for k in range(d):
        out[k, k] = (np.roll(v, -1, axis=k) - 2.0 * v + np.roll(v, 1, axis=k)) / h[k] ** 2
    for k in range(d):
        for l in range(k + 1, d):
            pp = np.roll(np.roll(v, -1, axis=k), -1, axis=l)
            pm = np.roll(np.roll(v, -1, axis=k), 1, axis=l)
            mp = np.roll(np.roll(v, 1, axis=k), -1, axis=l)
            mm = np.roll(np.roll(v, 1, axis=k), 1, axis=l)
            out[k, l] = (pp - pm - mp + mm) / (4.0 * h[k] * h[l])
            out[l, k] = out[k, l]
    return out


def normal_field(f: GraphField) -> np.ndarray:
    """Upward unit normal (-grad f, 1)/sqrt(1+|grad f|^2) at every node.

    Shape ``(d+1,) + grid.shape``; the last component is strictly positive.
    """
    g = gradient(f)
    w = np.sqrt(1.0 + np.sum(g * g, axis=0))
    out = np.empty((f.grid.dim + 1,) + f.values.shape)
    out[:-1] = -g / w
    out[-1] = 1.0 / w
    return out


def normal_vector(f: GraphField, node: tuple[int, ...] | int) -> np.ndarray:
    """Upward unit normal at a single node (index tuple, or int for d=1)."""
    if isinstance(node, (int, np.integer)):
        node = (int(node),)
    nf = normal_field(f)
    return nf[(slice(None),) + tuple(int(i) % n for i, n in zip(node, f.grid.points))]


def _shape_trace(f: GraphField) -> tuple[np.ndarray, np.ndarray]:
    """Return (sum_ij a_ij f_ij, 1+|grad f|^2) with a_ij = delta_ij - f_i f_j / (1+|grad|^2)."""
    g = gradient(f)
    hess = hessian(f)
    one_plus = 1.0 + np.sum(g * g, axis=0)
    trace = np.einsum("kk...->...", hess)
    quad = np.einsum("i...,ij...,j...->...", g, hess, g)
    return trace - quad / one_plus, one_plus


def curvature(f: GraphField) -> GraphField:
    """Mean curvature of the graph, div(grad f / sqrt(1+|grad f|^2)).

    Assembled as [sum_ij (delta_ij - f_i f_j/(1+|grad f|^2)) f_ij] divided by
    sqrt(1+|grad f|^2); the two forms agree identically (checked symbolically
    in the test suite).
    """
    trace, one_plus = _shape_trace(f)
    return GraphField(f.grid, trace / np.sqrt(one_plus))


def flow_parts(f: GraphField, r: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Split the curvature-flow right-hand side into (coefficient, trace).

    The coefficient is r_n (1+|grad f|^2) / w with w the tilt weight
    r_n - <r', grad f>; the trace is sum_ij a_ij f_ij.  Their product is the
    vertical velocity of the flow.  Raises DegenerateDirection where w <= 0.
    """
    _check_direction(f, r)
    g = gradient(f)
    w = r.upward - np.tensordot(r.horizontal, g, axes=1)
    if np.min(w) <= 0.0:
        node = np.unravel_index(int(np.argmin(w)), f.grid.shape)
        raise DegenerateDirection(
            f"surface tangent to direction at node {node} (weight {np.min(w):.3e})",
            node=node,
        )
    trace, one_plus = _shape_trace(f)
    return r.upward * one_plus / w, trace


def flow_rhs(f: GraphField, r: Direction) -> GraphField:
    """Vertical velocity field of the curvature flow for tilt direction r.

    For the vertical direction this reduces to (1+|grad f|^2) sum_ij a_ij f_ij,
    which in one dimension is exactly the second-difference field.
    """
    coeff, trace = flow_parts(f, r)
    return GraphField(f.grid, coeff * trace)


def sup_dist(a: GraphField, b: GraphField) -> float:
    """Sup-norm distance between two fields on the same grid."""
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
    return float(np.max(np.abs(a.values - b.values)))
