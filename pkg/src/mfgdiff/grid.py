"""Periodic space-time lattice, scalar fields on it, and discrete calculus.

The computational domain is the flat torus [0, L)^d (d = 1 or 2) with nx
nodes per axis, crossed with nt uniform time steps on [0, T].  All explicit
marches in the package share one stability budget, stored on the grid:

    dt <= dx^2 / (2 * d * a_max + dx * theta_lf * d)

where a_max bounds every diffusion coefficient the grid will ever carry
(lambda2^2 / 2 for a control problem with diffusion bounds lambda1 < lambda2)
and theta_lf is the dissipation constant of the first-order scheme (at least
the sup of the drift Hamiltonian's gradient).  The bound makes the diagonal
coefficient of each one-step update nonnegative, which is what every
monotonicity, positivity and comparison argument below hangs on.

Spatial derivatives are the standard periodic stencils: centered first
differences, forward/backward one-sided differences, and the 3-point
Laplacian per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StabilityError


@dataclass(frozen=True)
class GridSpec:
    """Space-time lattice with its stability data.

    Attributes:
        dim: spatial dimension, 1 or 2.
        box_length: side length L of the periodic box.
        nx: nodes per axis (>= 8).
        nt: number of time steps (>= 1).
        horizon: final time T.
        a_max: largest diffusion coefficient the grid must support.
        theta_lf: dissipation constant of the first-order numerical flux.
    """

    dim: int
    box_length: float
    nx: int
    nt: int
    horizon: float
    a_max: float
    theta_lf: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise StabilityError(f"dim must be 1 or 2, got {self.dim}")
        if self.nx < 8:
            raise StabilityError(f"nx must be >= 8, got {self.nx}")
        if self.nt < 1:
            raise StabilityError(f"nt must be >= 1, got {self.nt}")
        if not (self.box_length > 0 and self.horizon > 0):
            raise StabilityError("box_length and horizon must be positive")
        if self.a_max <= 0:
            raise StabilityError(f"a_max must be positive, got {self.a_max}")
        if self.theta_lf < 0:
            raise StabilityError(f"theta_lf must be nonnegative, got {self.theta_lf}")
        # Allow a hair of slack so dt == bound passes despite rounding.
        if self.dt > self.cfl_bound() * (1.0 + 1e-12):
            raise StabilityError(
                f"time step dt={self.dt:.6g} violates the stability bound "
                f"{self.cfl_bound():.6g}; smallest admissible nt is "
                f"{self.min_admissible_nt()}"
            )

    @property
    def dx(self) -> float:
        return self.box_length / self.nx

    @property
    def dt(self) -> float:
        return self.horizon / self.nt

    def cfl_bound(self) -> float:
        """Largest stable time step for this grid's a_max and theta_lf."""
        dx = self.dx
        return dx * dx / (2.0 * self.dim * self.a_max + dx * self.theta_lf * self.dim)

    def min_admissible_nt(self) -> int:
        return max(1, math.ceil(self.horizon / self.cfl_bound() - 1e-12))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.nx**self.dim

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    def coords(self) -> np.ndarray:
        """Node coordinates, shape grid.shape + (dim,)."""
        x = self.axis_coords()
        if self.dim == 1:
            return x[:, None]
        xx, yy = np.meshgrid(x, x, indexing="ij")
        return np.stack([xx, yy], axis=-1)

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def same_lattice(self, other: "GridSpec") -> bool:
        """Same nodes and time levels (stability data may differ)."""
        return (
            self.dim == other.dim
            and self.nx == other.nx
            and self.nt == other.nt
            and self.box_length == other.box_length
            and self.horizon == other.horizon
        )


@dataclass
class TimeField:
    """A scalar field over every time level of a grid.

    values has shape (nt + 1, nx) in 1D or (nt + 1, nx, nx) in 2D.  Level nt
    is the terminal slice for backward fields, level 0 the initial slice for
    forward ones.  Instances are treated as immutable once returned by a
    solver.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.nt + 1, *self.grid.shape)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self) -> "TimeField":
        return TimeField(self.grid, self.values.copy())

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "TimeField":
        return cls(grid, np.full((grid.nt + 1, *grid.shape), float(value)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "TimeField":
        return cls.constant(grid, 0.0)


# --------------------------------------------------------------------------
# periodic discrete calculus on a single time slice
# --------------------------------------------------------------------------


def _spatial_axes(values: np.ndarray, dim: int) -> range:
    # Slices may carry trailing component axes (vector fields); the first
    # `dim` axes are always the spatial ones.
    return range(dim)


def laplacian(values: np.ndarray, dx: float, dim: int | None = None) -> np.ndarray:
    """3-point periodic Laplacian summed over axes."""
    dim = values.ndim if dim is None else dim
    out = np.zeros_like(values)
    for ax in _spatial_axes(values, dim):
        out += np.roll(values, -1, axis=ax) + np.roll(values, 1, axis=ax) - 2.0 * values
    return out / (dx * dx)


def grad_central(values: np.ndarray, dx: float, dim: int | None = None) -> np.ndarray:
    """Centered periodic gradient, components stacked on a trailing axis."""
    dim = values.ndim if dim is None else dim
    comps = [
        (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / (2.0 * dx)
        for ax in _spatial_axes(values, dim)
    ]
    return np.stack(comps, axis=-1)


def diff_forward(values: np.ndarray, dx: float, axis: int) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - values) / dx


def diff_backward(values: np.ndarray, dx: float, axis: int) -> np.ndarray:
    return (values - np.roll(values, 1, axis=axis)) / dx


def interp_periodic(slice_values: np.ndarray, grid: GridSpec, points: np.ndarray) -> np.ndarray:
    """Multilinear periodic interpolation of one time slice at arbitrary points.

    points has shape (n, dim); coordinates are wrapped into [0, L).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    z = np.mod(pts, grid.box_length) / grid.dx
    i0 = np.floor(z).astype(int)
    frac = z - i0
    i0 = np.mod(i0, grid.nx)
    i1 = np.mod(i0 + 1, grid.nx)
    if grid.dim == 1:
        f = frac[:, 0]
        return slice_values[i0[:, 0]] * (1.0 - f) + slice_values[i1[:, 0]] * f
    fx, fy = frac[:, 0], frac[:, 1]
    v00 = slice_values[i0[:, 0], i0[:, 1]]
    v10 = slice_values[i1[:, 0], i0[:, 1]]
    v01 = slice_values[i0[:, 0], i1[:, 1]]
    v11 = slice_values[i1[:, 0], i1[:, 1]]
    return (
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )
