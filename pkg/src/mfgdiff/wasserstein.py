"""Order-1 optimal transport distance between grid measures, plus diagnostics.

The distance is taken with the flat (unrolled) ground cost |x - y| on the
box, even though the solvers run on a torus: test measures are kept well
inside the box, so the wrap never carries mass, and the flat cost matches
the whole-space definition

    d1(m1, m2) = sup over 1-Lipschitz phi of  integral phi d(m1 - m2).

In one dimension the value is exact and cheap: d1 = sum |CDF1 - CDF2| * dx.
The maximizing dual potential is explicit (slopes -sign(CDF1 - CDF2)), and a
transportation linear program over the same support reproduces the value,
which the tests use as an independent oracle.  In two dimensions the
distance is solved exactly as a transportation LP with Euclidean costs;
measures wider than 32 nodes per axis are block-coarsened first
(diagnostic-grade accuracy, error O(dx * factor)).

`holder_half_diagnostic` fits the exponent of d1(m(0), m(tau)) against tau
over dyadic separations tau = T/2^k, k = 1..5; a diffusion-dominated path
shows an exponent near 1/2 with a finite sup of d1 / sqrt(tau).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConfigError
from .fp import DensityPath
from .grid import GridSpec

_MASS_TOL = 1e-10
_COARSE_LIMIT = 32


@dataclass(frozen=True)
class GridMeasure:
    """Probability weights on grid nodes (cell masses, summing to 1)."""

    grid: GridSpec
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.grid.shape:
            raise ValueError(f"weights shape {w.shape} != grid shape {self.grid.shape}")
        if w.min() < -1e-12:
            raise ValueError(f"weights must be nonnegative, min is {w.min():.3e}")
        if abs(w.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_density(cls, grid: GridSpec, values: np.ndarray) -> "GridMeasure":
        return cls(grid, np.asarray(values, dtype=float) * grid.dx**grid.dim)


def d1(m1: GridMeasure, m2: GridMeasure) -> float:
    """Order-1 transport distance between two measures on the same grid."""
    if not m1.grid.same_lattice(m2.grid):
        raise ValueError("measures live on different grids")
    if abs(m1.weights.sum() - m2.weights.sum()) > _MASS_TOL:
        raise ValueError("measures have mismatched total mass")
    if m1.grid.dim == 1:
        return _d1_cdf(m1.weights, m2.weights, m1.grid.dx)
    g1, w1 = _coarsen(m1.grid, m1.weights)
    _, w2 = _coarsen(m2.grid, m2.weights)
    return transport_lp_cost(_support_points(g1), w1.ravel(), w2.ravel())


def _d1_cdf(w1: np.ndarray, w2: np.ndarray, dx: float) -> float:
    diff = np.cumsum(w1 - w2)
    return float(np.abs(diff[:-1]).sum() * dx)


def d1_path_sup(p1: DensityPath, p2: DensityPath) -> float:
    """Sup over time levels of d1 between two density paths."""
    grid = p1.grid
    if not grid.same_lattice(p2.grid):
        raise ValueError("paths live on different grids")
    cell = grid.dx**grid.dim
    if grid.dim == 1:
        diff = np.cumsum((p1.values - p2.values) * cell, axis=1)
        return float(np.max(np.abs(diff[:, :-1]).sum(axis=1) * grid.dx))
    worst = 0.0
    for n in range(grid.nt + 1):
        worst = max(
            worst,
            d1(
                GridMeasure.from_density(grid, p1.values[n]),
                GridMeasure.from_density(grid, p2.values[n]),
            ),
        )
    return worst


def dual_potential_1d(m1: GridMeasure, m2: GridMeasure) -> np.ndarray:
    """A maximizing 1-Lipschitz potential for the 1D dual problem."""
    if m1.grid.dim != 1:
        raise ValueError("dual potential construction is one-dimensional")
    diff = np.cumsum(m1.weights - m2.weights)
    slopes = np.sign(diff[:-1])
    phi = np.concatenate([[0.0], np.cumsum(-slopes * m1.grid.dx)])
    return phi


def _support_points(grid: GridSpec) -> np.ndarray:
    return grid.coords().reshape(-1, grid.dim)


def _coarsen(grid: GridSpec, weights: np.ndarray) -> tuple[GridSpec, np.ndarray]:
    """Block-aggregate a 2D measure until nx <= 32 per axis."""
    if grid.nx <= _COARSE_LIMIT:
        return grid, weights
    factor = int(np.ceil(grid.nx / _COARSE_LIMIT))
    while grid.nx % factor != 0:
        factor += 1
    nxc = grid.nx // factor
    if nxc < 8:
        raise ConfigError(f"coarsening {grid.nx} per axis lands below the minimum grid")
    wc = weights.reshape(nxc, factor, nxc, factor).sum(axis=(1, 3))
    coarse = GridSpec(
        dim=grid.dim,
        box_length=grid.box_length,
        nx=nxc,
        nt=grid.nt,
        horizon=grid.horizon,
        a_max=grid.a_max,
        theta_lf=grid.theta_lf,
    )
    return coarse, wc


def transport_lp_cost(points: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> float:
    """Exact transportation LP with unit cost |x - y| between two weight vectors.

    Restricted to nodes carrying mass; weights are renormalized to machine
    unit mass so the equality constraints are consistent.
    """
    w1 = np.maximum(np.asarray(w1, dtype=float), 0.0)
    w2 = np.maximum(np.asarray(w2, dtype=float), 0.0)
    w1 = w1 / w1.sum()
    w2 = w2 / w2.sum()
    src = np.flatnonzero(w1 > 1e-15)
    dst = np.flatnonzero(w2 > 1e-15)
    a, b = w1[src], w2[dst]
    pts = np.asarray(points, dtype=float)
    cost = np.linalg.norm(pts[src][:, None, :] - pts[dst][None, :, :], axis=-1)
    ns, nd = len(src), len(dst)
    nvar = ns * nd
    rows, cols, vals = [], [], []
    for i in range(ns):
        rows.extend([i] * nd)
        cols.extend(range(i * nd, (i + 1) * nd))
        vals.extend([1.0] * nd)
    for j in range(nd):
        rows.extend([ns + j] * ns)
        cols.extend(range(j, nvar, nd))
        vals.extend([1.0] * ns)
    a_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(ns + nd, nvar))
    b_eq = np.concatenate([a, b])
    # one marginal constraint is redundant; dropping it keeps HiGHS happy
    res = linprog(cost.ravel(), A_eq=a_eq[:-1], b_eq=b_eq[:-1], method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


@dataclass(frozen=True)
class HolderDiagnostic:
    exponent: float
    max_ratio: float
    separations: np.ndarray
    distances: np.ndarray
    degenerate: bool


def holder_half_diagnostic(m: DensityPath, max_k: int = 5) -> HolderDiagnostic:
    """Fit d1(m(0), m(tau)) ~ tau^s over dyadic tau anchored at t = 0.

    Uses tau = T / 2^k for k = 1..max_k (only those landing on grid levels);
    needs at least four of them.  A path that never moves is reported as
    degenerate with no exponent.
    """
    grid = m.grid
    ks = [k for k in range(1, max_k + 1) if grid.nt % (2**k) == 0]
    if len(ks) < 4:
        raise ConfigError(
            f"need at least 4 dyadic separations; nt={grid.nt} admits {len(ks)}"
        )
    base = GridMeasure.from_density(grid, m.values[0])
    taus, dists = [], []
    for k in ks:
        level = grid.nt // (2**k)
        taus.append(level * grid.dt)
        dists.append(d1(base, GridMeasure.from_density(grid, m.values[level])))
    taus = np.asarray(taus)
    dists = np.asarray(dists)
    if np.all(dists < 1e-15):
        return HolderDiagnostic(
            exponent=float("nan"), max_ratio=0.0, separations=taus, distances=dists, degenerate=True
        )
    slope, _ = np.polyfit(np.log(taus), np.log(np.maximum(dists, 1e-300)), 1)
    return HolderDiagnostic(
        exponent=float(slope),
        max_ratio=float(np.max(dists / np.sqrt(taus))),
        separations=taus,
        distances=dists,
        degenerate=False,
    )
