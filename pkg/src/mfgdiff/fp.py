"""Forward density solver: exact discrete adjoint of the transport generator.

From a solved value field u the generator of the optimally controlled
process is assembled per time level:

    (L v)_i = a_i * (Lap_h v)_i + sum_k b_{k,i} * (D_k^upwind v)_i,

with a = H2_q(t, x, Lap_h u) (diffusion coefficient, pinned to
[lambda1^2/2, lambda2^2/2] by ellipticity) and b = H1_p(t, x, Dc u)
(drift).  Upwinding picks the forward difference where b_k > 0 and the
backward difference where b_k < 0, so every off-diagonal entry of L is
nonnegative and L annihilates constants exactly.

The density is marched with the transpose:

    m^{n+1} = (I + dt * L_n^T) m^n.

Because transposition preserves both the zero column sums and (under the
grid's time-step bound) the nonnegativity of I + dt * L, the march conserves
mass exactly by telescoping and preserves positivity.  The transpose applies
the coefficient before differentiating, so the diffusion part of L^T m is the
second difference of the product a*m: the scheme realizes the
"Laplacian-of-(a m)" form of the density equation, not div(a grad m).

Duality is built in rather than checked asymptotically: for any terminal
test slice and source, the backward dual march

    phi^n = (I + dt * L_n) phi^{n+1} + dt * psi^{n+1}

satisfies the summation-by-parts identity

    <phi_T, m^{nt}> + dt * sum_n <psi^{n+1}, m^n> = <phi^0, m^0>

to round-off (right-endpoint rule in psi against the left-endpoint density),
because each step pairs a matrix with its exact transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ModelSpec, h1_terms, h2_terms
from .errors import ContractError, StabilityError
from .grid import GridSpec, TimeField, grad_central, laplacian

_NEG_TOL = 1e-14
_MASS_TOL = 1e-12


@dataclass
class TransportOperator:
    """Per-level generator coefficients on a grid.

    a has shape (nt+1,) + grid.shape, b has an extra trailing axis of length
    grid.dim.  Instances are immutable once built.
    """

    grid: GridSpec
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        expected_a = (self.grid.nt + 1, *self.grid.shape)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != expected_a:
            raise ValueError(f"a has shape {self.a.shape}, expected {expected_a}")
        if self.b.shape != expected_a + (self.grid.dim,):
            raise ValueError(
                f"b has shape {self.b.shape}, expected {expected_a + (self.grid.dim,)}"
            )
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("transport coefficients contain non-finite values")

    @classmethod
    def constant(cls, grid: GridSpec, a: float, b=0.0) -> "TransportOperator":
        """Frozen-coefficient operator (testing and analytic comparisons)."""
        a_arr = np.full((grid.nt + 1, *grid.shape), float(a))
        b_vec = np.broadcast_to(np.asarray(b, dtype=float), (grid.dim,))
        b_arr = np.broadcast_to(b_vec, (grid.nt + 1, *grid.shape, grid.dim)).copy()
        return cls(grid, a_arr, b_arr)

    def apply_generator(self, level: int, v: np.ndarray) -> np.ndarray:
        """(L v) at one time level."""
        dx = self.grid.dx
        out = self.a[level] * laplacian(v, dx, self.grid.dim)
        for k in range(self.grid.dim):
            bk = self.b[(level, ..., k)]
            bp = np.maximum(bk, 0.0)
            bm = np.minimum(bk, 0.0)
            out += bp * (np.roll(v, -1, axis=k) - v) / dx
            out += bm * (v - np.roll(v, 1, axis=k)) / dx
        return out

    def apply_adjoint(self, level: int, m: np.ndarray) -> np.ndarray:
        """(L^T m) at one time level: Lap_h(a m) minus the upwind divergence of b m."""
        dx = self.grid.dx
        out = laplacian(self.a[level] * m, dx, self.grid.dim)
        for k in range(self.grid.dim):
            bk = self.b[(level, ..., k)]
            flux_p = np.maximum(bk, 0.0) * m
            flux_m = np.minimum(bk, 0.0) * m
            out += (np.roll(flux_p, 1, axis=k) - flux_p) / dx
            out += (flux_m - np.roll(flux_m, -1, axis=k)) / dx
        return out

    def to_dense(self, level: int) -> np.ndarray:
        """Dense generator matrix at one level (small grids, inspection only)."""
        n = self.grid.n_nodes
        mat = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            mat[:, j] = self.apply_generator(level, e.reshape(self.grid.shape)).ravel()
        return mat

    def step_positivity_margin(self) -> float:
        """Min over nodes/levels of the diagonal entry of I + dt * L."""
        dx, dt = self.grid.dx, self.grid.dt
        drift_out = np.sum(np.abs(self.b), axis=-1) / dx
        diag = 1.0 - dt * (2.0 * self.grid.dim * self.a / dx**2 + drift_out)
        return float(diag.min())


@dataclass
class DensityPath:
    """Density values over all time levels with per-level mass bookkeeping."""

    grid: GridSpec
    values: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        expected = (self.grid.nt + 1, *self.grid.shape)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected:
            raise ValueError(f"density shape {self.values.shape}, expected {expected}")
        self.mass = np.asarray(self.mass, dtype=float)

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray) -> "DensityPath":
        values = np.asarray(values, dtype=float)
        cell = grid.dx**grid.dim
        mass = values.reshape(grid.nt + 1, -1).sum(axis=1) * cell
        path = cls(grid, values, mass)
        path.validate()
        return path

    @classmethod
    def constant_in_time(cls, grid: GridSpec, slice_values: np.ndarray) -> "DensityPath":
        vals = np.broadcast_to(slice_values, (grid.nt + 1, *grid.shape)).copy()
        return cls.from_values(grid, vals)

    def validate(self) -> None:
        if self.values.min() < -_NEG_TOL:
            raise ContractError(
                f"density undershoot {self.values.min():.3e} below -{_NEG_TOL:.0e}"
            )
        drift = np.max(np.abs(self.mass - 1.0))
        if drift > _MASS_TOL:
            raise ContractError(f"mass drift {drift:.3e} exceeds {_MASS_TOL:.0e}")

    def terminal(self) -> np.ndarray:
        return self.values[self.grid.nt]

    def lp_norm(self, p: int, level: int | None = None) -> float:
        """Grid-level L^p norm, sup over levels unless one is given."""
        cell = self.grid.dx**self.grid.dim
        vals = self.values if level is None else self.values[level : level + 1]
        norms = (np.abs(vals.reshape(vals.shape[0], -1)) ** p).sum(axis=1) * cell
        return float(np.max(norms) ** (1.0 / p))

    def first_moment_spread(self) -> float:
        """Sup over levels of the mean absolute deviation from the level mean.

        Coordinates are unrolled (flat-line); meaningful while the mass stays
        away from the wrap seam.
        """
        cell = self.grid.dx**self.grid.dim
        coords = self.grid.coords()
        worst = 0.0
        for n in range(self.grid.nt + 1):
            w = self.values[n][..., None] * cell
            mean = (coords * w).reshape(-1, self.grid.dim).sum(axis=0)
            dev = np.linalg.norm(coords - mean, axis=-1)
            worst = max(worst, float((dev * self.values[n]).sum() * cell))
        return worst


def build_transport_operator(u: TimeField, model: ModelSpec) -> TransportOperator:
    """Read the generator coefficients off a solved value field."""
    grid = u.grid
    if model.dim != grid.dim:
        raise ValueError(f"model dim {model.dim} != grid dim {grid.dim}")
    x = grid.coords()
    tt = grid.times()
    a = np.empty((grid.nt + 1, *grid.shape))
    b = np.empty((grid.nt + 1, *grid.shape, grid.dim))
    for n in range(grid.nt + 1):
        lap = laplacian(u.values[n], grid.dx)
        grad = grad_central(u.values[n], grid.dx)
        a[n] = h2_terms(model, tt[n], x, lap)[1]
        b[n] = h1_terms(model, tt[n], x, grad)[1]
    lo, hi = model.bounds.a_min, model.bounds.a_max
    if a.min() < lo - 1e-9 or a.max() > hi + 1e-9:
        raise ContractError(
            f"diffusion coefficient left [{lo}, {hi}]: range [{a.min()}, {a.max()}] "
            "(inconsistent Hamiltonian derivative)"
        )
    return TransportOperator(grid, a, b)


def solve_fp(op: TransportOperator, m0: np.ndarray) -> DensityPath:
    """March the initial density forward with the adjoint steps.

    Rejects the run if the actual coefficients violate the positivity bound
    dt * (2 d a / dx^2 + sum_k |b_k| / dx) <= 1; aborts (no clamping) if a
    level undershoots below -1e-14 or drifts in mass beyond 1e-12.
    """
    grid = op.grid
    m0 = np.asarray(m0, dtype=float)
    if m0.shape != grid.shape:
        raise ValueError(f"initial density shape {m0.shape} != grid shape {grid.shape}")
    cell = grid.dx**grid.dim
    if m0.min() < -_NEG_TOL:
        raise ValueError(f"initial density has negative values ({m0.min():.3e})")
    if abs(m0.sum() * cell - 1.0) > _MASS_TOL:
        raise ValueError(f"initial density mass {m0.sum() * cell} is not 1")
    margin = op.step_positivity_margin()
    if margin < -1e-12:
        raise StabilityError(
            f"transport coefficients violate the positivity bound "
            f"(diagonal margin {margin:.3e}); refine the time grid"
        )

    vals = np.empty((grid.nt + 1, *grid.shape))
    mass = np.empty(grid.nt + 1)
    vals[0] = m0
    mass[0] = m0.sum() * cell
    for n in range(grid.nt):
        nxt = vals[n] + grid.dt * op.apply_adjoint(n, vals[n])
        if nxt.min() < -_NEG_TOL:
            raise ContractError(
                f"density undershoot {nxt.min():.3e} at level {n + 1}; aborting"
            )
        vals[n + 1] = nxt
        mass[n + 1] = nxt.sum() * cell
        if abs(mass[n + 1] - 1.0) > _MASS_TOL:
            raise ContractError(
                f"mass drift {mass[n + 1] - 1.0:.3e} at level {n + 1}; aborting"
            )
    return DensityPath(grid, vals, mass)


def solve_dual(op: TransportOperator, phi_terminal: np.ndarray, psi: TimeField) -> TimeField:
    """Backward dual march phi^n = (I + dt L_n) phi^{n+1} + dt psi^{n+1}."""
    grid = op.grid
    phi = np.empty((grid.nt + 1, *grid.shape))
    phi[grid.nt] = np.asarray(phi_terminal, dtype=float)
    for n in range(grid.nt - 1, -1, -1):
        phi[n] = phi[n + 1] + grid.dt * (
            op.apply_generator(n, phi[n + 1]) + psi.values[n + 1]
        )
    return TimeField(grid, phi)


def check_duality(m: DensityPath, op: TransportOperator, phi_terminal: np.ndarray, psi: TimeField) -> float:
    """Absolute duality gap; zero to round-off by exact transposition.

    Computes |<phi_T, m(T)> + dt * sum_n <psi^{n+1}, m^n> - <phi^0, m^0>| * dx^d
    with phi from the backward dual march.
    """
    grid = m.grid
    if not (op.grid.same_lattice(grid) and psi.grid.same_lattice(grid)):
        raise ValueError("duality check needs matching lattices")
    phi = solve_dual(op, phi_terminal, psi)
    cell = grid.dx**grid.dim
    terminal = float((np.asarray(phi_terminal) * m.values[grid.nt]).sum())
    source = float(
        sum((psi.values[n + 1] * m.values[n]).sum() for n in range(grid.nt)) * grid.dt
    )
    initial = float((phi.values[0] * m.values[0]).sum())
    return abs(terminal + source - initial) * cell
