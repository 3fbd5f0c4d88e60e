"""Backward monotone finite-difference solver for the fully nonlinear HJB flow.

The equation marched here is

    u_t + H2(t, x, lap u) + H1(t, x, grad u) + F(t, x) = 0,   u(T) = G,

on the periodic box.  One explicit Euler step backward in time reads

    u^n = u^{n+1} + dt * [ H2(t_{n+1}, x, Lap_h u^{n+1})
                         + H1(t_{n+1}, x, Dc u^{n+1})
                         + (theta_lf * dx / 2) * Lap_h u^{n+1}
                         + F^{n+1} ],

with Lap_h the 3-point periodic Laplacian per axis and Dc the centered
gradient.  The third term is the Lax-Friedrichs dissipation: writing the
one-sided differences p^+ (backward) and p^- (forward) per axis, it equals
theta_lf * sum_axes (p^+ - p^-) / 2 with the orientation that makes the
backward march monotone.  Under the grid's time-step bound every node of u^n
is nondecreasing in every node of u^{n+1}: the off-diagonal stencil weights
are

    dt * (H2_q / dx^2 + theta_lf / (2 dx) +- H1_{p_k} / (2 dx))  >=  0

because H2_q >= lambda1^2/2 > 0 and |H1_p| <= theta_lf, and the diagonal
weight 1 - dt * (2 d H2_q / dx^2 + d theta_lf / dx) stays in [0, 1].
Monotonicity gives the discrete comparison principle and the sup-norm
barrier bound for free.

The module also provides:

  * the exponential change of variable v(t, x) = exp(-lam (T - t)) u(t, x)
    and the solver/residual for the transformed equation

        -v_t - H2_lam(t, x, lap v) - H1_lam(t, x, grad v) + lam v = F_lam,

    where H_lam(t, x, .) = exp(-lam (T-t)) H(t, x, exp(lam (T-t)) .);
  * the scheme residual evaluator (identically zero on solver output);
  * the linearization of the solved equation: coefficient fields

        V(t,x) = mean of H2_q(t, x, s * lap u) over s in [0, 1],
        Z(t,x) = mean of H1_p(t, x, s * grad u) over s in [0, 1],
        c(t,x) = H2(t, x, 0) + H1(t, x, 0),

    which satisfy V * Lap_h u + Z . Dc u + c = H2(Lap_h u) + H1(Dc u)
    exactly by the fundamental theorem of calculus.  For the closed-form
    Hamiltonians the s-integrals of the clamped-linear derivatives are
    computed in closed form; tabulated specs fall back to Gauss-Legendre
    quadrature on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ModelSpec, h1_terms, h1_value, h2_terms, h2_value
from .errors import ContractError, StabilityError
from .grid import GridSpec, TimeField, grad_central, laplacian

_A_TOL = 1e-9


def _check_model_grid(model: ModelSpec, grid: GridSpec) -> None:
    if model.dim != grid.dim:
        raise StabilityError(f"model dim {model.dim} != grid dim {grid.dim}")
    if abs(model.horizon - grid.horizon) > 1e-12 * max(1.0, model.horizon):
        raise StabilityError(
            f"grid horizon {grid.horizon} != model horizon {model.horizon}"
        )
    if grid.a_max < model.bounds.a_max - 1e-12:
        raise StabilityError(
            f"grid stability budget a_max={grid.a_max} is below the model's "
            f"diffusion bound {model.bounds.a_max}"
        )
    if grid.theta_lf < model.bounds.drift_bound - 1e-12:
        raise StabilityError(
            f"grid dissipation theta_lf={grid.theta_lf} is below the model's "
            f"drift bound {model.bounds.drift_bound}"
        )


def grid_for(model: ModelSpec, nx: int, nt: int, box_length: float = 1.0, dim: int | None = None) -> GridSpec:
    """Grid sized for a model: stability data pulled from its control bounds."""
    return GridSpec(
        dim=model.dim if dim is None else dim,
        box_length=box_length,
        nx=nx,
        nt=nt,
        horizon=model.horizon,
        a_max=model.bounds.a_max,
        theta_lf=model.bounds.drift_bound,
    )


def solve_hjb(model: ModelSpec, f_path: TimeField, g_slice: np.ndarray, grid: GridSpec) -> TimeField:
    """March the terminal slice g backward through the monotone scheme."""
    _check_model_grid(model, grid)
    if not f_path.grid.same_lattice(grid):
        raise ValueError("running-cost field lives on a different lattice")
    g = np.asarray(g_slice, dtype=float)
    if g.shape != grid.shape:
        raise ValueError(f"terminal slice shape {g.shape} != grid shape {grid.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("terminal slice contains non-finite values")

    dx, dt = grid.dx, grid.dt
    x = grid.coords()
    half_theta_dx = 0.5 * grid.theta_lf * dx
    u = np.empty((grid.nt + 1, *grid.shape))
    u[grid.nt] = g
    for n in range(grid.nt - 1, -1, -1):
        un1 = u[n + 1]
        t1 = (n + 1) * dt
        lap = laplacian(un1, dx)
        grad = grad_central(un1, dx)
        step = (
            h2_value(model, t1, x, lap)
            + h1_value(model, t1, x, grad)
            + half_theta_dx * lap
            + f_path.values[n + 1]
        )
        unew = un1 + dt * step
        if not np.all(np.isfinite(unew)):
            bad = np.argwhere(~np.isfinite(unew))[0]
            raise ContractError(f"non-finite value at time level {n}, node {tuple(bad)}")
        u[n] = unew
    return TimeField(grid, u)


def hjb_residual(u: TimeField, model: ModelSpec, f_path: TimeField) -> TimeField:
    """Scheme residual of a field; zero (to round-off) for solver output.

    Level n of the result holds (u^{n+1} - u^n)/dt + H2 + H1_LF + F^{n+1}
    evaluated on level n+1; the terminal level is set to zero.
    """
    grid = u.grid
    if not f_path.grid.same_lattice(grid):
        raise ValueError("running-cost field lives on a different lattice")
    dx, dt = grid.dx, grid.dt
    x = grid.coords()
    half_theta_dx = 0.5 * grid.theta_lf * dx
    r = np.zeros_like(u.values)
    for n in range(grid.nt):
        un1 = u.values[n + 1]
        t1 = (n + 1) * dt
        lap = laplacian(un1, dx)
        grad = grad_central(un1, dx)
        r[n] = (
            (un1 - u.values[n]) / dt
            + h2_value(model, t1, x, lap)
            + h1_value(model, t1, x, grad)
            + half_theta_dx * lap
            + f_path.values[n + 1]
        )
    return TimeField(grid, r)


def lambda_transform(u: TimeField, lam: float, direction: str) -> TimeField:
    """Exponential change of variable v(t) = exp(-lam (T - t)) u(t).

    direction 'forward' applies the factor, 'inverse' removes it; the
    round trip is the identity to round-off.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    grid = u.grid
    tt = grid.times()
    expo = -lam * (grid.horizon - tt) if direction == "forward" else lam * (grid.horizon - tt)
    factors = np.exp(expo).reshape((-1,) + (1,) * grid.dim)
    return TimeField(grid, u.values * factors)


def solve_hjb_lambda(
    model: ModelSpec, f_path: TimeField, g_slice: np.ndarray, grid: GridSpec, lam: float
) -> TimeField:
    """March the discounted form of the equation; returns the transformed field v.

    The transformed Hamiltonians are evaluated through the originals:
    H_lam(t, x, w) = mu * H(t, x, w / mu) with mu = exp(-lam (T - t)), and the
    running cost is scaled the same way.  The extra +lam v term shows up as a
    (1 - lam dt) factor on the diagonal, so the march stays monotone for
    lam * dt <= 1.
    """
    _check_model_grid(model, grid)
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if lam * grid.dt > 1.0:
        raise StabilityError(f"discount step lam*dt={lam * grid.dt:.3g} exceeds 1")
    g = np.asarray(g_slice, dtype=float)
    dx, dt = grid.dx, grid.dt
    x = grid.coords()
    half_theta_dx = 0.5 * grid.theta_lf * dx
    v = np.empty((grid.nt + 1, *grid.shape))
    v[grid.nt] = g
    for n in range(grid.nt - 1, -1, -1):
        vn1 = v[n + 1]
        t1 = (n + 1) * dt
        mu = np.exp(-lam * (grid.horizon - t1))
        lap = laplacian(vn1, dx)
        grad = grad_central(vn1, dx)
        step = (
            mu * h2_value(model, t1, x, lap / mu)
            + mu * h1_value(model, t1, x, grad / mu)
            + half_theta_dx * lap
            + mu * f_path.values[n + 1]
            - lam * vn1
        )
        v[n] = vn1 + dt * step
    return TimeField(grid, v)


def hjb_lambda_residual(v: TimeField, model: ModelSpec, f_path: TimeField, lam: float) -> TimeField:
    """Scheme residual of a field under the discounted march."""
    grid = v.grid
    dx, dt = grid.dx, grid.dt
    x = grid.coords()
    half_theta_dx = 0.5 * grid.theta_lf * dx
    r = np.zeros_like(v.values)
    for n in range(grid.nt):
        vn1 = v.values[n + 1]
        t1 = (n + 1) * dt
        mu = np.exp(-lam * (grid.horizon - t1))
        lap = laplacian(vn1, dx)
        grad = grad_central(vn1, dx)
        r[n] = (
            (vn1 - v.values[n]) / dt
            + mu * h2_value(model, t1, x, lap / mu)
            + mu * h1_value(model, t1, x, grad / mu)
            + half_theta_dx * lap
            + mu * f_path.values[n + 1]
            - lam * vn1
        )
    return TimeField(grid, r)


# --------------------------------------------------------------------------
# monotonicity certificate
# --------------------------------------------------------------------------


def monotonicity_certificate(model: ModelSpec, grid: GridSpec, u_slice: np.ndarray, t: float) -> dict:
    """Stencil weights of one backward step with argmins frozen at u_slice.

    Freezing the minimizing controls makes the step affine in the previous
    slice; the returned bounds certify the monotone structure: all neighbor
    weights nonnegative, diagonal weight in [0, 1].
    """
    _check_model_grid(model, grid)
    dx, dt = grid.dx, grid.dt
    x = grid.coords()
    lap = laplacian(np.asarray(u_slice, dtype=float), dx)
    grad = grad_central(np.asarray(u_slice, dtype=float), dx)
    _, a_coef, _ = h2_terms(model, t, x, lap)
    _, b_coef, _ = h1_terms(model, t, x, grad)
    theta = grid.theta_lf
    diffusive = a_coef / dx**2 + theta / (2.0 * dx)
    off_min = np.inf
    for k in range(grid.dim):
        off_min = min(
            off_min,
            float(np.min(dt * (diffusive + b_coef[..., k] / (2.0 * dx)))),
            float(np.min(dt * (diffusive - b_coef[..., k] / (2.0 * dx)))),
        )
    diag = 1.0 - dt * (2.0 * grid.dim * a_coef / dx**2 + grid.dim * theta / dx)
    return {
        "off_diagonal_min": off_min,
        "diagonal_min": float(np.min(diag)),
        "diagonal_max": float(np.max(diag)),
    }


# --------------------------------------------------------------------------
# linearization
# --------------------------------------------------------------------------


@dataclass
class LinearizedCoefficients:
    """Coefficient fields of the linearized equation -u_t - V lap u - Z.Du = c."""

    v: TimeField
    z: np.ndarray  # shape (nt+1,) + grid.shape + (dim,)
    c: TimeField


def _clamp_antiderivative(r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Antiderivative A(r) of clamp(., lo, hi) with A(lo) = lo^2 (branch glue)."""
    below = lo * r
    middle = lo * lo + 0.5 * (r * r - lo * lo)
    above = lo * lo + 0.5 * (hi * hi - lo * lo) + hi * (r - hi)
    return np.where(r <= lo, below, np.where(r <= hi, middle, above))


def _mean_clamped_linear(a, b, lo: float, hi: float) -> np.ndarray:
    """Exact mean over s in [0,1] of clamp(a - b s, lo, hi), vectorized.

    Equals (A(a) - A(a - b)) / b away from b = 0; the relative cancellation
    there is harmless because every consumer multiplies the mean back by a
    quantity proportional to b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tiny = np.abs(b) < 1e-300
    b_safe = np.where(tiny, 1.0, b)
    mean = (_clamp_antiderivative(a, lo, hi) - _clamp_antiderivative(a - b_safe, lo, hi)) / b_safe
    return np.where(tiny, np.clip(a, lo, hi), mean)


def _gauss_legendre_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def linearize(u: TimeField, model: ModelSpec, order: int = 16) -> LinearizedCoefficients:
    """Coefficients (V, Z, c) reproducing H2 + H1 at the field's own derivatives.

    V averages H2_q along the segment [0, lap u], Z averages H1_p along
    [0, grad u], and c = H2(t, x, 0) + H1(t, x, 0), so that

        V * Lap_h u + Z . Dc u + c = H2(t, x, Lap_h u) + H1(t, x, Dc u)

    holds at every node: exactly for closed-form Hamiltonians (closed-form
    segment means), within quadrature tolerance otherwise.
    """
    grid = u.grid
    dx = grid.dx
    x = grid.coords()
    tt = grid.times()
    v_vals = np.empty_like(u.values)
    z_vals = np.empty(u.values.shape + (grid.dim,))
    c_vals = np.empty_like(u.values)
    ham = model.hamiltonians
    closed = ham.kind == "closed-form"
    if not closed:
        s_nodes, s_weights = _gauss_legendre_01(order)
    for n in range(grid.nt + 1):
        lap = laplacian(u.values[n], dx)
        grad = grad_central(u.values[n], dx)
        t = tt[n]
        if closed:
            cf = ham.closed_form
            v_vals[n] = _mean_clamped_linear(
                cf.l3_vertex, lap / (2.0 * cf.l3_weight), model.bounds.a_min, model.bounds.a_max
            )
            for k in range(grid.dim):
                z_vals[(n, ..., k)] = _mean_clamped_linear(
                    0.0,
                    grad[..., k] / (2.0 * cf.l1_weight),
                    -cf.drift_ctrl_max,
                    cf.drift_ctrl_max,
                )
        else:
            v_acc = np.zeros(grid.shape)
            z_acc = np.zeros(grid.shape + (grid.dim,))
            for s, w in zip(s_nodes, s_weights):
                v_acc += w * h2_terms(model, t, x, s * lap)[1]
                z_acc += w * h1_terms(model, t, x, s * grad)[1]
            v_vals[n] = v_acc
            z_vals[n] = z_acc
        c_vals[n] = h2_value(model, t, x, np.zeros(grid.shape)) + h1_value(
            model, t, x, np.zeros(grid.shape + (grid.dim,))
        )
    lo, hi = model.bounds.a_min, model.bounds.a_max
    if v_vals.min() < lo - _A_TOL or v_vals.max() > hi + _A_TOL:
        raise ContractError(
            f"linearized diffusion coefficient left [{lo}, {hi}]: "
            f"range [{v_vals.min()}, {v_vals.max()}]"
        )
    return LinearizedCoefficients(
        v=TimeField(grid, v_vals), z=z_vals, c=TimeField(grid, c_vals)
    )


def linearization_identity_gap(u: TimeField, model: ModelSpec, coeffs: LinearizedCoefficients) -> float:
    """Sup-norm gap of V*Lap u + Z.Du + c against H2 + H1 over all nodes."""
    grid = u.grid
    dx = grid.dx
    x = grid.coords()
    tt = grid.times()
    worst = 0.0
    for n in range(grid.nt + 1):
        lap = laplacian(u.values[n], dx)
        grad = grad_central(u.values[n], dx)
        lhs = coeffs.v.values[n] * lap + np.sum(coeffs.z[n] * grad, axis=-1) + coeffs.c.values[n]
        rhs = h2_value(model, tt[n], x, lap) + h1_value(model, tt[n], x, grad)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
