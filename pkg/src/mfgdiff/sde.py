"""Monte-Carlo verification of the stochastic side of the control problem.

The agent's state follows

    dX_s = alpha_s ds + sigma_s dB_s        (wrapped onto the torus),

and the cost of a control pair is

    J = integral over [0, T] of ( L1(s, X, alpha) + L2(s, X, sigma)
                                  + F(s, X, m(s)) ) ds  +  G(X_T, m(T)).

With the feedback synthesis read off a solved value field,

    alpha* = H1_p(s, X, grad u),    sigma* = sqrt(2 H2_q(s, X, lap u)),

the sample mean of J over Euler paths must agree with u(0, x0) up to Monte
Carlo noise plus the scheme bias (the value function is the infimum of J and
the feedback controls attain it).  Running Lagrangian costs are recovered
from the envelope identities rather than evaluated separately:

    L1(alpha*) = H1 - <p, alpha*>,      L3(eta*) = H2 - eta* q,

which holds for every representation because the argmin attains the infimum.

Three instruments are provided:

  * `simulate_value`: E[J] under feedback (or overridden constant) controls;
  * `dpp_check`: the one-step programming identity
        u(0, x0) = E[ running cost over [0, h] + u(h, X_h) ];
  * `modulus_check`: the trajectory modulus E[sup_{s <= h} |X_s - x0|],
    whose dyadic log-log slope sits near 1/2 for diffusion-dominated
    configurations (the sqrt(h) estimate; a drift bound M adds an M*h term,
    so the fit is only meaningful for h small against (lambda1/M)^2).

Spatial fields (lap u, grad u, F, G) are interpolated multilinearly and
frozen per PDE time level (piecewise constant in time).  Paths are advanced
in one vectorized batch per step, so a fixed seed reproduces estimates
bit-for-bit; antithetic pairing mirrors the Gaussian increments of the
second half of the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ModelSpec, h1_terms, h2_terms
from .errors import ConfigError, ContractError
from .fixed_point import coupling_fields
from .fp import DensityPath
from .grid import TimeField, grad_central, interp_periodic, laplacian

_GUARD_SIGMAS = 10.0


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo run parameters."""

    num_paths: int
    dt_mc: float
    seed: int
    x0: tuple[float, ...]
    antithetic: bool = False

    def __post_init__(self):
        if self.num_paths < 100:
            raise ConfigError(f"need at least 100 paths, got {self.num_paths}")
        if self.dt_mc <= 0:
            raise ConfigError(f"dt_mc must be positive, got {self.dt_mc}")
        if self.antithetic and self.num_paths % 2:
            raise ConfigError("antithetic sampling needs an even path count")
        object.__setattr__(self, "x0", tuple(float(c) for c in self.x0))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    num_paths: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("standard error cannot be negative")


@dataclass(frozen=True)
class DppResult:
    gap: float
    std_error: float
    mc_mean: float
    reference: float


@dataclass(frozen=True)
class ModulusResult:
    slope: float
    separations: np.ndarray
    estimates: np.ndarray


def _check_increment_guard(increments: np.ndarray, bound: float, where: str) -> None:
    """Abort when per-step increments repeatedly exceed the sanity bound."""
    if not np.all(np.isfinite(increments)):
        raise ContractError(f"non-finite path increment during {where}")
    count = int(np.count_nonzero(np.abs(increments) > bound))
    allowed = max(10, int(1e-6 * increments.size))
    if count > allowed:
        raise ContractError(
            f"{count} path increments exceeded the sanity bound {bound:.3g} "
            f"during {where} (allowed {allowed})"
        )


def _estimate(costs: np.ndarray, antithetic: bool) -> McEstimate:
    if antithetic:
        half = costs.size // 2
        costs = 0.5 * (costs[:half] + costs[half:])
    n = costs.size
    mean = float(costs.mean())
    se = float(costs.std(ddof=1) / np.sqrt(n))
    return McEstimate(mean=mean, std_error=se, num_paths=n)


def _mc_steps(horizon: float, dt_mc: float) -> int:
    steps = horizon / dt_mc
    rounded = round(steps)
    if rounded < 1 or abs(steps - rounded) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"dt_mc={dt_mc} does not divide the horizon {horizon}")
    return int(rounded)


def _draw_increments(rng, n_paths: int, dim: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal((n_paths, dim))
    half = n_paths // 2
    z = rng.standard_normal((half, dim))
    return np.concatenate([z, -z], axis=0)


def _feedback_fields(u: TimeField):
    grid = u.grid
    laps = np.empty_like(u.values)
    grads = np.empty(u.values.shape + (grid.dim,))
    for n in range(grid.nt + 1):
        laps[n] = laplacian(u.values[n], grid.dx)
        grads[n] = grad_central(u.values[n], grid.dx)
    return laps, grads


def _interp_vector(field_slice: np.ndarray, grid, pts: np.ndarray) -> np.ndarray:
    return np.stack(
        [interp_periodic(field_slice[..., k], grid, pts) for k in range(grid.dim)], axis=-1
    )


def simulate_value(
    u: TimeField,
    m: DensityPath,
    model: ModelSpec,
    cfg: McConfig,
    alpha_const: np.ndarray | None = None,
    eta_const: float | None = None,
) -> McEstimate:
    """Sample mean and standard error of the control cost from x0 at t = 0.

    With no overrides the controls are the feedback synthesis from u, so the
    mean estimates u(0, x0).  Passing `alpha_const` / `eta_const` runs a
    (generally suboptimal) constant control pair instead, whose mean can only
    sit above the value.
    """
    grid = u.grid
    if not m.grid.same_lattice(grid):
        raise ValueError("value field and density live on different lattices")
    if cfg.dt_mc > grid.dt * (1.0 + 1e-12):
        raise ConfigError(f"dt_mc={cfg.dt_mc} exceeds the grid step {grid.dt}")
    if len(cfg.x0) != grid.dim:
        raise ConfigError(f"x0 needs {grid.dim} coordinates")
    if alpha_const is not None:
        alpha_const = np.broadcast_to(np.asarray(alpha_const, dtype=float), (grid.dim,))
        if np.max(np.abs(alpha_const)) > model.bounds.drift_bound + 1e-12:
            raise ConfigError("constant drift control exceeds the drift bound")
    if eta_const is not None:
        if not (model.bounds.a_min - 1e-12 <= eta_const <= model.bounds.a_max + 1e-12):
            raise ConfigError("constant diffusion control leaves the admissible interval")

    steps = _mc_steps(grid.horizon, cfg.dt_mc)
    costs = _accumulate_costs(u, m, model, cfg, steps, horizon_level=grid.nt,
                              alpha_const=alpha_const, eta_const=eta_const,
                              add_terminal_value=False)
    return _estimate(costs, cfg.antithetic)


def dpp_check(u: TimeField, m: DensityPath, model: ModelSpec, cfg: McConfig, h: float) -> DppResult:
    """Gap in the one-step programming identity at horizon h from (0, x0)."""
    grid = u.grid
    steps = h / cfg.dt_mc
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
        raise ConfigError(f"h={h} must be a positive multiple of dt_mc={cfg.dt_mc}")
    level = h / grid.dt
    if abs(level - round(level)) > 1e-9:
        raise ConfigError(f"h={h} must land on a grid time level (dt={grid.dt})")
    if h > grid.horizon * (1.0 + 1e-12):
        raise ConfigError("h exceeds the horizon")
    costs = _accumulate_costs(
        u, m, model, cfg, int(round(steps)), horizon_level=int(round(level)),
        alpha_const=None, eta_const=None, add_terminal_value=True,
    )
    est = _estimate(costs, cfg.antithetic)
    x0 = np.asarray(cfg.x0)[None, :]
    ref = float(interp_periodic(u.values[0], grid, x0)[0])
    return DppResult(gap=abs(est.mean - ref), std_error=est.std_error, mc_mean=est.mean, reference=ref)


def _accumulate_costs(
    u: TimeField,
    m: DensityPath,
    model: ModelSpec,
    cfg: McConfig,
    steps: int,
    horizon_level: int,
    alpha_const,
    eta_const,
    add_terminal_value: bool,
) -> np.ndarray:
    """Euler paths from (0, x0) for `steps` MC steps; cost per path.

    Ends at PDE level `horizon_level`, adding either the terminal payoff
    (full horizon) or the interpolated value slice there (programming
    identity probes).
    """
    grid = u.grid
    dt, dim = cfg.dt_mc, grid.dim
    laps, grads = _feedback_fields(u)
    f_path, g_slice = coupling_fields(model, grid, m.values)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.num_paths
    x = np.tile(np.asarray(cfg.x0, dtype=float), (n, 1))
    cost = np.zeros(n)
    sqdt = np.sqrt(dt)
    guard = _GUARD_SIGMAS * np.sqrt(model.bounds.lambda2**2 * dt) + model.bounds.drift_bound * dt
    for j in range(steps):
        s = j * dt
        level = min(int(s / grid.dt + 1e-9), grid.nt)
        if alpha_const is None:
            p = _interp_vector(grads[level], grid, x)
            q = interp_periodic(laps[level], grid, x)
            h1v, alpha, _ = h1_terms(model, s, x, p)
            h2v, eta, _ = h2_terms(model, s, x, q)
            l1_cost = h1v - np.sum(p * alpha, axis=-1)
            l3_cost = h2v - eta * q
        else:
            alpha = np.broadcast_to(alpha_const, (n, dim))
            eta = np.full(n, float(eta_const))
            l1_cost = _l1_at(model, s, x, alpha)
            l3_cost = _l3_at(model, s, x, eta)
        f_here = interp_periodic(f_path.values[level], grid, x)
        cost += (l1_cost + l3_cost + f_here) * dt
        sigma = np.sqrt(2.0 * eta)
        inc = alpha * dt + sigma[..., None] * sqdt * _draw_increments(rng, n, dim, cfg.antithetic)
        _check_increment_guard(inc, guard, "cost simulation")
        x = np.mod(x + inc, grid.box_length)
    if add_terminal_value:
        cost += interp_periodic(u.values[horizon_level], grid, x)
    else:
        cost += interp_periodic(g_slice, grid, x)
    return cost


def _l1_at(model: ModelSpec, t, x, alpha: np.ndarray) -> np.ndarray:
    """Running drift cost at an explicit control point."""
    ham = model.hamiltonians
    if ham.kind == "closed-form":
        return ham.closed_form.l1_weight * np.sum(alpha**2, axis=-1)
    if ham.kind == "tabulated":
        # constant-control probes use a grid point; evaluate its cost directly
        return np.asarray(ham.lagrangian_l1(t, x, alpha[0]), dtype=float) * np.ones(alpha.shape[0])
    raise ConfigError("constant-control simulation needs a closed-form or tabulated spec")


def _l3_at(model: ModelSpec, t, x, eta: np.ndarray) -> np.ndarray:
    ham = model.hamiltonians
    if ham.kind == "closed-form":
        cf = ham.closed_form
        return cf.l3_weight * (eta - cf.l3_vertex) ** 2
    if ham.kind == "tabulated":
        return np.asarray(ham.lagrangian_l3(t, x, float(eta.flat[0])), dtype=float) * np.ones(eta.shape[0])
    raise ConfigError("constant-control simulation needs a closed-form or tabulated spec")


def modulus_check(
    model: ModelSpec,
    cfg: McConfig,
    h_list,
    alpha_const=0.0,
    eta_const: float | None = None,
) -> ModulusResult:
    """Log-log slope of E[sup over [0, h] of |X - x0|] against dyadic h.

    Runs constant admissible controls on unwrapped coordinates (the modulus
    is a displacement, so no torus wrap applies) and records the running
    supremum at each requested h.  Needs at least four h values, each a
    multiple of dt_mc.
    """
    h_arr = np.sort(np.asarray(list(h_list), dtype=float))
    if h_arr.size < 4:
        raise ConfigError(f"need at least 4 separations to fit a slope, got {h_arr.size}")
    if np.any(h_arr <= 0):
        raise ConfigError("separations must be positive")
    dim = model.dim
    alpha = np.broadcast_to(np.asarray(alpha_const, dtype=float), (dim,))
    if np.max(np.abs(alpha)) > model.bounds.drift_bound + 1e-12:
        raise ConfigError("constant drift control exceeds the drift bound")
    eta = model.bounds.a_min if eta_const is None else float(eta_const)
    if not (model.bounds.a_min - 1e-12 <= eta <= model.bounds.a_max + 1e-12):
        raise ConfigError("constant diffusion control leaves the admissible interval")

    dt = cfg.dt_mc
    checkpoints = []
    for h in h_arr:
        k = h / dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k) or round(k) < 1:
            raise ConfigError(f"h={h} is not a multiple of dt_mc={dt}")
        checkpoints.append(int(round(k)))
    total = checkpoints[-1]
    rng = np.random.default_rng(cfg.seed)
    n = cfg.num_paths
    x = np.zeros((n, dim))
    running_max = np.zeros(n)
    sigma = np.sqrt(2.0 * eta)
    estimates = np.empty(h_arr.size)
    guard = _GUARD_SIGMAS * np.sqrt(model.bounds.lambda2**2 * dt) + model.bounds.drift_bound * dt
    next_idx = 0
    for j in range(1, total + 1):
        inc = alpha * dt + sigma * np.sqrt(dt) * _draw_increments(rng, n, dim, cfg.antithetic)
        _check_increment_guard(inc, guard, "modulus simulation")
        x = x + inc
        running_max = np.maximum(running_max, np.linalg.norm(x, axis=-1))
        while next_idx < len(checkpoints) and checkpoints[next_idx] == j:
            estimates[next_idx] = running_max.mean()
            next_idx += 1
    slope, _ = np.polyfit(np.log(h_arr), np.log(estimates), 1)
    return ModulusResult(slope=float(slope), separations=h_arr, estimates=estimates)
