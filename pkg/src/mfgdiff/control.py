"""Control problem: drift/diffusion Hamiltonians, their envelopes, mollification.

The agent picks a bounded drift alpha in a compact set U of R^d and a
diffusion level through eta = sigma^2 / 2 in S' = [lambda1^2/2, lambda2^2/2].
The two Hamiltonians are infima of affine-plus-running-cost expressions,

    H1(t, x, p) = min over U  of  <p, alpha> + L1(t, x, alpha)
    H2(t, x, q) = min over S' of  eta * q    + L3(t, x, eta)

so both are concave in their last argument, H2 is nondecreasing with slope in
[lambda1^2/2, lambda2^2/2] (uniform ellipticity), and where the minimizer is
unique the envelope relation gives the derivative for free:

    H1_p = argmin alpha,     H2_q = argmin eta.

Two concrete representations are supported:

  * closed-form: quadratic running costs w1 * |alpha|^2 on a per-axis box and
    w3 * (eta - vertex)^2, whose argmins are clamped linear functions of p, q.
    The package's reference configuration ("model A": d = 1, U = [-1, 1],
    L1 = alpha^2/2, S' = [1/2, 2], L3 = (eta - 1)^2) is the default record.
  * tabulated: finite control grids with user-supplied running-cost
    callables; minimization is exhaustive over the grid, which doubles as a
    brute-force oracle for the closed forms.

A mollified variant replaces every evaluation by a discrete convolution of
the original over (t, x, last-variable) offsets inside a radius delta, using
a tensor-product quadratic bump (1 - (r/delta)^2)_+ on nine offsets per axis.
Convex combinations preserve concavity and keep the derivative inside the
control interval, so the mollified Hamiltonians satisfy the same structural
bounds as the originals.

`validate_hypotheses` audits those structural bounds on a sample cloud:
ellipticity of H2_q, boundedness of values and derivatives at zero, the
coercivity-type bound H_last * arg - H >= -C, and the (t, x)-derivative
bounds, estimating derivatives by centered differences with step
1e-4 * (1 + |variable|) where no closed form exists.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .couplings import DensityInit, KernelCoupling, TerminalBase, TerminalSpec
from .errors import ConfigError

_FD_STEP = 1e-4  # finite-difference step scale for derivative audits


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlBounds:
    """Diffusion bounds 0 < lambda1 < lambda2 and the drift bound |b| <= M."""

    lambda1: float
    lambda2: float
    drift_bound: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.lambda1 < self.lambda2):
            raise ConfigError(
                f"need 0 < lambda1 < lambda2, got ({self.lambda1}, {self.lambda2})"
            )
        if self.drift_bound < 0:
            raise ConfigError(f"drift bound must be nonnegative, got {self.drift_bound}")

    @property
    def a_min(self) -> float:
        return 0.5 * self.lambda1**2

    @property
    def a_max(self) -> float:
        return 0.5 * self.lambda2**2


@dataclass(frozen=True)
class ClosedFormCoefficients:
    """Coefficient record for the quadratic-cost closed forms.

    Drift controls live in [-drift_ctrl_max, drift_ctrl_max] per axis with
    running cost l1_weight * |alpha|^2; the diffusion running cost is
    l3_weight * (eta - l3_vertex)^2 on [lambda1^2/2, lambda2^2/2].
    The defaults are the model-A values.
    """

    drift_ctrl_max: float = 1.0
    l1_weight: float = 0.5
    l3_vertex: float = 1.0
    l3_weight: float = 1.0

    def __post_init__(self):
        if self.drift_ctrl_max < 0:
            raise ConfigError("drift_ctrl_max must be nonnegative")
        if self.l1_weight <= 0 or self.l3_weight <= 0:
            raise ConfigError("running-cost weights must be positive")


@dataclass(frozen=True)
class HamiltonianSpec:
    """One of the supported Hamiltonian representations.

    kind is 'closed-form', 'tabulated' or 'mollified'.  Tabulated control
    callables must broadcast: l1(t, x, alpha) and l3(t, x, eta) receive t as
    a scalar or array, x with shape (..., dim), a single control point
    (alpha of shape (dim,), eta scalar), and return an array matching the
    broadcast of t and x.
    """

    kind: str
    dim: int = 1
    closed_form: ClosedFormCoefficients | None = None
    control_grid_u: np.ndarray | None = None
    control_grid_eta: np.ndarray | None = None
    lagrangian_l1: Callable | None = None
    lagrangian_l3: Callable | None = None
    base: "HamiltonianSpec | None" = None
    delta: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"hamiltonian dim must be 1 or 2, got {self.dim}")
        if self.kind == "closed-form":
            if self.closed_form is None:
                object.__setattr__(self, "closed_form", ClosedFormCoefficients())
        elif self.kind == "tabulated":
            if self.control_grid_u is None or self.control_grid_eta is None:
                raise ConfigError("tabulated spec needs both control grids")
            gu = np.atleast_2d(np.asarray(self.control_grid_u, dtype=float))
            ge = np.asarray(self.control_grid_eta, dtype=float).ravel()
            if gu.size == 0 or ge.size == 0:
                raise ConfigError("control grids must be nonempty")
            if gu.shape[1] != self.dim:
                raise ConfigError(
                    f"drift control grid has {gu.shape[1]} components, expected {self.dim}"
                )
            if ge.size > 1 and np.any(np.diff(ge) <= 0):
                raise ConfigError("diffusion control grid must be strictly increasing")
            gu.setflags(write=False)
            ge.setflags(write=False)
            object.__setattr__(self, "control_grid_u", gu)
            object.__setattr__(self, "control_grid_eta", ge)
            if self.lagrangian_l1 is None or self.lagrangian_l3 is None:
                raise ConfigError("tabulated spec needs both running-cost callables")
        elif self.kind == "mollified":
            if self.base is None or self.delta is None:
                raise ConfigError("mollified spec needs a base spec and a radius")
            if self.delta <= 0:
                raise ConfigError(f"mollification radius must be positive, got {self.delta}")
        else:
            raise ConfigError(f"unknown hamiltonian kind {self.kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """The full control problem: bounds, Hamiltonians, couplings, data."""

    bounds: ControlBounds
    hamiltonians: HamiltonianSpec
    coupling_f: KernelCoupling
    terminal: TerminalSpec
    m0: DensityInit
    horizon: float
    discount: float = 0.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.discount < 0:
            raise ConfigError(f"discount must be nonnegative, got {self.discount}")
        ham = self.hamiltonians
        if ham.kind == "tabulated":
            lo, hi = self.bounds.a_min, self.bounds.a_max
            ge = ham.control_grid_eta
            if np.any(ge < lo - 1e-12) or np.any(ge > hi + 1e-12):
                raise ConfigError(
                    f"diffusion control grid must lie in [{lo}, {hi}], got "
                    f"range [{ge.min()}, {ge.max()}]"
                )

    @property
    def dim(self) -> int:
        return self.hamiltonians.dim


@dataclass(frozen=True)
class HamiltonianEval:
    """Value, minimizing control, and envelope derivative at one point."""

    value: float
    argmin: float | np.ndarray
    derivative: float | np.ndarray


# --------------------------------------------------------------------------
# vectorized evaluation cores
# --------------------------------------------------------------------------


def _mollifier_terms(spec: HamiltonianSpec) -> tuple[np.ndarray, np.ndarray]:
    """Offsets (n, dim + 2) over (t, x_1..x_d, last-variable) and weights."""
    delta = spec.delta
    steps = np.arange(-4, 5) / 4.0
    w1 = np.clip(1.0 - steps**2, 0.0, None)
    n_axes = spec.dim + 2
    offs, wts = [], []
    for combo in itertools.product(range(9), repeat=n_axes):
        w = float(np.prod([w1[c] for c in combo]))
        if w == 0.0:
            continue
        offs.append([steps[c] * delta for c in combo])
        wts.append(w)
    offsets = np.asarray(offs)
    weights = np.asarray(wts)
    weights /= weights.sum()
    return offsets, weights


def _h1_terms(spec: HamiltonianSpec, bounds: ControlBounds, t, x, p):
    """(value, derivative, argmin) of H1, vectorized over nodes.

    p has shape (..., dim); value comes back with shape (...), derivative and
    argmin with shape (..., dim).
    """
    p = np.asarray(p, dtype=float)
    if spec.kind == "closed-form":
        cf = spec.closed_form
        alpha = np.clip(-p / (2.0 * cf.l1_weight), -cf.drift_ctrl_max, cf.drift_ctrl_max)
        value = np.sum(p * alpha + cf.l1_weight * alpha**2, axis=-1)
        return value, alpha, alpha
    if spec.kind == "tabulated":
        vals = np.stack(
            [
                np.sum(p * a, axis=-1) + np.asarray(spec.lagrangian_l1(t, x, a), dtype=float)
                for a in spec.control_grid_u
            ]
        )
        idx = np.argmin(vals, axis=0)
        value = np.take_along_axis(vals, idx[None], axis=0)[0]
        alpha = spec.control_grid_u[idx]
        return value, alpha, alpha
    # mollified: convex combination of shifted base evaluations
    offsets, weights = _mollifier_terms(spec)
    value = 0.0
    deriv = 0.0
    for off, w in zip(offsets, weights):
        ts = np.asarray(t, dtype=float) - off[0]
        xs = np.asarray(x, dtype=float) - off[1 : 1 + spec.dim]
        ps = p - off[-1]
        v, d, _ = _h1_terms(spec.base, bounds, ts, xs, ps)
        value = value + w * v
        deriv = deriv + w * d
    return value, deriv, deriv


def _h2_terms(spec: HamiltonianSpec, bounds: ControlBounds, t, x, q):
    """(value, derivative, argmin) of H2, vectorized over nodes; q shape (...)."""
    q = np.asarray(q, dtype=float)
    if spec.kind == "closed-form":
        cf = spec.closed_form
        eta = np.clip(cf.l3_vertex - q / (2.0 * cf.l3_weight), bounds.a_min, bounds.a_max)
        value = eta * q + cf.l3_weight * (eta - cf.l3_vertex) ** 2
        return value, eta, eta
    if spec.kind == "tabulated":
        vals = np.stack(
            [
                e * q + np.asarray(spec.lagrangian_l3(t, x, e), dtype=float)
                for e in spec.control_grid_eta
            ]
        )
        idx = np.argmin(vals, axis=0)
        value = np.take_along_axis(vals, idx[None], axis=0)[0]
        eta = spec.control_grid_eta[idx]
        return value, eta, eta
    offsets, weights = _mollifier_terms(spec)
    value = 0.0
    deriv = 0.0
    for off, w in zip(offsets, weights):
        ts = np.asarray(t, dtype=float) - off[0]
        xs = np.asarray(x, dtype=float) - off[1 : 1 + spec.dim]
        qs = q - off[-1]
        v, d, _ = _h2_terms(spec.base, bounds, ts, xs, qs)
        value = value + w * v
        deriv = deriv + w * d
    return value, deriv, deriv


def h1_terms(model: ModelSpec, t, x, p):
    return _h1_terms(model.hamiltonians, model.bounds, t, x, p)


def h2_terms(model: ModelSpec, t, x, q):
    return _h2_terms(model.hamiltonians, model.bounds, t, x, q)


def h1_value(model: ModelSpec, t, x, p) -> np.ndarray:
    return h1_terms(model, t, x, p)[0]


def h2_value(model: ModelSpec, t, x, q) -> np.ndarray:
    return h2_terms(model, t, x, q)[0]


# --------------------------------------------------------------------------
# scalar API
# --------------------------------------------------------------------------


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite input: {name}={value!r}")
    return arr


def eval_h1(model: ModelSpec, t: float, x, p) -> HamiltonianEval:
    """Evaluate the drift Hamiltonian at one point.

    x and p may be scalars in 1D or length-d sequences; returns the minimum
    value, the minimizing drift control, and the envelope derivative H1_p.
    """
    t = float(_check_finite("t", t))
    x = np.atleast_1d(_check_finite("x", x))
    p = np.atleast_1d(_check_finite("p", p))
    if p.shape != (model.dim,):
        raise ValueError(f"p must have {model.dim} components, got shape {p.shape}")
    value, deriv, arg = h1_terms(model, t, x, p)
    if model.dim == 1:
        return HamiltonianEval(float(value), float(arg[..., 0]), float(deriv[..., 0]))
    return HamiltonianEval(float(value), np.asarray(arg), np.asarray(deriv))


def eval_h2(model: ModelSpec, t: float, x, q: float) -> HamiltonianEval:
    """Evaluate the diffusion Hamiltonian at one point (q scalar)."""
    t = float(_check_finite("t", t))
    x = np.atleast_1d(_check_finite("x", x))
    q = float(_check_finite("q", q))
    value, deriv, arg = h2_terms(model, t, x, q)
    return HamiltonianEval(float(value), float(arg), float(deriv))


def mollify_hamiltonian(spec: HamiltonianSpec, delta: float) -> HamiltonianSpec:
    """Smooth a Hamiltonian spec by discrete convolution of radius delta.

    The reported argmin of a mollified spec is the averaged derivative: after
    smoothing there is no single minimizing control, but the average stays in
    the convex control set, so the ellipticity and drift bounds survive.
    """
    if delta <= 0:
        raise ConfigError(f"mollification radius must be positive, got {delta}")
    return HamiltonianSpec(kind="mollified", dim=spec.dim, base=spec, delta=delta)


def mollify_model(model: ModelSpec, delta: float) -> ModelSpec:
    return replace(model, hamiltonians=mollify_hamiltonian(model.hamiltonians, delta))


def l3_from_l2(l2: Callable) -> Callable:
    """Diffusion running cost in the eta variable from one in sigma.

    eta = sigma^2 / 2, so the cost reads l2(t, x, sqrt(2 * eta)); convexity
    plus monotone decrease of l2 in sigma makes the result convex in eta.
    """

    def l3(t, x, eta):
        return l2(t, x, np.sqrt(2.0 * np.asarray(eta, dtype=float)))

    return l3


# --------------------------------------------------------------------------
# reference models
# --------------------------------------------------------------------------


def model_a(
    coupling_gain_f: float = 0.5,
    coupling_gain_g: float = 0.1,
    kernel_eps: float = 0.1,
    horizon: float = 0.25,
    terminal_base: TerminalBase | None = None,
    m0: DensityInit | None = None,
    dim: int = 1,
    discount: float = 0.0,
) -> ModelSpec:
    """Reference closed-form configuration used throughout the test suite.

    Drift controls in [-1, 1]^d with cost |alpha|^2 / 2, diffusion levels in
    [1/2, 2] (lambda1 = 1, lambda2 = 2) with cost (eta - 1)^2, couplings by a
    positive-definite wrapped-Gaussian kernel.  Every hypothesis audited by
    `validate_hypotheses` holds with hand-checkable constants.
    """
    bounds = ControlBounds(lambda1=1.0, lambda2=2.0, drift_bound=1.0)
    ham = HamiltonianSpec(kind="closed-form", dim=dim, closed_form=ClosedFormCoefficients())
    base = terminal_base if terminal_base is not None else TerminalBase(kind="cosine", amplitude=1.0)
    init = m0 if m0 is not None else DensityInit(kind="gaussian", center=(0.5,) * dim, width=0.12)
    return ModelSpec(
        bounds=bounds,
        hamiltonians=ham,
        coupling_f=KernelCoupling(eps=kernel_eps, gain=coupling_gain_f),
        terminal=TerminalSpec(base=base, coupling=KernelCoupling(eps=kernel_eps, gain=coupling_gain_g)),
        m0=init,
        horizon=horizon,
        discount=discount,
    )


def single_control_model(
    nu: float = 1.0,
    horizon: float = 0.05,
    terminal_base: TerminalBase | None = None,
    m0: DensityInit | None = None,
    dim: int = 1,
) -> ModelSpec:
    """Degenerate model with a single diffusion level nu and zero drift.

    Both control grids are singletons with zero running cost, so
    H2(q) = nu * q and H1(p) = 0: the value function solves the backward
    heat equation, which is the package's main analytic oracle.
    """
    lam1 = min(1.0, np.sqrt(2.0 * nu) * 0.999)
    lam2 = max(2.0, np.sqrt(2.0 * nu) * 1.001)
    bounds = ControlBounds(lambda1=lam1, lambda2=lam2, drift_bound=0.0)
    ham = HamiltonianSpec(
        kind="tabulated",
        dim=dim,
        control_grid_u=np.zeros((1, dim)),
        control_grid_eta=np.array([nu]),
        lagrangian_l1=lambda t, x, a: np.zeros(np.broadcast(np.asarray(t), np.asarray(x)[..., 0]).shape),
        lagrangian_l3=lambda t, x, e: np.zeros(np.broadcast(np.asarray(t), np.asarray(x)[..., 0]).shape),
    )
    base = terminal_base if terminal_base is not None else TerminalBase(kind="cosine", amplitude=1.0)
    init = m0 if m0 is not None else DensityInit(kind="gaussian", center=(0.5,) * dim, width=0.1)
    return ModelSpec(
        bounds=bounds,
        hamiltonians=ham,
        coupling_f=KernelCoupling(eps=0.1, gain=0.0),
        terminal=TerminalSpec(base=base, coupling=KernelCoupling(eps=0.1, gain=0.0)),
        m0=init,
        horizon=horizon,
    )


# --------------------------------------------------------------------------
# structural-hypothesis audit
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisResult:
    name: str
    constant: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class HypothesisReport:
    results: tuple[HypothesisResult, ...]
    n_samples: int
    n_nonfinite: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def by_name(self, name: str) -> HypothesisResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def summary(self) -> str:
        parts = [
            f"{r.name}: C={r.constant:.4g} (bound {r.bound:.4g}) "
            f"{'ok' if r.passed else 'FAIL'}"
            for r in self.results
        ]
        tail = f"; {self.n_nonfinite} non-finite samples skipped" if self.n_nonfinite else ""
        return "; ".join(parts) + tail


def validate_hypotheses(model: ModelSpec, samples, declared_c: float = 10.0) -> HypothesisReport:
    """Audit the structural bounds on a list of (t, x, p, q) samples.

    Reported constants per named condition (worst case over finite samples):

        ellipticity      min H2_q                      (must reach a_min)
        value-at-zero    max |H1(.,.,0)| + |H2(.,.,0)|
        gradient-bound   max |H1_p|_inf + |H2_q|
        mixed-qx         max |d/dx H2_q|
        coercivity       max of -(H_last * arg - H) over both Hamiltonians
        mixed-envelope   max |d/dx (H_last * arg - H)|
        curvature-tx-h1  max (|H1_xx| + |H1_t|) / (1 + |p|)
        curvature-tx-h2  max (|H2_xx| + |H2_t|) / (1 + |q|)
        x-gradient       max (|H1_x| + |H2_x|) / (1 + |p|)

    Derivatives in t and x are centered finite differences with step
    1e-4 * (1 + |variable|); the last-variable derivatives come from the
    envelope relation.  Non-finite samples are counted and skipped.
    """
    rows = [
        (
            float(t),
            np.atleast_1d(np.asarray(x, dtype=float)),
            np.atleast_1d(np.asarray(p, dtype=float)),
            float(q),
        )
        for (t, x, p, q) in samples
    ]
    if not rows:
        raise ConfigError("hypothesis audit needs a nonempty sample list")
    finite = [
        r
        for r in rows
        if np.isfinite(r[0]) and np.all(np.isfinite(r[1])) and np.all(np.isfinite(r[2])) and np.isfinite(r[3])
    ]
    n_bad = len(rows) - len(finite)
    if not finite:
        raise ConfigError("hypothesis audit received only non-finite samples")

    t = np.array([r[0] for r in finite])
    x = np.stack([r[1] for r in finite])
    p = np.stack([r[2] for r in finite])
    q = np.array([r[3] for r in finite])
    d = model.dim
    if x.shape[1] != d or p.shape[1] != d:
        raise ConfigError(f"samples must carry {d}-component x and p")

    h1v, h1p, _ = h1_terms(model, t, x, p)
    h2v, h2q, _ = h2_terms(model, t, x, q)
    zeros_p = np.zeros_like(p)
    h1v0 = h1_value(model, t, x, zeros_p)
    h2v0 = h2_value(model, t, x, np.zeros_like(q))

    def dx_of(fn, k, step_scale):
        h = _FD_STEP * (1.0 + np.abs(x[:, k]))
        xp = x.copy()
        xm = x.copy()
        xp[:, k] = xp[:, k] + h
        xm[:, k] = xm[:, k] - h
        return (fn(xp) - fn(xm)) / (2.0 * h)

    def dxx_of(fn, k):
        h = _FD_STEP * (1.0 + np.abs(x[:, k]))
        xp = x.copy()
        xm = x.copy()
        xp[:, k] = xp[:, k] + h
        xm[:, k] = xm[:, k] - h
        return (fn(xp) + fn(xm) - 2.0 * fn(x)) / (h * h)

    def dt_of(fn):
        h = _FD_STEP * (1.0 + np.abs(t))
        return (fn(t + h) - fn(t - h)) / (2.0 * h)

    h1_at = lambda xx: h1_value(model, t, xx, p)
    h2_at = lambda xx: h2_value(model, t, xx, q)
    h2q_at = lambda xx: h2_terms(model, t, xx, q)[1]
    g1_at = lambda xx: np.sum(h1_terms(model, t, xx, p)[1] * p, axis=-1) - h1_value(model, t, xx, p)
    g2_at = lambda xx: h2_terms(model, t, xx, q)[1] * q - h2_value(model, t, xx, q)
    h1_t = lambda tt: h1_value(model, tt, x, p)
    h2_t = lambda tt: h2_value(model, tt, x, q)

    p_inf = np.max(np.abs(p), axis=1)
    ellipticity = float(np.min(h2q))
    value_zero = float(np.max(np.abs(h1v0) + np.abs(h2v0)))
    grad_bound = float(np.max(np.max(np.abs(h1p), axis=1) + np.abs(h2q)))
    mixed_qx = float(max(np.max(np.abs(dx_of(h2q_at, k, 1.0))) for k in range(d)))
    coercivity = float(
        max(
            np.max(-(np.sum(h1p * p, axis=-1) - h1v)),
            np.max(-(h2q * q - h2v)),
            0.0,
        )
    )
    mixed_env = float(
        max(
            max(np.max(np.abs(dx_of(g1_at, k, 1.0))) for k in range(d)),
            max(np.max(np.abs(dx_of(g2_at, k, 1.0))) for k in range(d)),
        )
    )
    curv_h1 = float(
        np.max(
            (
                np.max(np.stack([np.abs(dxx_of(h1_at, k)) for k in range(d)]), axis=0)
                + np.abs(dt_of(h1_t))
            )
            / (1.0 + p_inf)
        )
    )
    curv_h2 = float(
        np.max(
            (
                np.max(np.stack([np.abs(dxx_of(h2_at, k)) for k in range(d)]), axis=0)
                + np.abs(dt_of(h2_t))
            )
            / (1.0 + np.abs(q))
        )
    )
    x_grad = float(
        np.max(
            (
                np.max(np.stack([np.abs(dx_of(h1_at, k, 1.0)) for k in range(d)]), axis=0)
                + np.max(np.stack([np.abs(dx_of(h2_at, k, 1.0)) for k in range(d)]), axis=0)
            )
            / (1.0 + p_inf)
        )
    )

    nu = model.bounds.a_min
    results = (
        HypothesisResult("ellipticity", ellipticity, nu, ellipticity >= nu * (1.0 - 1e-6)),
        HypothesisResult("value-at-zero", value_zero, declared_c, value_zero <= declared_c),
        HypothesisResult("gradient-bound", grad_bound, declared_c, grad_bound <= declared_c),
        HypothesisResult("mixed-qx", mixed_qx, declared_c, mixed_qx <= declared_c),
        HypothesisResult("coercivity", coercivity, declared_c, coercivity <= declared_c),
        HypothesisResult("mixed-envelope", mixed_env, declared_c, mixed_env <= declared_c),
        HypothesisResult("curvature-tx-h1", curv_h1, declared_c, curv_h1 <= declared_c),
        HypothesisResult("curvature-tx-h2", curv_h2, declared_c, curv_h2 <= declared_c),
        HypothesisResult("x-gradient", x_grad, declared_c, x_grad <= declared_c),
    )
    return HypothesisReport(results=results, n_samples=len(rows), n_nonfinite=n_bad)
