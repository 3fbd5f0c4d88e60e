"""Strict YAML configuration for runnable experiments.

A run document has five sections: model, grid, mc, fixed_point and output.
Unknown keys are rejected by name, every component invariant is re-validated
at load time, and every default the loader fills in is echoed through the
run log, so two identical documents always describe identical runs.

The model section covers the closed-form quadratic record and declaratively
tabulated control grids with zero/quadratic running costs; Hamiltonians that
need arbitrary callables are constructed in code, not from documents.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .control import (
    ClosedFormCoefficients,
    ControlBounds,
    HamiltonianSpec,
    ModelSpec,
)
from .couplings import DensityInit, KernelCoupling, TerminalBase, TerminalSpec
from .errors import ConfigError, StabilityError
from .grid import GridSpec
from .sde import McConfig

log = logging.getLogger("mfgdiff")

_DEFAULTS = {
    "fixed_point.theta": 0.5,
    "fixed_point.tol": 1e-4,
    "fixed_point.max_iter": 50,
    "quadrature_order": 16,
    "mc.antithetic": False,
    "model.discount": 0.0,
    "grid.theta_lf": None,  # model drift bound
}


@dataclass(frozen=True)
class FixedPointConfig:
    theta: float = 0.5
    tol: float = 1e-4
    max_iter: int = 50

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise ConfigError(f"fixed_point.theta must lie in (0, 1], got {self.theta}")
        if self.tol <= 0:
            raise ConfigError(f"fixed_point.tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"fixed_point.max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    write_fields: bool = True


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    grid: GridSpec
    mc: McConfig
    fixed_point: FixedPointConfig
    output: OutputConfig
    quadrature_order: int = 16
    debug_hooks: tuple[str, ...] = ()


def _take(section: dict, name: str, keys: set[str], required: set[str] | None = None) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(section) - keys
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    missing = (required or set()) - set(section)
    if missing:
        raise ConfigError(f"missing required keys in {name!r}: {sorted(missing)}")
    return section


def _echo_default(name: str, value) -> None:
    log.info("config default applied: %s = %r", name, value)


def _parse_lagrangian(desc: dict, name: str, is_drift: bool):
    desc = _take(desc, name, {"kind", "weight", "vertex"})
    kind = desc.get("kind", "zero")
    if kind == "zero":
        if is_drift:
            return lambda t, x, a: np.zeros(np.broadcast(np.asarray(t), np.asarray(x)[..., 0]).shape)
        return lambda t, x, e: np.zeros(np.broadcast(np.asarray(t), np.asarray(x)[..., 0]).shape)
    if kind == "quadratic":
        w = float(desc.get("weight", 1.0))
        v = float(desc.get("vertex", 0.0))
        if is_drift:
            return lambda t, x, a: (
                w * float(np.sum((np.asarray(a, dtype=float) - v) ** 2))
                + np.zeros(np.broadcast(np.asarray(t), np.asarray(x)[..., 0]).shape)
            )
        return lambda t, x, e: (
            w * (np.asarray(e, dtype=float) - v) ** 2
            + np.zeros(np.broadcast(np.asarray(t), np.asarray(x)[..., 0]).shape)
        )
    raise ConfigError(f"unknown lagrangian kind {kind!r} in {name!r}")


def _parse_model(section: dict) -> ModelSpec:
    section = _take(
        section,
        "model",
        {"bounds", "hamiltonians", "coupling_f", "terminal", "m0", "horizon", "discount"},
        required={"bounds", "hamiltonians", "horizon"},
    )
    b = _take(section["bounds"], "model.bounds", {"lambda1", "lambda2", "drift_bound"},
              required={"lambda1", "lambda2"})
    bounds = ControlBounds(
        lambda1=float(b["lambda1"]),
        lambda2=float(b["lambda2"]),
        drift_bound=float(b.get("drift_bound", 1.0)),
    )
    h = section["hamiltonians"]
    _take(h, "model.hamiltonians",
          {"kind", "dim", "drift_ctrl_max", "l1_weight", "l3_vertex", "l3_weight",
           "control_grid_u", "control_grid_eta", "l1", "l3"},
          required={"kind"})
    dim = int(h.get("dim", 1))
    if h["kind"] == "closed-form":
        ham = HamiltonianSpec(
            kind="closed-form",
            dim=dim,
            closed_form=ClosedFormCoefficients(
                drift_ctrl_max=float(h.get("drift_ctrl_max", 1.0)),
                l1_weight=float(h.get("l1_weight", 0.5)),
                l3_vertex=float(h.get("l3_vertex", 1.0)),
                l3_weight=float(h.get("l3_weight", 1.0)),
            ),
        )
    elif h["kind"] == "tabulated":
        if "control_grid_u" not in h or "control_grid_eta" not in h:
            raise ConfigError("tabulated hamiltonians need control_grid_u and control_grid_eta")
        ham = HamiltonianSpec(
            kind="tabulated",
            dim=dim,
            control_grid_u=np.atleast_2d(np.asarray(h["control_grid_u"], dtype=float)),
            control_grid_eta=np.asarray(h["control_grid_eta"], dtype=float),
            lagrangian_l1=_parse_lagrangian(h.get("l1", {"kind": "zero"}), "model.hamiltonians.l1", True),
            lagrangian_l3=_parse_lagrangian(h.get("l3", {"kind": "zero"}), "model.hamiltonians.l3", False),
        )
    else:
        raise ConfigError(f"config hamiltonian kind must be closed-form or tabulated, got {h['kind']!r}")

    cf = section.get("coupling_f", {"eps": 0.1, "gain": 0.0})
    cf = _take(cf, "model.coupling_f", {"eps", "gain"})
    coupling_f = KernelCoupling(eps=float(cf.get("eps", 0.1)), gain=float(cf.get("gain", 0.0)))

    term = section.get("terminal", {})
    term = _take(term, "model.terminal", {"base", "coupling"})
    base_desc = _take(term.get("base", {"kind": "zero"}), "model.terminal.base",
                      {"kind", "value", "amplitude"})
    base = TerminalBase(
        kind=base_desc.get("kind", "zero"),
        value=float(base_desc.get("value", 0.0)),
        amplitude=float(base_desc.get("amplitude", 1.0)),
    )
    tc = _take(term.get("coupling", {"eps": 0.1, "gain": 0.0}), "model.terminal.coupling",
               {"eps", "gain"})
    terminal = TerminalSpec(
        base=base,
        coupling=KernelCoupling(eps=float(tc.get("eps", 0.1)), gain=float(tc.get("gain", 0.0))),
    )

    m0d = _take(section.get("m0", {"kind": "uniform"}), "model.m0", {"kind", "center", "width"})
    center = m0d.get("center", [0.5] * dim)
    if isinstance(center, (int, float)):
        center = [center]
    m0 = DensityInit(
        kind=m0d.get("kind", "uniform"),
        center=tuple(float(c) for c in center),
        width=float(m0d.get("width", 0.1)),
    )
    if "discount" not in section:
        _echo_default("model.discount", _DEFAULTS["model.discount"])
    return ModelSpec(
        bounds=bounds,
        hamiltonians=ham,
        coupling_f=coupling_f,
        terminal=terminal,
        m0=m0,
        horizon=float(section["horizon"]),
        discount=float(section.get("discount", 0.0)),
    )


def load_config(path) -> RunConfig:
    """Parse and fully validate a run document; defaults are echoed to the log."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    doc = _take(doc, "<root>", {"model", "grid", "mc", "fixed_point", "output",
                                "quadrature_order", "debug"},
                required={"model", "grid"})

    model = _parse_model(doc["model"])

    g = _take(doc["grid"], "grid", {"dim", "box_length", "nx", "nt", "theta_lf"},
              required={"nx", "nt"})
    theta = g.get("theta_lf")
    if theta is None:
        theta = model.bounds.drift_bound
        _echo_default("grid.theta_lf", theta)
    try:
        grid = GridSpec(
            dim=int(g.get("dim", model.dim)),
            box_length=float(g.get("box_length", 1.0)),
            nx=int(g["nx"]),
            nt=int(g["nt"]),
            horizon=model.horizon,
            a_max=model.bounds.a_max,
            theta_lf=float(theta),
        )
    except StabilityError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    if grid.dim != model.dim:
        raise ConfigError(f"grid.dim={grid.dim} does not match the model dimension {model.dim}")

    mc_sec = doc.get("mc", {})
    mc_sec = _take(mc_sec, "mc", {"num_paths", "dt_mc", "seed", "x0", "antithetic"})
    x0 = mc_sec.get("x0", [0.5 * grid.box_length] * grid.dim)
    if isinstance(x0, (int, float)):
        x0 = [x0]
    if "dt_mc" not in mc_sec:
        _echo_default("mc.dt_mc", grid.dt)
    if "antithetic" not in mc_sec:
        _echo_default("mc.antithetic", False)
    mc = McConfig(
        num_paths=int(mc_sec.get("num_paths", 10000)),
        dt_mc=float(mc_sec.get("dt_mc", grid.dt)),
        seed=int(mc_sec.get("seed", 0)),
        x0=tuple(float(c) for c in x0),
        antithetic=bool(mc_sec.get("antithetic", False)),
    )

    fp_sec = _take(doc.get("fixed_point", {}), "fixed_point", {"theta", "tol", "max_iter"})
    for key, default in (("theta", 0.5), ("tol", 1e-4), ("max_iter", 50)):
        if key not in fp_sec:
            _echo_default(f"fixed_point.{key}", default)
    fixed_point = FixedPointConfig(
        theta=float(fp_sec.get("theta", 0.5)),
        tol=float(fp_sec.get("tol", 1e-4)),
        max_iter=int(fp_sec.get("max_iter", 50)),
    )

    out_sec = _take(doc.get("output", {}), "output", {"directory", "write_fields"})
    output = OutputConfig(
        directory=str(out_sec.get("directory", "out")),
        write_fields=bool(out_sec.get("write_fields", True)),
    )

    if "quadrature_order" not in doc:
        _echo_default("quadrature_order", 16)
    order = int(doc.get("quadrature_order", 16))
    if order < 2:
        raise ConfigError(f"quadrature_order must be >= 2, got {order}")

    hooks = doc.get("debug", {})
    hooks = _take(hooks, "debug", {"inject_negative_density"})
    debug = tuple(k for k, v in hooks.items() if v)

    return RunConfig(
        model=model, grid=grid, mc=mc, fixed_point=fixed_point, output=output,
        quadrature_order=order, debug_hooks=debug,
    )
