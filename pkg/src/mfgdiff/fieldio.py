"""Deterministic CSV serialization of fields with a checksummed manifest.

A field directory holds one CSV per time level (node coordinates followed by
the value, 17 significant digits so float64 round-trips bit-exactly) and a
manifest listing the grid metadata, a sha256 per level file, and a combined
checksum over the per-file digests.  No timestamps are recorded: identical
data produces identical bytes.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError
from .fp import DensityPath
from .grid import GridSpec, TimeField

_FMT = "%.17g"


def _level_name(n: int) -> str:
    return f"level_{n:06d}.csv"


def _level_bytes(grid: GridSpec, slice_values: np.ndarray) -> bytes:
    coords = grid.coords().reshape(-1, grid.dim)
    flat = slice_values.reshape(-1)
    cols = [coords[:, k] for k in range(grid.dim)] + [flat]
    header = ",".join(["x", "y"][: grid.dim] + ["value"])
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(_FMT % v for v in row))
    return ("\n".join(lines) + "\n").encode()


def write_field(field: TimeField | DensityPath, path) -> str:
    """Write all levels plus a manifest; returns the combined checksum."""
    is_density = isinstance(field, DensityPath)
    grid = field.grid
    values = field.values
    if not np.all(np.isfinite(values)):
        raise ContractError("refusing to write non-finite values")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    digests = []
    for n in range(grid.nt + 1):
        blob = _level_bytes(grid, values[n])
        (out / _level_name(n)).write_bytes(blob)
        digests.append(hashlib.sha256(blob).hexdigest())
    combined = hashlib.sha256("".join(digests).encode()).hexdigest()
    meta = [
        f"kind={'density' if is_density else 'timefield'}",
        f"dim={grid.dim}",
        f"box_length={_FMT % grid.box_length}",
        f"nx={grid.nx}",
        f"nt={grid.nt}",
        f"horizon={_FMT % grid.horizon}",
        f"a_max={_FMT % grid.a_max}",
        f"theta_lf={_FMT % grid.theta_lf}",
    ]
    meta += [f"file {_level_name(n)} sha256={d}" for n, d in enumerate(digests)]
    meta.append(f"checksum={combined}")
    (out / "manifest.txt").write_text("\n".join(meta) + "\n")
    return combined


def read_manifest(path) -> dict:
    man = Path(path) / "manifest.txt"
    if not man.is_file():
        raise ConfigError(f"no manifest at {man}")
    meta = {}
    for line in man.read_text().splitlines():
        if line.startswith("file "):
            continue
        key, _, val = line.partition("=")
        meta[key] = val
    return meta


def read_field(path) -> TimeField | DensityPath:
    """Reconstruct a field from a directory written by `write_field`."""
    meta = read_manifest(path)
    grid = GridSpec(
        dim=int(meta["dim"]),
        box_length=float(meta["box_length"]),
        nx=int(meta["nx"]),
        nt=int(meta["nt"]),
        horizon=float(meta["horizon"]),
        a_max=float(meta["a_max"]),
        theta_lf=float(meta["theta_lf"]),
    )
    values = np.empty((grid.nt + 1, *grid.shape))
    for n in range(grid.nt + 1):
        fname = Path(path) / _level_name(n)
        if not fname.is_file():
            raise ConfigError(f"missing level file {fname}")
        data = np.loadtxt(fname, delimiter=",", skiprows=1, ndmin=2)
        values[n] = data[:, grid.dim].reshape(grid.shape)
    if meta["kind"] == "density":
        return DensityPath.from_values(grid, values)
    return TimeField(grid, values)


def write_table(path, header: list[str], rows) -> None:
    """Small CSV table writer for reports; all numbers must be finite."""
    lines = [",".join(header)]
    for row in rows:
        for v in row:
            if isinstance(v, float) and not np.isfinite(v):
                raise ContractError(f"refusing to write non-finite table entry in {path}")
        lines.append(",".join(_FMT % v if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
