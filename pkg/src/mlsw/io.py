"""Run configuration text, CSV time series and binary field snapshots."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import Grid, Params, StateU, derive_params
from .errors import ConfigError, MLSWError, SnapshotFormatError
from .harness import ExperimentConfig
from .solvers import FIELDS, InitialRecipe, Mode, SolverConfig

KINDS = ("simulate", "rigidlid", "acoustic", "eigen", "hyperbolicity",
         "converge-wp", "converge-ip")
SWEEP_KINDS = ("converge-wp", "converge-ip")
FORMATS = ("csv", "snapshot", "summary")

# key -> (parser name, default); None marks a required key
_KEYS = {
    "params.N": ("int", None),
    "params.d": ("int", None),
    "params.delta": ("floats", None),
    "params.r": ("floats", ()),
    "params.rho": ("floats", None),
    "grid.L": ("floats", None),
    "grid.n": ("ints", None),
    "solver.cfl": ("float", 0.5),
    "solver.t_end": ("float", 1.0),
    "solver.dealias": ("bool", True),
    "solver.stride": ("float", 0.1),
    "initial.h0": ("float", 0.1),
    "initial.nu": ("float", 1.0),
    "initial.mode": ("mode", None),
    "experiment.kind": ("str", "simulate"),
    "experiment.h0": ("float", 0.1),
    "experiment.nu": ("float", 1.0),
    "experiment.norm_s": ("float", 0.0),
    "experiment.workers": ("int", 1),
    "output.dir": ("str", "out"),
    "output.formats": ("strs", ("csv", "summary")),
}
_OPTIONAL_NO_DEFAULT = {"grid.L", "initial.mode"}


@dataclass
class RunConfig:
    N: int
    d: int
    delta: tuple
    r: tuple
    rhos: tuple
    L: tuple
    n: tuple
    solver: SolverConfig = field(default_factory=SolverConfig)
    recipe: InitialRecipe = field(default_factory=InitialRecipe)
    kind: str = "simulate"
    h0: float = 0.1
    nu: float = 1.0
    norm_s: float = 0.0
    workers: int = 1
    out_dir: str = "out"
    formats: tuple = ("csv", "summary")

    @property
    def rho(self) -> float:
        return self.rhos[0]

    def params(self, rho: Optional[float] = None) -> Params:
        return derive_params(self.N, self.d, self.delta, self.r,
                             self.rho if rho is None else rho)

    def grid(self) -> Grid:
        return Grid(self.d, self.L, self.n)

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(N=self.N, d=self.d, delta=self.delta, r=self.r,
                                rhos=self.rhos, L=self.L, n=self.n, solver=self.solver,
                                recipe=self.recipe, norm_s=self.norm_s,
                                workers=self.workers)


def _parse_value(kind: str, raw: str, lineno: int):
    items = [x.strip() for x in raw.split(",")] if raw.strip() else []
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw.strip()
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("true", "false"):
                raise ValueError(f"expected true or false, got {raw!r}")
            return low == "true"
        if kind == "floats":
            return tuple(float(x) for x in items)
        if kind == "ints":
            return tuple(int(x) for x in items)
        if kind == "strs":
            return tuple(items)
        if kind == "mode":
            if len(items) not in (5, 6):
                raise ValueError("mode needs field, layer, mx[, my], amplitude, phase")
            if items[0] not in FIELDS:
                raise ValueError(f"unknown field {items[0]!r}")
            m = tuple(int(x) for x in items[2:-2])
            return Mode(items[0], int(items[1]), m, float(items[-2]), float(items[-1]))
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {exc}") from None
    raise AssertionError(kind)


def parse_config(text: str, kind: Optional[str] = None) -> RunConfig:
    """Parse flat ``section.key = value`` text; ``kind`` overrides the file."""
    values, modes = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        val = _parse_value(_KEYS[key][0], raw, lineno)
        if key == "initial.mode":
            modes.append(val)
        elif key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        else:
            values[key] = val
    for key, (_, default) in _KEYS.items():
        if key not in values:
            if default is None and key not in _OPTIONAL_NO_DEFAULT:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default

    kind = kind or values["experiment.kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    rhos = values["params.rho"]
    if not rhos:
        raise ConfigError("params.rho needs at least one value")
    if kind not in SWEEP_KINDS and len(rhos) != 1:
        raise ConfigError(f"kind {kind!r} takes a single rho, got {len(rhos)}")
    d = values["params.d"]
    L = values["grid.L"] if values["grid.L"] is not None else (2 * math.pi,) * d
    formats = values["output.formats"]
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"unknown output format {f!r}")
    if values["experiment.workers"] < 1:
        raise ConfigError("experiment.workers must be >= 1")
    solver = SolverConfig(values["solver.cfl"], values["solver.t_end"],
                          values["solver.dealias"], values["solver.stride"])
    cfg = RunConfig(N=values["params.N"], d=d, delta=values["params.delta"],
                    r=values["params.r"], rhos=rhos, L=L, n=values["grid.n"],
                    solver=solver,
                    recipe=InitialRecipe(modes, values["initial.h0"], values["initial.nu"]),
                    kind=kind, h0=values["experiment.h0"], nu=values["experiment.nu"],
                    norm_s=values["experiment.norm_s"], workers=values["experiment.workers"],
                    out_dir=values["output.dir"], formats=formats)
    for rho in rhos:
        cfg.params(rho)
    cfg.grid()
    for md in modes:
        if len(md.m) != d:
            raise ConfigError(f"mode {md} needs {d} wavevector indices")
    return cfg


def _fmt(values) -> str:
    return ", ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def serialize(cfg: RunConfig) -> str:
    lines = [
        f"params.N = {cfg.N}",
        f"params.d = {cfg.d}",
        f"params.delta = {_fmt(cfg.delta)}",
        f"params.r = {_fmt(cfg.r)}",
        f"params.rho = {_fmt(cfg.rhos)}",
        f"grid.L = {_fmt(cfg.L)}",
        f"grid.n = {_fmt(cfg.n)}",
        f"solver.cfl = {cfg.solver.cfl_number!r}",
        f"solver.t_end = {cfg.solver.end_time!r}",
        f"solver.dealias = {str(cfg.solver.dealias).lower()}",
        f"solver.stride = {cfg.solver.stride!r}",
        f"initial.h0 = {cfg.recipe.h0!r}",
        f"initial.nu = {cfg.recipe.nu!r}",
    ]
    for m in cfg.recipe.modes:
        lines.append(f"initial.mode = {m.field}, {m.layer}, {_fmt(m.m)}, "
                     f"{float(m.amplitude)!r}, {float(m.phase)!r}")
    lines += [
        f"experiment.kind = {cfg.kind}",
        f"experiment.h0 = {cfg.h0!r}",
        f"experiment.nu = {cfg.nu!r}",
        f"experiment.norm_s = {cfg.norm_s!r}",
        f"experiment.workers = {cfg.workers}",
        f"output.dir = {cfg.out_dir}",
        f"output.formats = {_fmt(cfg.formats)}",
    ]
    return "\n".join(lines) + "\n"


CSV_HEADER = ("time", "energy", "hs_norm_u", "hs_norm_v", "min_depth", "max_shear",
              "rl_residual", "symm_energy", "min_gap", "flags")


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_timeseries(records: Iterable, path) -> None:
    """CSV with a fixed header; floats use the shortest round-trip form."""
    rows = [",".join(CSV_HEADER)]
    prev = -math.inf
    for rec in records:
        row = rec.as_row() if hasattr(rec, "as_row") else dict(rec)
        if not row["time"] > prev:
            raise ValueError("record times must be strictly increasing")
        prev = row["time"]
        rows.append(",".join(_cell(row[k]) for k in CSV_HEADER))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(rows) + "\n")
    except OSError as exc:
        raise MLSWError(f"cannot write time series to {path}: {exc}") from exc


MAGIC = b"MLSV1"
_HEADER = struct.Struct("<4I4d")


@dataclass
class Snapshot:
    N: int
    d: int
    n: tuple
    L: tuple
    rho: float
    t: float
    fields: np.ndarray

    def to_state(self, params: Params) -> StateU:
        if params.N != self.N or params.d != self.d:
            raise SnapshotFormatError("snapshot does not match the given parameters")
        return StateU.from_array(params, self.fields)


def write_snapshot(path, params: Params, grid: Grid, state, t: float) -> None:
    """Little-endian header followed by every field as row-major float64."""
    arr = state.to_array() if isinstance(state, StateU) else np.asarray(state, dtype=float)
    if arr.shape != (params.nvar,) + tuple(grid.n):
        raise ValueError(f"state shape {arr.shape} does not match the grid")
    nx = grid.n[0]
    ny = grid.n[1] if grid.d == 2 else 1
    Lx = grid.L[0]
    Ly = grid.L[1] if grid.d == 2 else 0.0
    head = MAGIC + _HEADER.pack(params.N, params.d, nx, ny, Lx, Ly, params.rho, float(t))
    try:
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    except OSError as exc:
        raise MLSWError(f"cannot write snapshot to {path}: {exc}") from exc


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {data[:len(MAGIC)]!r}")
    off = len(MAGIC)
    if len(data) < off + _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header")
    N, d, nx, ny, Lx, Ly, rho, t = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    if d not in (1, 2):
        raise SnapshotFormatError(f"{path}: bad dimension {d}")
    shape = (N * (1 + d), nx) if d == 1 else (N * (1 + d), nx, ny)
    count = int(np.prod(shape))
    if len(data) != off + 8 * count:
        raise SnapshotFormatError(f"{path}: expected {off + 8 * count} bytes, got {len(data)}")
    fields = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
    n = (nx,) if d == 1 else (nx, ny)
    L = (Lx,) if d == 1 else (Lx, Ly)
    return Snapshot(N=N, d=d, n=n, L=L, rho=rho, t=t, fields=fields)


def write_report_csv(report, path) -> None:
    """One row per rho member of a convergence report."""
    keys = list(report.per_variable)
    rows = [",".join(["rho", "error"] + keys + ["status"])]
    for i, rho in enumerate(report.rhos):
        cells = [repr(float(rho)), repr(float(report.errors[i]))]
        cells += [repr(float(report.per_variable[k][i])) for k in keys]
        cells.append(report.status[i].replace(",", ";"))
        rows.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
