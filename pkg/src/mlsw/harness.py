"""Convergence experiments over a sweep of contrast parameters."""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .changevar import u_to_v
from .core import Grid, Params, derive_params
from .diagnostics import sobolev_norm
from .eigen import eigendecompose_Bx
from .errors import ComplexPairDetected, DegenerateGap, HyperbolicityLoss, NumericalFailure
from .solvers import (InitialRecipe, Mode, RigidLidState, SolverConfig,
                      acoustic_initialization, acoustic_norm_sq, acoustic_propagate,
                      build_initial_data, compose_Uapp, prepared_quantities,
                      rigid_lid_initialization, rl_pressure, run_free_surface,
                      run_rigid_lid, total_flux, wellprepare)
from .spectral import spectral_ops


@dataclass
class FitResult:
    slope: float
    intercept: float
    width: float
    used: List[float]
    exact: List[float]


def fit_rate(rhos: Sequence[float], errors: Sequence[float]) -> FitResult:
    """Least-squares slope of ``log error`` against ``log rho``.

    Zero errors are reported as exact and left out; the width is twice the
    standard error of the slope.
    """
    rhos = np.asarray(rhos, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if rhos.shape != errors.shape:
        raise ValueError("rhos and errors differ in length")
    if np.any(errors < 0) or np.any(~np.isfinite(errors)):
        raise ValueError("errors must be finite and non-negative")
    if np.any(rhos <= 0):
        raise ValueError("rho values must be positive")
    exact = errors == 0.0
    keep = ~exact
    if keep.sum() < 3:
        raise ValueError("need at least three positive errors to fit a rate")
    fit = linregress(np.log(rhos[keep]), np.log(errors[keep]))
    return FitResult(slope=float(fit.slope), intercept=float(fit.intercept),
                     width=float(2.0 * fit.stderr), used=list(rhos[keep]),
                     exact=list(rhos[exact]))


REFERENCE_MODES = (
    Mode("zeta1", 1, (1, 0), 0.5),
    Mode("zeta", 2, (1, 1), 0.1, 0.3),
    Mode("ux", 1, (0, 1), 0.2),
    Mode("uy", 2, (1, 0), 0.2, 1.0),
    Mode("ux", 2, (2, 1), 0.1),
    Mode("uy", 1, (1, 2), 0.1, 0.5),
)


def reference_recipe(scale: float = 1.0) -> InitialRecipe:
    """Two-layer, two-dimensional reference data; ``scale`` multiplies every amplitude."""
    return InitialRecipe([Mode(m.field, m.layer, m.m, m.amplitude * scale, m.phase)
                          for m in REFERENCE_MODES])


@dataclass
class ExperimentConfig:
    N: int = 2
    d: int = 2
    delta: tuple = (1.0, 1.0)
    r: tuple = (1.0,)
    rhos: tuple = (0.2, 0.1, 0.05, 0.025)
    L: tuple = (2 * math.pi, 2 * math.pi)
    n: tuple = (64, 64)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(0.5, 1.0, True, 0.1))
    recipe: InitialRecipe = field(default_factory=reference_recipe)
    norm_s: float = 0.0
    monitor: bool = True
    workers: int = 1

    def params(self, rho: float) -> Params:
        return derive_params(self.N, self.d, self.delta, self.r, rho)

    def grid(self) -> Grid:
        return Grid(self.d, self.L, self.n)

    def digest(self) -> str:
        modes = ";".join(f"{m.field},{m.layer},{m.m},{m.amplitude!r},{m.phase!r}"
                         for m in self.recipe.modes)
        text = (f"{self.N}|{self.d}|{self.delta}|{self.r}|{self.rhos}|{self.L}|{self.n}|"
                f"{self.solver}|{modes}|{self.recipe.h0}|{self.recipe.nu}|{self.norm_s}")
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class ConvergenceReport:
    kind: str
    rhos: List[float]
    errors: List[float]
    per_variable: Dict[str, List[float]]
    series: List[List[tuple]]
    status: List[str]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    width: Optional[float] = None
    exact: List[float] = field(default_factory=list)
    digest: str = ""
    stride: float = 0.0
    extra: Dict[str, list] = field(default_factory=dict)

    def decreasing(self) -> bool:
        e = [x for x in self.errors if np.isfinite(x)]
        return len(e) == len(self.errors) and all(b < a for a, b in zip(e, e[1:]))

    def summary(self) -> str:
        lines = [f"{self.kind} report (config {self.digest}, sample stride {self.stride:g})"]
        for rho, err, st in zip(self.rhos, self.errors, self.status):
            lines.append(f"  rho={rho:<8g} error={err:.6e}  {st}")
        if self.slope is not None:
            lines.append(f"  slope={self.slope:.4f} +- {self.width:.4f}")
        else:
            lines.append("  slope not reported (fewer than three usable members)")
        if self.exact:
            lines.append(f"  exact members: {self.exact}")
        return "\n".join(lines)


def _monitor(cfg: ExperimentConfig, params: Params):
    """Sample-time hook that aborts the member once eigenvalues turn complex."""
    if not cfg.monitor:
        return None

    def hook(t, U):
        V = u_to_v(params, U)
        try:
            eigendecompose_Bx(params, np.moveaxis(V.reshape(V.shape[0], -1), 0, -1))
        except DegenerateGap:
            pass  # near-coincident speeds are not a loss of hyperbolicity
        except ComplexPairDetected as exc:
            raise ComplexPairDetected(f"at t={t:g}: {exc}", exc.index, exc.shear, exc.imag)
    return hook


def _norm(cfg: ExperimentConfig, params, grid, arr) -> float:
    return sobolev_norm(params, grid, arr, cfg.norm_s)


def _wp_member(cfg: ExperimentConfig, rho: float) -> dict:
    params, grid = cfg.params(rho), cfg.grid()
    ops = spectral_ops(grid)
    N, d = params.N, params.d
    U0 = wellprepare(params, grid, build_initial_data(params, grid, cfg.recipe)).to_array()
    quantities = []
    mon = _monitor(cfg, params)

    def on_fs(t, U):
        quantities.append(prepared_quantities(params, grid, U))
        if mon:
            mon(t, U)
    fs = run_free_surface(params, grid, U0, cfg.solver, on_sample=on_fs)
    rl = run_rigid_lid(params, grid, rigid_lid_initialization(params, grid, U0), cfg.solver)
    series, ez, eu = [], [], []
    for (t, U), (_, R) in zip(fs, rl):
        w = ops.leray(total_flux(params, U)) / params.total_depth
        u = U[N:].reshape((d, N) + grid.n) - w[:, None]
        dz = U[1:N] - R[1:N]
        du = u - R[N:].reshape((d, N) + grid.n)
        ez.append(_norm(cfg, params, grid, dz) if N > 1 else 0.0)
        eu.append(_norm(cfg, params, grid, du))
        series.append((t, math.hypot(ez[-1], eu[-1])))
    return {"error": max(e for _, e in series), "series": series,
            "zeta": max(ez), "u": max(eu), "quantities": quantities}


def _ip_member(cfg: ExperimentConfig, rho: float) -> dict:
    params, grid = cfg.params(rho), cfg.grid()
    Uin = build_initial_data(params, grid, cfg.recipe).to_array()
    return decomposition_errors(params, grid, Uin, cfg.solver, _monitor(cfg, params), cfg.norm_s)


def decomposition_errors(params: Params, grid: Grid, Uin, solver: SolverConfig,
                         monitor=None, norm_s: float = 0.0) -> dict:
    """Compare a free-surface run against ``U^app`` at every sample time.

    ``fast`` is the relative error of the surface and irrotational flux
    against the acoustic solution, in the weighted acoustic norm.
    """
    ops = spectral_ops(grid)
    fs = run_free_surface(params, grid, Uin, solver, on_sample=monitor)
    rl = run_rigid_lid(params, grid, rigid_lid_initialization(params, grid, Uin), solver)
    ac0 = acoustic_initialization(params, grid, Uin)
    series, fast, e_fast, e_slow = [], [], [], []
    N = params.N
    for (t, U), (_, R) in zip(fs, rl):
        rls = RigidLidState.from_array(params, R)
        p = rl_pressure(params, grid, R)
        ac = acoustic_propagate(params, grid, ac0, t)
        diff = U - compose_Uapp(params, grid, rls, p, ac).to_array()
        err = sobolev_norm(params, grid, diff, norm_s)
        series.append((t, err))
        e_fast.append(sobolev_norm(params, grid, diff[:1], norm_s))
        e_slow.append(sobolev_norm(params, grid, diff[1:], norm_s))
        pw = ops.leray(total_flux(params, U))
        num = (ops.l2_sq(U[0] - ac.zeta1 / params.rho - params.rho * p)
               + ops.l2_sq(pw - ac.w) / params.total_depth)
        den = acoustic_norm_sq(params, grid, ac)
        fast.append(math.sqrt(num / den) if den > 0 else 0.0)
    return {"error": max(e for _, e in series), "series": series,
            "surface": max(e_fast), "interior": max(e_slow), "fast": max(fast)}


def _run_member(kind: str, cfg: ExperimentConfig, rho: float) -> dict:
    fn = _wp_member if kind == "converge-wp" else _ip_member
    try:
        out = fn(cfg, rho)
        out["status"] = "ok"
    except HyperbolicityLoss as exc:
        out = {"error": float("nan"), "series": [], "status": f"hyperbolicity loss: {exc}"}
    except NumericalFailure as exc:
        out = {"error": float("nan"), "series": [], "status": f"numerical failure: {exc}"}
    return out


def _sweep(kind: str, cfg: ExperimentConfig) -> ConvergenceReport:
    rhos = list(cfg.rhos)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_member, [kind] * len(rhos), [cfg] * len(rhos), rhos))
    else:
        results = [_run_member(kind, cfg, rho) for rho in rhos]
    errors = [r["error"] for r in results]
    keys = ("zeta", "u") if kind == "converge-wp" else ("surface", "interior")
    per_var = {k: [r.get(k, float("nan")) for r in results] for k in keys}
    report = ConvergenceReport(kind=kind, rhos=rhos, errors=errors, per_variable=per_var,
                               series=[r["series"] for r in results],
                               status=[r["status"] for r in results],
                               digest=cfg.digest(), stride=cfg.solver.stride)
    if kind == "converge-wp":
        report.extra["quantities"] = [r.get("quantities", []) for r in results]
    else:
        report.extra["fast"] = [r.get("fast", float("nan")) for r in results]
    usable = [(rho, e) for rho, e in zip(rhos, errors) if np.isfinite(e)]
    report.exact = [rho for rho, e in usable if e == 0.0]
    if sum(1 for _, e in usable if e > 0) >= 3:
        fit = fit_rate([x for x, _ in usable], [e for _, e in usable])
        report.slope, report.intercept, report.width = fit.slope, fit.intercept, fit.width
    return report


def run_wellprepared_sweep(cfg: ExperimentConfig) -> ConvergenceReport:
    """Well-prepared free-surface runs against the rigid-lid solution.

    The error compares ``(zeta_2..zeta_N, u_n - Pi w / delta)`` with the
    rigid-lid state, taking the sup over sample times.
    """
    return _sweep("converge-wp", cfg)


def run_illprepared_decomposition(cfg: ExperimentConfig) -> ConvergenceReport:
    """Unprepared runs against the slow plus fast superposition ``U^app``."""
    return _sweep("converge-ip", cfg)
