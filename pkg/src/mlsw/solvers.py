"""Time integration: free-surface, rigid-lid and acoustic systems.

Fields are arrays with the variable axis first, in the U (or V) ordering
of :mod:`mlsw.core`. A rigid-lid state reuses the U layout with the
first row identically zero, so depth and norm helpers apply unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .changevar import v_to_u
from .core import (Grid, Params, StateU, StateV, check_depth_condition,
                   check_shear_condition, layer_depths)
from .errors import ConfigError, DepthLoss, NumericalFailure
from .spectral import SpectralOps, spectral_ops

H_FLOOR = 1e-8
IRROT_TOL = 1e-10


@dataclass
class SolverConfig:
    """Integration settings; ``stride`` is the time between output samples."""

    cfl_number: float = 0.5
    end_time: float = 1.0
    dealias: bool = True
    stride: float = 0.1
    scheme: str = "rk4"

    def __post_init__(self):
        if not (0.0 < self.cfl_number <= 1.0):
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl_number}")
        if not self.end_time > 0 or not self.stride > 0:
            raise ConfigError("end_time and stride must be > 0")
        if self.scheme != "rk4":
            raise ConfigError("only the classical rk4 scheme is available")


def _as_array(state):
    if isinstance(state, (StateU, StateV)):
        return state.to_array()
    return np.asarray(state, dtype=float)


def _wrap(template, params, arr):
    if isinstance(template, StateU):
        return StateU.from_array(params, arr)
    if isinstance(template, StateV):
        return StateV.from_array(params, arr)
    return arr


def _checked_depths(params: Params, U: np.ndarray) -> np.ndarray:
    h = layer_depths(params, U)
    if not np.all(np.isfinite(U)):
        raise NumericalFailure("non-finite values in state")
    hmin = h.reshape(params.N, -1).min(axis=1)
    if np.any(hmin < H_FLOOR):
        layer = int(np.argmin(hmin))
        raise DepthLoss(f"layer {layer + 1} depth fell to {hmin[layer]:.3e}",
                        layer=layer + 1, value=float(hmin[layer]))
    return h


def _velocities(params: Params, U: np.ndarray) -> np.ndarray:
    N, d = params.N, params.d
    return U[N:].reshape((d, N) + U.shape[1:])


def _advection(ops: SpectralOps, u: np.ndarray) -> np.ndarray:
    """``(u_n . grad) u_n`` per layer; ``u`` is ``(d, N, *grid)``."""
    du = ops.ifft(ops.grad_hat(ops.fft(u)))  # (deriv, comp, N, *grid)
    return np.einsum("a...,ab...->b...", u, du)


def _mass_tendencies(params: Params, ops: SpectralOps, h, u):
    """Spectral ``-sum_{i>=n} div(h_i u_i)`` for every n."""
    div = ops.div_hat(ops.fft(h[None] * u))      # (N, k)
    return -np.cumsum(div[::-1], axis=0)[::-1]


def _interface_gradient_hat(params: Params, ops: SpectralOps, Uhat, boussinesq=False):
    """Spectral ``g_n^{-1} [g_1/rho grad s + sum_{i=2}^n r_i grad zeta_i]``.

    With ``boussinesq`` the surface term is dropped and every ``g_n`` is one.
    """
    N = params.N
    acc = np.zeros_like(Uhat[:N])
    if N > 1:
        acc[1:] = np.cumsum(params.r.reshape((-1,) + (1,) * (Uhat.ndim - 1)) * Uhat[1:N], axis=0)
    if boussinesq:
        return ops.grad_hat(acc)
    shape = (-1,) + (1,) * (Uhat.ndim - 1)
    coef = (params.gamma[0] / params.rho) / params.gamma.reshape(shape)
    tot = coef * Uhat[0][None] + acc / params.gamma.reshape(shape)
    return ops.grad_hat(tot)


def fs_rhs_u(params: Params, grid: Grid, state, ops: Optional[SpectralOps] = None):
    """Semi-discrete free-surface tendency in U variables."""
    U = _as_array(state)
    ops = ops or spectral_ops(grid)
    N, d = params.N, params.d
    h = _checked_depths(params, U)
    u = _velocities(params, U)
    mass = _mass_tendencies(params, ops, h, u)
    out_hat = np.empty((params.nvar,) + ops.spec_shape, dtype=complex)
    out_hat[0] = mass[0] / params.rho
    out_hat[1:N] = mass[1:]
    G = _interface_gradient_hat(params, ops, ops.fft(U[:N]))
    adv_hat = ops.fft(_advection(ops, u))
    out_hat[N:] = (-G - adv_hat).reshape((d * N,) + ops.spec_shape)
    out = ops.ifft(ops.filter_hat(out_hat))
    return _wrap(state, params, out)


def fs_rhs_v(params: Params, grid: Grid, state, ops: Optional[SpectralOps] = None):
    """Semi-discrete free-surface tendency in V variables.

    Velocities are reconstructed pointwise, so the nonlinear terms are only
    filtered, not exactly dealiased.
    """
    V = _as_array(state)
    ops = ops or spectral_ops(grid)
    N, d = params.N, params.d
    U = v_to_u(params, V)
    h = _checked_depths(params, U)
    u = _velocities(params, U)
    g = params.gamma.reshape((-1,) + (1,) * grid.d)
    mass = _mass_tendencies(params, ops, h, u)
    Uhat = ops.fft(U[:N])
    gz = ops.ifft(ops.grad_hat(Uhat))           # (d, N, *grid): grad s, grad zeta_i
    adv = _advection(ops, u)                     # (d, N, *grid)
    gh = h / g
    S = gh.sum(axis=0)
    tailS = np.cumsum(gh[::-1], axis=0)[::-1]    # sum_{j>=i} h_j/g_j
    momflux = ops.div_hat(ops.fft(h[None, None] * u[:, None] * u[None]))  # (comp, N)

    out = np.empty((params.nvar,) + ops.spec_shape, dtype=complex)
    out[0] = mass[0] / params.rho
    out[1:N] = mass[1:]
    r = params.r.reshape((-1,) + (1,) * grid.d)
    for c in range(d):
        base = N * (1 + c)
        gadv = g * adv[c]
        dv = -r * gz[c, 1:] - gadv[1:] + gadv[:-1]
        dw = -S * (params.gamma[0] / params.rho) * gz[c, 0]
        if N > 1:
            dw = dw - np.sum(tailS[1:] * r * gz[c, 1:], axis=0)
        out[base:base + N - 1] = ops.fft(dv)
        out[base + N - 1] = ops.fft(dw) - momflux[c].sum(axis=0)
    res = ops.ifft(ops.filter_hat(out))
    return _wrap(state, params, res)


def fast_speed_bound(params: Params, U: np.ndarray) -> np.ndarray:
    h = layer_depths(params, U)
    g = params.gamma.reshape((-1,) + (1,) * (U.ndim - 1))
    return np.sqrt(params.gamma[0] * np.sum(h / g, axis=0)) / params.rho


def cfl_dt(params: Params, grid: Grid, state, cfl: float = 0.5) -> float:
    """``cfl * dx / s_max`` with ``s_max = max(|u| + sqrt(g_1 sum h_j/g_j)/rho)``."""
    U = _as_array(state)
    u = _velocities(params, U)
    speed = np.sqrt(np.sum(u ** 2, axis=0)).max(axis=0)
    s_max = float(np.max(speed + fast_speed_bound(params, U)))
    return cfl * grid.dx_min / s_max


def rk4_step(rhs: Callable, state, dt: float):
    """One classical Runge-Kutta step; the input is never modified."""
    y = np.array(state, dtype=float, copy=True)
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(rhs: Callable, y0: np.ndarray, t_end: float, dt_fn: Callable,
              sample_times: Optional[Sequence[float]] = None,
              post_step: Optional[Callable] = None,
              on_sample: Optional[Callable] = None, t0: float = 0.0):
    """Advance to ``t_end``, landing exactly on every sample time.

    Returns the list of ``(t, y)`` samples, the initial state included.
    """
    times = sorted(set([t0] + list(sample_times or []) + [t_end]))
    times = [t for t in times if t0 <= t <= t_end]
    y = np.array(y0, dtype=float, copy=True)
    t = t0
    samples = [(t, y.copy())]
    if on_sample:
        on_sample(t, y)
    steps = 0
    for target in times[1:]:
        while t < target - 1e-14 * max(1.0, abs(target)):
            dt = min(dt_fn(y), target - t)
            y = rk4_step(rhs, y, dt)
            if post_step is not None:
                y = post_step(y)
            t = t + dt
            steps += 1
        t = target
        samples.append((t, y.copy()))
        if on_sample:
            on_sample(t, y)
    return samples


def run_free_surface(params: Params, grid: Grid, U0, cfg: SolverConfig,
                     form: str = "U", dt: Optional[float] = None,
                     on_sample: Optional[Callable] = None):
    """Integrate the free-surface system; returns ``(t, U)`` samples."""
    ops = spectral_ops(grid, cfg.dealias)
    U0 = _as_array(U0)
    sample_times = list(np.arange(1, int(round(cfg.end_time / cfg.stride)) + 1) * cfg.stride)
    if form == "U":
        rhs = lambda y: fs_rhs_u(params, grid, y, ops)
        y0 = U0
    elif form == "V":
        from .changevar import u_to_v
        rhs = lambda y: fs_rhs_v(params, grid, y, ops)
        y0 = u_to_v(params, U0)
    else:
        raise ValueError("form must be 'U' or 'V'")

    def dt_fn(y):
        if dt is not None:
            return dt
        return cfl_dt(params, grid, y if form == "U" else v_to_u(params, y), cfg.cfl_number)

    samples = integrate(rhs, y0, cfg.end_time, dt_fn, sample_times, on_sample=on_sample)
    if form == "V":
        samples = [(t, v_to_u(params, y)) for t, y in samples]
    return samples


# ---------------------------------------------------------------- acoustic

@dataclass
class AcousticState:
    """Barotropic fast mode: surface ``zeta_1`` and irrotational flux ``w``."""

    zeta1: np.ndarray
    w: np.ndarray


def acoustic_propagate(params: Params, grid: Grid, state: AcousticState, t: float) -> AcousticState:
    """Exact modewise solution of the linear acoustic system.

    In coordinates ``a = sqrt(delta)/rho zeta_1`` and the longitudinal flux
    ``w_L = khat . w`` each mode rotates with ``omega = sqrt(delta)|k|/rho``.
    """
    ops = spectral_ops(grid, False)
    w = np.asarray(state.w, dtype=float).reshape((grid.d,) + grid.n)
    z = np.asarray(state.zeta1, dtype=float)
    resid = ops.l2(w - ops.leray(w)) if grid.d == 2 else abs(float(np.mean(w)))
    if resid > IRROT_TOL * max(1.0, ops.l2(w)):
        raise ConfigError(f"acoustic flux is not irrotational (residual {resid:.3e})")
    delta = params.total_depth
    kmag = np.sqrt(ops.k2)
    nz = kmag > 0
    khat = np.zeros_like(ops.kd)
    khat[:, nz] = ops.kd[:, nz] / kmag[nz]
    omega = np.sqrt(delta) * kmag / params.rho
    c, s = np.cos(omega * t), np.sin(omega * t)

    a = np.sqrt(delta) / params.rho * ops.fft(z)
    W = ops.fft(w)
    wl = np.sum(khat * W, axis=0)
    a_t = a * c - 1j * wl * s
    wl_t = wl * c - 1j * a * s
    W_t = W + khat * (wl_t - wl)[None]
    a_t = np.where(nz, a_t, a)
    z_t = ops.ifft(a_t * params.rho / np.sqrt(delta))
    w_t = ops.ifft(W_t)
    return AcousticState(zeta1=z_t, w=w_t)


def acoustic_norm_sq(params: Params, grid: Grid, state: AcousticState) -> float:
    """``rho^-2 |zeta_1|^2 + |w|^2 / delta`` in L2."""
    ops = spectral_ops(grid, False)
    return (ops.l2_sq(state.zeta1) / params.rho ** 2
            + ops.l2_sq(state.w) / params.total_depth)


# ---------------------------------------------------------------- rigid lid

@dataclass
class RigidLidState:
    """Internal interfaces ``zeta_2..zeta_N`` and layer velocities ``(d, N, *grid)``."""

    zeta: np.ndarray
    u: np.ndarray
    p: Optional[np.ndarray] = field(default=None, repr=False)

    def to_array(self, params: Params) -> np.ndarray:
        N, d = params.N, params.d
        shape = self.u.shape[2:]
        return np.concatenate([np.zeros((1,) + shape), self.zeta,
                               self.u.reshape((d * N,) + shape)], axis=0)

    @classmethod
    def from_array(cls, params: Params, U) -> "RigidLidState":
        U = np.asarray(U, dtype=float)
        N, d = params.N, params.d
        return cls(zeta=U[1:N].copy(), u=U[N:].reshape((d, N) + U.shape[1:]).copy())


def _rl_array(params: Params, state) -> np.ndarray:
    if isinstance(state, RigidLidState):
        return state.to_array(params)
    U = np.array(state, dtype=float, copy=True)
    U[0] = 0.0
    return U


def _rl_forcing_hat(params: Params, ops: SpectralOps, U: np.ndarray):
    """Spectral layer forcings ``div(h u u) + h sum r grad zeta`` and interface gradients."""
    N = params.N
    h = _checked_depths(params, U)
    u = _velocities(params, U)
    Uhat = ops.fft(U[:N])
    gz_hat = _interface_gradient_hat(params, ops, Uhat, boussinesq=True)  # (d, N, k)
    gz = ops.ifft(gz_hat)
    momflux = ops.div_hat(ops.fft(h[None, None] * u[:, None] * u[None]))  # (comp, N, k)
    forcing = momflux + ops.fft(h[None] * gz)
    return h, u, gz_hat, forcing


def rl_pressure(params: Params, grid: Grid, state, ops: Optional[SpectralOps] = None,
                return_residual: bool = False):
    """Mean-free pressure from ``delta Lap p + sum_n div F_n = 0``."""
    ops = ops or spectral_ops(grid)
    U = _rl_array(params, state)
    _, _, _, forcing = _rl_forcing_hat(params, ops, U)
    R = ops.filter_hat(ops.div_hat(forcing.sum(axis=1)))
    p_hat = R * ops.inv_k2 / params.total_depth
    p = ops.ifft(p_hat)
    if return_residual:
        resid = ops.ifft(-params.total_depth * ops.k2 * p_hat + R)
        return p, float(np.sqrt(np.mean(resid ** 2)))
    return p


def rl_rhs(params: Params, grid: Grid, state, ops: Optional[SpectralOps] = None):
    """Rigid-lid tendency; the first (surface) row is identically zero."""
    ops = ops or spectral_ops(grid)
    U = _rl_array(params, state)
    N, d = params.N, params.d
    h, u, gz_hat, forcing = _rl_forcing_hat(params, ops, U)
    R = ops.filter_hat(ops.div_hat(forcing.sum(axis=1)))
    p_hat = R * ops.inv_k2 / params.total_depth
    mass = _mass_tendencies(params, ops, h, u)
    out = np.zeros((params.nvar,) + ops.spec_shape, dtype=complex)
    out[1:N] = mass[1:]
    adv_hat = ops.fft(_advection(ops, u))
    gp = ops.grad_hat(p_hat)  # (d, k)
    du = -gp[:, None] - gz_hat - adv_hat
    out[N:] = du.reshape((d * N,) + ops.spec_shape)
    res = ops.ifft(ops.filter_hat(out))
    if isinstance(state, RigidLidState):
        return RigidLidState.from_array(params, res)
    return res


def rl_project(params: Params, grid: Grid, U: np.ndarray) -> np.ndarray:
    """Remove the irrotational total flux: ``u_n <- u_n - Pi w / delta``.

    The layer flux correction is ``h_n Pi w / delta``, proportional to
    ``h_n / sum h``, which leaves the shear velocities untouched.
    """
    ops = spectral_ops(grid)
    U = _rl_array(params, U)
    N, d = params.N, params.d
    h = layer_depths(params, U)
    u = _velocities(params, U)
    corr = ops.leray(np.sum(h[None] * u, axis=1)) / params.total_depth
    u = u - corr[:, None]
    U[N:] = u.reshape((d * N,) + U.shape[1:])
    return U


def rl_constraint_residual(params: Params, grid: Grid, U) -> float:
    """L2 norm of ``div(sum h_n u_n)``."""
    ops = spectral_ops(grid)
    U = _as_array(U)
    h = layer_depths(params, U)
    w = np.sum(h[None] * _velocities(params, U), axis=1)
    return ops.l2(ops.div(w))


def rl_speed_bound(params: Params, U: np.ndarray) -> float:
    u = _velocities(params, U)
    return float(np.sqrt(np.sum(u ** 2, axis=0)).max() + np.sqrt(params.total_depth))


def run_rigid_lid(params: Params, grid: Grid, state, cfg: SolverConfig,
                  dt: Optional[float] = None, on_sample: Optional[Callable] = None):
    """Integrate the rigid-lid system with the post-step flux re-projection."""
    ops = spectral_ops(grid, cfg.dealias)
    U0 = rl_project(params, grid, _rl_array(params, state))
    sample_times = list(np.arange(1, int(round(cfg.end_time / cfg.stride)) + 1) * cfg.stride)
    rhs = lambda y: rl_rhs(params, grid, y, ops)
    post = lambda y: rl_project(params, grid, y)
    dt_fn = (lambda y: dt) if dt is not None else \
        (lambda y: cfg.cfl_number * grid.dx_min / rl_speed_bound(params, y))
    return integrate(rhs, U0, cfg.end_time, dt_fn, sample_times, post_step=post,
                     on_sample=on_sample)


# ---------------------------------------------------------------- initial data

FIELDS = ("zeta1", "zeta", "ux", "uy")


@dataclass
class Mode:
    """One Fourier mode ``amplitude * cos(k.x + phase)`` added to a field.

    ``layer`` is 1-based (interfaces 2..N for ``zeta``); the ``zeta1``
    amplitude applies to the stored ``rho^-1 zeta_1``.
    """

    field: str
    layer: int
    m: tuple
    amplitude: float
    phase: float = 0.0


@dataclass
class InitialRecipe:
    modes: List[Mode] = field(default_factory=list)
    h0: float = 0.1
    nu: float = 1.0


def build_initial_data(params: Params, grid: Grid, recipe: InitialRecipe,
                       validate: bool = True) -> StateU:
    """Superpose the recipe modes and check the depth and shear margins."""
    N, d = params.N, params.d
    if grid.d != d:
        raise ConfigError("grid and parameter dimensions differ")
    U = np.zeros((params.nvar,) + grid.n)
    X = grid.coordinates()
    for md in recipe.modes:
        if md.field not in FIELDS:
            raise ConfigError(f"unknown field {md.field!r}")
        m = tuple(int(x) for x in md.m)
        if len(m) != d:
            raise ConfigError(f"mode {m} needs {d} integer indices")
        for mi, ni in zip(m, grid.n):
            if abs(mi) >= ni / 3.0:
                raise ConfigError(f"mode index {mi} is outside the dealiased band")
        phase = sum(2 * np.pi * mi * x / Li for mi, x, Li in zip(m, X, grid.L)) + md.phase
        wave = md.amplitude * np.cos(phase)
        if md.field == "zeta1":
            row = 0
        elif md.field == "zeta":
            if not 2 <= md.layer <= N:
                raise ConfigError(f"interface index {md.layer} outside 2..{N}")
            row = md.layer - 1
        else:
            if not 1 <= md.layer <= N:
                raise ConfigError(f"layer index {md.layer} outside 1..{N}")
            if md.field == "uy" and d == 1:
                raise ConfigError("uy modes need d = 2")
            row = N * (1 if md.field == "ux" else 2) + md.layer - 1
        U[row] += wave
    state = StateU.from_array(params, U)
    if not validate:
        return state
    ok, mins = check_depth_condition(params, state, recipe.h0)
    if not ok:
        raise ConfigError(f"initial data violates the depth condition: minima {mins}")
    ok, shear = check_shear_condition(params, state, recipe.nu)
    if not ok:
        raise ConfigError(f"initial data violates the shear condition: {shear:.4g}")
    return state


def total_flux(params: Params, U: np.ndarray) -> np.ndarray:
    h = layer_depths(params, U)
    return np.sum(h[None] * _velocities(params, U), axis=1)


def _remove_irrotational_flux(params: Params, grid: Grid, U: np.ndarray) -> np.ndarray:
    ops = spectral_ops(grid)
    N, d = params.N, params.d
    corr = ops.leray(total_flux(params, U)) / params.total_depth
    U = U.copy()
    U[N:] = (_velocities(params, U) - corr[:, None]).reshape((d * N,) + U.shape[1:])
    return U


def wellprepare(params: Params, grid: Grid, state) -> StateU:
    """Shrink the surface by ``rho`` and strip the irrotational total flux.

    The flux correction runs twice: after one pass the residual is only
    ``O(rho zeta_1)`` because the free-surface depths do not sum to
    ``delta`` exactly.
    """
    U = _as_array(state).copy()
    U[0] *= params.rho
    U = _remove_irrotational_flux(params, grid, U)
    U = _remove_irrotational_flux(params, grid, U)
    return StateU.from_array(params, U)


def prepared_quantities(params: Params, grid: Grid, state):
    """``rho^-1 |grad(rho^-1 zeta_1)|`` and ``rho^-1 |div w|`` in L2."""
    ops = spectral_ops(grid)
    U = _as_array(state)
    q1 = ops.l2(ops.grad(U[0])) / params.rho
    q2 = ops.l2(ops.div(total_flux(params, U))) / params.rho
    return q1, q2


def rigid_lid_initialization(params: Params, grid: Grid, state) -> RigidLidState:
    """``zeta^RL = zeta^in`` and ``u^RL = u^in - Pi w^in / delta``."""
    U = _as_array(state)
    N, d = params.N, params.d
    ops = spectral_ops(grid)
    corr = ops.leray(total_flux(params, U)) / params.total_depth
    u = _velocities(params, U) - corr[:, None]
    return RigidLidState(zeta=U[1:N].copy(), u=u)


def acoustic_initialization(params: Params, grid: Grid, state) -> AcousticState:
    """``(zeta_1^in, Pi w^in)``."""
    U = _as_array(state)
    ops = spectral_ops(grid)
    return AcousticState(zeta1=params.rho * U[0], w=ops.leray(total_flux(params, U)))


def compose_Uapp(params: Params, grid: Grid, rl: RigidLidState, p: np.ndarray,
                 ac: AcousticState) -> StateU:
    """``(rho^-1 zeta_1^ac + rho p, zeta^RL, u^RL + Pi w^ac / delta)``."""
    N, d = params.N, params.d
    if tuple(rl.u.shape[2:]) != tuple(grid.n) or tuple(np.shape(ac.zeta1)) != tuple(grid.n):
        raise ValueError("rigid-lid, acoustic and grid shapes differ")
    ops = spectral_ops(grid)
    w = np.asarray(ac.w).reshape((d,) + grid.n)
    u = rl.u + ops.leray(w)[:, None] / params.total_depth
    U = np.concatenate([(ac.zeta1 / params.rho + params.rho * p)[None], rl.zeta,
                        u.reshape((d * N,) + grid.n)], axis=0)
    return StateU.from_array(params, U)
