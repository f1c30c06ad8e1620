"""Energy, Sobolev norms and trajectory monitors."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .changevar import u_to_v
from .core import Grid, Params, StateU, StateV, layer_depths, max_shear
from .eigen import eigendecompose_Bx, symmetrizer_T
from .errors import HyperbolicityLoss, MLSWError
from .solvers import _as_array, rl_constraint_residual
from .spectral import spectral_ops


def energy(params: Params, grid: Grid, state) -> float:
    """``1/2 int g_1 s^2 + sum r_n zeta_n^2 + sum g_n h_n |u_n|^2``.

    ``s`` is the stored ``rho^-1 zeta_1``, so ``g_1 s^2`` equals
    ``(g_1/rho^2) zeta_1^2``.
    """
    U = _as_array(state)
    N, d = params.N, params.d
    h = layer_depths(params, U)
    dens = params.gamma[0] * U[0] ** 2
    if N > 1:
        dens = dens + np.tensordot(params.r, U[1:N] ** 2, axes=1)
    u2 = np.sum(U[N:].reshape((d, N) + U.shape[1:]) ** 2, axis=0)
    dens = dens + np.tensordot(params.gamma, h * u2, axes=1)
    return 0.5 * float(np.mean(dens)) * grid.area


def sobolev_norm(params: Params, grid: Grid, state, s: float = 0.0) -> float:
    """Composite ``H^s`` norm; works for U or V arrays alike.

    The first row already holds ``rho^-1 zeta_1``, so every row enters with
    unit weight.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    arr = _as_array(state)
    ops = spectral_ops(grid, False)
    F = ops.fft(arr)
    # rfft stores half the spectrum: double the interior of the last axis
    wgt = np.full(ops.spec_shape, 2.0)
    wgt[..., 0] = 1.0
    if grid.n[-1] % 2 == 0:
        wgt[..., -1] = 1.0
    mult = (1.0 + ops.ktrue2) ** s * wgt
    npts = float(np.prod(grid.n))
    total = np.sum(mult * np.abs(F) ** 2) / npts ** 2 * grid.area
    return float(np.sqrt(total))


def _points(arr: np.ndarray) -> np.ndarray:
    return np.moveaxis(arr.reshape(arr.shape[0], -1), 0, -1)


def symmetrizer_energy(params: Params, grid: Grid, base, W) -> float:
    """``int (T^x[V(x)] W(x), W(x)) dx`` with the pointwise symmetrizer."""
    Vb = _as_array(base)
    Wa = _as_array(W)
    if Vb.shape != Wa.shape:
        raise ValueError("base and W live on different grids")
    T = symmetrizer_T(params, _points(Vb))
    w = _points(Wa)
    dens = np.einsum("pi,pij,pj->p", w, T, w)
    return float(np.mean(dens)) * grid.area


@dataclass
class DiagnosticsRecord:
    time: float
    energy: float
    hs_norm_u: float
    hs_norm_v: float
    min_depth: float
    max_shear: float
    rl_residual: float
    symm_energy: float
    min_gap: float
    flags: str = "ok"

    def as_row(self) -> dict:
        return asdict(self)


def record(params: Params, grid: Grid, state, t: float, s: float = 1.0,
           eigen: bool = True) -> DiagnosticsRecord:
    """Assemble every monitor for one U state; failures become flags."""
    U = _as_array(state)
    flags = []
    h = layer_depths(params, U)
    hmin = float(h.min())
    if hmin <= 0:
        flags.append("depth")
    try:
        V = u_to_v(params, U)
        hs_v = sobolev_norm(params, grid, V, s)
    except MLSWError:
        V, hs_v = None, float("nan")
        flags.append("transform")
    symm, gap = float("nan"), float("nan")
    if eigen and V is not None:
        try:
            dec = eigendecompose_Bx(params, _points(V))
            gap = dec.min_gap
            T = symmetrizer_T(params, None, dec)
            w = _points(V)
            symm = float(np.mean(np.einsum("pi,pij,pj->p", w, T, w))) * grid.area
        except HyperbolicityLoss as exc:
            flags.append(type(exc).__name__)
    return DiagnosticsRecord(
        time=float(t), energy=energy(params, grid, U),
        hs_norm_u=sobolev_norm(params, grid, U, s), hs_norm_v=hs_v,
        min_depth=hmin, max_shear=max_shear(params, U),
        rl_residual=rl_constraint_residual(params, grid, U),
        symm_energy=symm, min_gap=gap, flags="|".join(flags) or "ok")
