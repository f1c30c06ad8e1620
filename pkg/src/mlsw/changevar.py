"""Change of variables between physical (U) and normal-form (V) unknowns.

Field transforms take arrays with the variable axis first, so a single
point is simply a 1-D array. The Jacobian builders take points with the
variable axis last, ``(..., nvar)``, and return ``(..., nvar, nvar)``
stacks; that is the layout numpy's batched linear algebra wants.
"""
from __future__ import annotations

import numpy as np

from .core import Params, StateU, StateV, layer_depths
from .errors import DepthLoss

DEPTH_TOL = 1e-10


def _positive_depths(params: Params, arr: np.ndarray) -> np.ndarray:
    h = layer_depths(params, arr)
    if np.any(~(h > DEPTH_TOL)):
        flat = h.reshape(params.N, -1)
        layer = int(np.argmin(flat.min(axis=1)))
        raise DepthLoss(f"layer {layer + 1} depth {flat[layer].min():.3e} is not positive",
                        layer=layer + 1, value=float(flat[layer].min()))
    return h


def _gamma(params: Params, ndim: int) -> np.ndarray:
    return params.gamma.reshape((-1,) + (1,) * ndim)


def u_to_v(params: Params, U):
    """Map ``U`` to ``V``: ``w = sum h_n u_n`` and ``v_i = g_i u_i - g_{i-1} u_{i-1}``."""
    if isinstance(U, StateU):
        return StateV.from_array(params, u_to_v(params, U.to_array()))
    U = np.asarray(U, dtype=float)
    N, d = params.N, params.d
    h = _positive_depths(params, U)
    g = _gamma(params, U.ndim - 1)
    V = np.empty_like(U)
    V[:N] = U[:N]
    for c in range(d):
        u = U[N * (1 + c):N * (2 + c)]
        gu = g * u
        base = N * (1 + c)
        V[base:base + N - 1] = gu[1:] - gu[:-1]
        V[base + N - 1] = np.sum(h * u, axis=0)
    return V


def _alpha_sums(params: Params, h: np.ndarray):
    """Prefix sums ``P_j = sum_{i<j} h_i/g_i`` for j = 1..N+1 and the total."""
    gh = h / _gamma(params, h.ndim - 1)
    P = np.concatenate([np.zeros((1,) + h.shape[1:]), np.cumsum(gh, axis=0)], axis=0)
    return P, P[-1]


def v_to_u(params: Params, V):
    """Inverse map; ``alpha_{n,j}`` is ``P_j`` for j <= n and ``P_j - S`` otherwise."""
    if isinstance(V, StateV):
        return StateU.from_array(params, v_to_u(params, V.to_array()))
    V = np.asarray(V, dtype=float)
    N, d = params.N, params.d
    # depths only involve the zeta entries, shared by U and V
    h = _positive_depths(params, V)
    P, S = _alpha_sums(params, h)
    g = _gamma(params, V.ndim - 1)
    U = np.empty_like(V)
    U[:N] = V[:N]
    for c in range(d):
        base = N * (1 + c)
        v = V[base:base + N - 1]   # v_2..v_N
        w = V[base + N - 1]
        Pv = P[1:N] * v            # P_j v_j, j = 2..N
        Qv = (S - P[1:N]) * v      # sum_{i>=j} h_i/g_i times v_j
        lower = np.concatenate([np.zeros((1,) + w.shape), np.cumsum(Pv, axis=0)], axis=0)
        upper = np.concatenate([np.cumsum(Qv[::-1], axis=0)[::-1], np.zeros((1,) + w.shape)], axis=0)
        U[base:base + N] = (w + lower - upper) / (g * S)
    return U


def _delta_h(params: Params, h: np.ndarray) -> np.ndarray:
    """Bidiagonal block with last row ``h``; ``h`` has shape ``(..., N)``."""
    N = params.N
    out = np.zeros(h.shape[:-1] + (N, N))
    idx = np.arange(N - 1)
    out[..., idx, idx] = -params.gamma[:-1]
    out[..., idx, idx + 1] = params.gamma[1:]
    out[..., N - 1, :] = h
    return out


def _c_block(params: Params, u: np.ndarray) -> np.ndarray:
    N = params.N
    out = np.zeros(u.shape[:-1] + (N, N))
    out[..., N - 1, 0] = params.rho * u[..., 0]
    out[..., N - 1, 1:] = u[..., 1:] - u[..., :-1]
    return out


def _pointwise_depths(params: Params, X: np.ndarray) -> np.ndarray:
    return np.moveaxis(_positive_depths(params, np.moveaxis(X, -1, 0)), 0, -1)


def jacobian_Finv(params: Params, U) -> np.ndarray:
    """Jacobian of ``U -> V`` at ``U`` (points on the last axis)."""
    U = np.asarray(U, dtype=float)
    N, d = params.N, params.d
    h = _pointwise_depths(params, U)
    n = params.nvar
    J = np.zeros(U.shape[:-1] + (n, n))
    J[..., np.arange(N), np.arange(N)] = 1.0
    Dh = _delta_h(params, h)
    for c in range(d):
        sl = slice(N * (1 + c), N * (2 + c))
        J[..., sl, :N] = _c_block(params, U[..., sl])
        J[..., sl, sl] = Dh
    return J


def delta_h_inverse(params: Params, h: np.ndarray) -> np.ndarray:
    """Closed-form inverse of the bidiagonal block, ``h`` of shape ``(..., N)``."""
    N = params.N
    gh = h / params.gamma
    P = np.concatenate([np.zeros(h.shape[:-1] + (1,)), np.cumsum(gh, axis=-1)], axis=-1)
    S = P[..., -1:]
    # alpha[n, j] for j = 2..N+1 (column j-2), alpha_{n,N+1} = 1
    n_idx = np.arange(N)[:, None]
    j_idx = np.arange(1, N + 1)[None, :]           # zero-based j for alpha_{n, j+1}
    Pj = P[..., None, 1:]                          # P_{j+1} along columns
    alpha = np.where(j_idx <= n_idx, Pj, Pj - S[..., None])
    alpha[..., :, N - 1] = 1.0
    return alpha / (params.gamma[:, None] * S[..., None])


def jacobian_F(params: Params, V) -> np.ndarray:
    """Jacobian of ``V -> U`` at ``V`` from the explicit block inverse."""
    V = np.asarray(V, dtype=float)
    N, d = params.N, params.d
    U = np.moveaxis(v_to_u(params, np.moveaxis(V, -1, 0)), 0, -1)
    h = _pointwise_depths(params, V)
    Dinv = delta_h_inverse(params, h)
    n = params.nvar
    J = np.zeros(V.shape[:-1] + (n, n))
    J[..., np.arange(N), np.arange(N)] = 1.0
    for c in range(d):
        sl = slice(N * (1 + c), N * (2 + c))
        J[..., sl, :N] = -Dinv @ _c_block(params, U[..., sl])
        J[..., sl, sl] = Dinv
    return J
