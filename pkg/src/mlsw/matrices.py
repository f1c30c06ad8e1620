"""Quasilinear symbols, the rotation ``Q(xi)`` and the Friedrichs symmetrizer.

Every assembled symbol already carries the ``1/rho`` factor, so its
eigenvalues are wave speeds. Points live on the last axis and batches of
points are supported throughout.
"""
from __future__ import annotations

import numpy as np

from .changevar import _pointwise_depths, jacobian_F, jacobian_Finv, v_to_u
from .core import Params


def _velocity(params: Params, X: np.ndarray, c: int) -> np.ndarray:
    N = params.N
    return X[..., N * (1 + c):N * (2 + c)]


def _blocks(params: Params, U: np.ndarray, c: int):
    """Return ``M(u^c)``, ``H``, ``R``, ``D(u^c)`` for component ``c``."""
    N, rho = params.N, params.rho
    g = params.gamma
    h = _pointwise_depths(params, U)
    u = _velocity(params, U, c)
    batch = U.shape[:-1]

    du = np.concatenate([u[..., :1], u[..., 1:] - u[..., :-1]], axis=-1)
    upper = np.triu(np.ones((N, N)), 1)
    M = upper * du[..., None, :]
    idx = np.arange(N)
    M[..., idx, idx] = u
    M[..., 0, :] /= rho
    M[..., 0, 0] = u[..., 0]

    H = np.triu(np.ones((N, N))) * h[..., None, :]
    H[..., 0, :] /= rho

    R = np.tril(np.ones((N, N))) * params.r_tilde / g[:, None]
    R[:, 0] /= rho
    R = np.broadcast_to(R, batch + (N, N)).copy()

    D = np.zeros(batch + (N, N))
    D[..., idx, idx] = u
    return M, H, R, D


def assemble_Ax(params: Params, U) -> np.ndarray:
    """``(1/rho) A^x[U]``."""
    U = np.asarray(U, dtype=float)
    N, d = params.N, params.d
    M, H, R, D = _blocks(params, U, 0)
    A = np.zeros(U.shape[:-1] + (params.nvar,) * 2)
    z, x = slice(0, N), slice(N, 2 * N)
    A[..., z, z] = M
    A[..., z, x] = H
    A[..., x, z] = R
    A[..., x, x] = D
    if d == 2:
        y = slice(2 * N, 3 * N)
        A[..., y, y] = D
    return A


def assemble_Ay(params: Params, U) -> np.ndarray:
    """``(1/rho) A^y[U]``; two-dimensional systems only."""
    if params.d != 2:
        raise ValueError("assemble_Ay requires d = 2")
    U = np.asarray(U, dtype=float)
    N = params.N
    M, H, R, D = _blocks(params, U, 1)
    A = np.zeros(U.shape[:-1] + (params.nvar,) * 2)
    z, x, y = slice(0, N), slice(N, 2 * N), slice(2 * N, 3 * N)
    A[..., z, z] = M
    A[..., z, y] = H
    A[..., y, z] = R
    A[..., x, x] = D
    A[..., y, y] = D
    return A


def rotation_Q(N: int, d: int, xi) -> np.ndarray:
    """Orthogonal rotation of the velocity blocks along ``xi``; identity for d=1."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    norm = float(np.linalg.norm(xi))
    if norm == 0.0:
        raise ValueError("xi must be nonzero")
    if d == 1:
        return np.eye(2 * N)
    if xi.size != 2:
        raise ValueError("xi must have two components for d = 2")
    a, b = xi / norm
    I = np.eye(N)
    Q = np.zeros((3 * N, 3 * N))
    Q[:N, :N] = I
    Q[N:2 * N, N:2 * N] = a * I
    Q[N:2 * N, 2 * N:] = b * I
    Q[2 * N:, N:2 * N] = -b * I
    Q[2 * N:, 2 * N:] = a * I
    return Q


def symbol_A(params: Params, U, xi) -> np.ndarray:
    """``xi^x A^x + xi^y A^y`` (both scaled by ``1/rho``)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if not np.any(xi):
        raise ValueError("xi must be nonzero")
    out = xi[0] * assemble_Ax(params, U)
    if params.d == 2:
        out = out + xi[1] * assemble_Ay(params, U)
    return out


def symbol_A_rotated(params: Params, U, xi) -> np.ndarray:
    """Same symbol through the rotated form ``Q^T A^x[QU] Q |xi|``."""
    Q = rotation_Q(params.N, params.d, xi)
    QU = np.asarray(U, dtype=float) @ Q.T
    return Q.T @ assemble_Ax(params, QU) @ Q * np.linalg.norm(xi)


def assemble_Bx(params: Params, V) -> np.ndarray:
    """``(1/rho) B^x[V] = J^{F^-1}[F(V)] (1/rho) A^x[F(V)] J^F[V]``."""
    V = np.asarray(V, dtype=float)
    U = np.moveaxis(v_to_u(params, np.moveaxis(V, -1, 0)), 0, -1)
    return jacobian_Finv(params, U) @ assemble_Ax(params, U) @ jacobian_F(params, V)


def assemble_By(params: Params, V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    U = np.moveaxis(v_to_u(params, np.moveaxis(V, -1, 0)), 0, -1)
    return jacobian_Finv(params, U) @ assemble_Ay(params, U) @ jacobian_F(params, V)


def symbol_B(params: Params, V, xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if not np.any(xi):
        raise ValueError("xi must be nonzero")
    out = xi[0] * assemble_Bx(params, V)
    if params.d == 2:
        out = out + xi[1] * assemble_By(params, V)
    return out


def symbol_B_rotated(params: Params, V, xi) -> np.ndarray:
    Q = rotation_Q(params.N, params.d, xi)
    QV = np.asarray(V, dtype=float) @ Q.T
    return Q.T @ assemble_Bx(params, QV) @ Q * np.linalg.norm(xi)


def fast_projection(params: Params, direction: str = "x") -> np.ndarray:
    """Diagonal selector of the fast entries ``rho^-1 zeta_1`` and ``w``.

    ``direction='x'`` keeps ``w^x`` only; ``'all'`` keeps every ``w``
    component.
    """
    N, d = params.N, params.d
    diag = np.zeros(params.nvar)
    diag[0] = 1.0
    diag[2 * N - 1] = 1.0
    if direction == "all" and d == 2:
        diag[3 * N - 1] = 1.0
    elif direction not in ("x", "all"):
        raise ValueError("direction must be 'x' or 'all'")
    return np.diag(diag)


def shift_matrix(N: int) -> np.ndarray:
    """``Delta``: -1 on the diagonal, +1 on the superdiagonal."""
    return -np.eye(N) + np.eye(N, k=1)


def symmetrizer_Sx(params: Params, U, Kx=None) -> np.ndarray:
    """Friedrichs symmetrizer of ``(1/rho) A^x``; default ``K^x = -u_1^x``."""
    U = np.asarray(U, dtype=float)
    N, d = params.N, params.d
    h = _pointwise_depths(params, U)
    ux = _velocity(params, U, 0)
    if Kx is None:
        Kx = -ux[..., :1]
    else:
        Kx = np.asarray(Kx, dtype=float)[..., None]
    g = params.gamma
    Dl = shift_matrix(N) * params.e_rho
    L = -(g * (ux + Kx))[..., :, None] * Dl
    S = np.zeros(U.shape[:-1] + (params.nvar,) * 2)
    idx = np.arange(N)
    S[..., idx, idx] = params.r_tilde
    x = slice(N, 2 * N)
    S[..., x, :N] = L
    S[..., :N, x] = np.swapaxes(L, -1, -2)
    for c in range(d):
        k = N * (1 + c) + idx
        S[..., k, k] = g * h
    return S
