"""Eigenstructure of ``(1/rho) B^x``: speeds, rank-one projections and ``T^x``.

The symbol is block lower-triangular once the ``y`` velocities are put
last: the leading ``2N`` block carries the gravity waves and the trailing
``N`` block the advected (trivial) modes with speeds ``u_n^x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .changevar import _pointwise_depths, jacobian_F, jacobian_Finv, u_to_v, v_to_u
from .core import Params, StateU, StateV, layer_depths, max_shear
from .errors import ComplexPairDetected, DegenerateGap, MLSWError
from .matrices import assemble_Bx

REAL_TOL = 1e-8
GAP_TOL = 1e-10


@dataclass
class EigenDecomp:
    """Speeds and projections at one point or a batch of points.

    ``mu_plus`` is ordered ``mu_1 > ... > mu_N`` and ``mu_minus`` is
    ``mu_-1 < ... < mu_-N``; projections stack along the mode axis, just
    before the two matrix axes.
    """

    mu_plus: np.ndarray
    mu_minus: np.ndarray
    P_plus: np.ndarray
    P_minus: np.ndarray
    mu_trivial: Optional[np.ndarray] = None
    P_trivial: Optional[np.ndarray] = None
    is_real: bool = True
    min_gap: float = np.inf

    def eigenvalues(self) -> np.ndarray:
        parts = [self.mu_minus, self.mu_plus[..., ::-1]]
        if self.mu_trivial is not None:
            parts.append(self.mu_trivial)
        return np.concatenate(parts, axis=-1)

    def projections(self) -> np.ndarray:
        parts = [self.P_minus, self.P_plus[..., ::-1, :, :]]
        if self.P_trivial is not None:
            parts.append(self.P_trivial)
        return np.concatenate(parts, axis=-3)


@dataclass
class TridiagSymbol:
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    def dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.offdiagonal, 1)
                + np.diag(self.offdiagonal, -1))


def _require_2d(params: Params, what: str):
    if params.d != 2:
        raise ValueError(f"{what} requires d = 2 (no advected modes when d = 1)")


def trivial_eigenpairs(params: Params, V):
    """Advected eigenvalues ``u_n^x`` and their projections ``J^{F^-1} Pi J^F``."""
    _require_2d(params, "trivial_eigenpairs")
    V = np.asarray(V, dtype=float)
    N = params.N
    U = np.moveaxis(v_to_u(params, np.moveaxis(V, -1, 0)), 0, -1)
    JFi = jacobian_Finv(params, U)
    JF = jacobian_F(params, V)
    mu = U[..., N:2 * N].copy()
    # J^{F^-1} e_k e_k^T J^F is the outer product of a column and a row
    cols = JFi[..., :, 2 * N:]
    rows = JF[..., 2 * N:, :]
    P = np.einsum("...in,...nj->...nij", cols, rows)
    return mu, P


def tridiag_symbol(params: Params, Z) -> TridiagSymbol:
    """Symmetric tridiagonal matrix whose eigenvalues are ``mu^-2`` at rest.

    Built from the factorization ``D(s) Delta^T D(g/h) Delta D(s)`` with
    ``s = e_rho r_tilde^{-1/2}``. That product has negative off-diagonals;
    conjugating by ``diag((-1)^i)`` makes them positive without changing
    the spectrum.
    """
    Z = np.asarray(Z, dtype=float)
    N = params.N
    if np.any(Z[N:] != 0.0):
        raise ValueError("tridiag_symbol needs a point with zero velocities")
    h = _pointwise_depths(params, Z)
    gh = params.gamma / h
    s = params.e_rho / np.sqrt(params.r_tilde)
    gprev = np.concatenate([[0.0], gh[:-1]])
    diag = (gh + gprev) * s ** 2
    off = gh[:-1] * s[:-1] * s[1:]
    return TridiagSymbol(diagonal=diag, offdiagonal=off)


def rest_wave_speeds(params: Params, Z) -> np.ndarray:
    """The ``2N`` speeds ``+-lambda_n^{-1/2}`` sorted ascending."""
    T = tridiag_symbol(params, Z)
    if params.N == 1:
        lam = T.diagonal.copy()
    else:
        lam = eigh_tridiagonal(T.diagonal, T.offdiagonal, eigvals_only=True)
    if np.any(lam <= 0):
        raise MLSWError("tridiagonal symbol is not positive definite")
    speeds = 1.0 / np.sqrt(lam)
    return np.sort(np.concatenate([-speeds, speeds]))


def _normalize_columns(X: np.ndarray) -> np.ndarray:
    """Unit columns with the first non-negligible entry positive."""
    X = X / np.linalg.norm(X, axis=-2, keepdims=True)
    first = np.argmax(np.abs(X) > 1e-14 * np.abs(X).max(axis=-2, keepdims=True), axis=-2)
    lead = np.take_along_axis(X, first[..., None, :], axis=-2)
    return X * np.where(lead < 0, -1.0, 1.0)


def _point_index(batch_shape, flat):
    return tuple(int(i) for i in np.unravel_index(flat, batch_shape)) if batch_shape else ()


def eigendecompose_Bx(params: Params, V) -> EigenDecomp:
    """Full decomposition of ``(1/rho) B^x[V]`` for one point or a batch."""
    V = np.asarray(V, dtype=float)
    N, d = params.N, params.d
    batch = V.shape[:-1]
    B = assemble_Bx(params, V)
    m = 2 * N
    B11 = B[..., :m, :m]
    lam, X = np.linalg.eig(B11)

    radius = np.max(np.abs(lam), axis=-1)
    imag = np.max(np.abs(lam.imag), axis=-1)
    bad = imag > REAL_TOL * radius
    if np.any(bad):
        k = int(np.argmax(bad.reshape(-1)))
        where = _point_index(batch, k)
        pt = V[where] if where else V
        shear = max_shear(params, v_to_u(params, pt)) if N > 1 else 0.0
        raise ComplexPairDetected(
            f"complex eigenvalue pair at point {where} "
            f"(imag {imag.reshape(-1)[k]:.3e}, shear {shear:.3e})",
            index=where, shear=shear, imag=float(imag.reshape(-1)[k]))
    lam = lam.real
    X = X.real
    order = np.argsort(lam, axis=-1)
    lam = np.take_along_axis(lam, order, axis=-1)
    X = np.take_along_axis(X, order[..., None, :], axis=-1)

    gaps = np.diff(lam, axis=-1).min(axis=-1) if m > 1 else np.full(batch, np.inf)
    if d == 2:
        Uf = np.moveaxis(v_to_u(params, np.moveaxis(V, -1, 0)), 0, -1)
        mu0 = Uf[..., N:2 * N]
        cross = np.abs(lam[..., :, None] - mu0[..., None, :]).min(axis=(-1, -2))
        gaps = np.minimum(gaps, cross)
    degenerate = gaps < GAP_TOL * radius
    if np.any(degenerate):
        k = int(np.argmax(degenerate.reshape(-1)))
        raise DegenerateGap(
            f"eigenvalue gap {gaps.reshape(-1)[k]:.3e} below tolerance at point "
            f"{_point_index(batch, k)}", index=_point_index(batch, k),
            gap=float(gaps.reshape(-1)[k]))

    X = _normalize_columns(X)
    Y = np.linalg.inv(X)  # rows are left eigenvectors with Y X = I
    n = params.nvar
    R = np.zeros(batch + (n, m))
    R[..., :m, :] = X
    if d == 2:
        B21 = B[..., m:, :m]
        B22 = B[..., m:, m:]
        eye = np.eye(N)
        for j in range(m):
            rhs = B21 @ X[..., :, j:j + 1]
            R[..., m:, j] = np.linalg.solve(lam[..., j, None, None] * eye - B22, rhs)[..., 0]
    Lft = np.zeros(batch + (m, n))
    Lft[..., :, :m] = Y
    P = np.einsum("...im,...mj->...mij", R, Lft)

    P_minus = P[..., :N, :, :]
    P_plus = P[..., N:, :, :][..., ::-1, :, :]
    dec = EigenDecomp(mu_plus=lam[..., N:][..., ::-1].copy(), mu_minus=lam[..., :N].copy(),
                      P_plus=P_plus.copy(), P_minus=P_minus.copy(), is_real=True,
                      min_gap=float(np.min(gaps)))
    if d == 2:
        mu_t, P_t = trivial_eigenpairs(params, V)
        dec.mu_trivial = mu_t
        dec.P_trivial = P_t
    return dec


def symmetrizer_T(params: Params, V, decomp: Optional[EigenDecomp] = None) -> np.ndarray:
    """``T^x = sum_j P_j^T P_j`` over every spectral projection."""
    if decomp is None:
        decomp = eigendecompose_Bx(params, V)
    P = decomp.projections()
    return np.einsum("...kji,...kjl->...il", P, P)


@dataclass
class HyperbolicityReport:
    ok: bool
    min_depth: np.ndarray
    max_shear: float
    min_gap: float
    is_real: bool
    depth_ok: bool
    shear_ok: bool
    failed_layer: Optional[int] = None
    location: Optional[tuple] = None
    message: str = ""
    extra: dict = field(default_factory=dict)


def check_hyperbolicity(params: Params, state, h0: float, nu: float) -> HyperbolicityReport:
    """Worst-case depth, shear and eigen-gap summary over a field or a point.

    ``state`` may be a StateU, a StateV, or a raw U array with the variable
    axis first.
    """
    if isinstance(state, StateV):
        U = v_to_u(params, state.to_array())
    elif isinstance(state, StateU):
        U = state.to_array()
    else:
        U = np.asarray(state, dtype=float)
    N = params.N
    h = layer_depths(params, U)
    mins = h.reshape(N, -1).min(axis=1)
    depth_ok = bool(np.all(mins >= h0))
    shear = max_shear(params, U)
    shear_ok = bool(shear < 1.0 / nu)
    report = HyperbolicityReport(ok=False, min_depth=mins, max_shear=shear,
                                 min_gap=np.nan, is_real=True,
                                 depth_ok=depth_ok, shear_ok=shear_ok)
    if not depth_ok:
        layer = int(np.argmin(mins - h0))
        report.failed_layer = layer + 1
        report.message = f"layer {layer + 1} depth {mins[layer]:.4g} below h0 = {h0:g}"
        if np.any(mins <= 0):
            return report
    pts = np.moveaxis(U.reshape(U.shape[0], -1), 0, -1)
    V = np.moveaxis(u_to_v(params, np.moveaxis(pts, -1, 0)), 0, -1)
    try:
        dec = eigendecompose_Bx(params, V)
        report.min_gap = dec.min_gap
    except ComplexPairDetected as exc:
        report.is_real = False
        report.location = _grid_location(U.shape[1:], exc.index)
        report.message = (report.message + "; " if report.message else "") + \
            f"complex eigenvalues at grid index {report.location}"
        return report
    except DegenerateGap as exc:
        report.min_gap = exc.gap
        report.location = _grid_location(U.shape[1:], exc.index)
        report.message = (report.message + "; " if report.message else "") + \
            f"degenerate eigen gap at grid index {report.location}"
        return report
    report.ok = depth_ok and shear_ok
    if not shear_ok:
        report.message = (report.message + "; " if report.message else "") + \
            f"shear {shear:.4g} not below 1/nu = {1.0 / nu:g}"
    return report


def _grid_location(grid_shape, flat_index):
    if not flat_index:
        return ()
    flat = flat_index[0]
    return tuple(int(i) for i in np.unravel_index(flat, grid_shape)) if grid_shape else ()
