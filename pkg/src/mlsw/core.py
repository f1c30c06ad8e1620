"""Parameters, periodic grid, state containers and admissibility checks.

Variables follow the normal ordering used throughout the package: a
``U`` vector is ``(zeta_1/rho, zeta_2..zeta_N, ux_1..ux_N, uy_1..uy_N)``
and a ``V`` vector is ``(zeta_1/rho, zeta_2..zeta_N, vx_2..vx_N, wx,
vy_2..vy_N, wy)``. Point states are 1-D arrays of length ``N*(1+d)``;
fields carry the grid axes after the variable axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

SUM_R_TOL = 1e-12


@dataclass(frozen=True)
class Params:
    """Dimensionless physical parameters of the N-layer system.

    ``r`` holds the density jumps ``r_2..r_N`` (length ``N-1``); the
    singular ``r_1`` never enters a stored array.
    """

    N: int
    d: int
    delta: np.ndarray
    r: np.ndarray
    rho: float
    gamma: np.ndarray = field(repr=False)
    m_bound: float = field(repr=False)
    total_depth: float = field(repr=False)

    @property
    def nvar(self) -> int:
        return self.N * (1 + self.d)

    @property
    def r_tilde(self) -> np.ndarray:
        """``(gamma_1, r_2, ..., r_N)``, the surface-weighted jump vector."""
        return np.concatenate([[self.gamma[0]], self.r])

    @property
    def e_rho(self) -> np.ndarray:
        e = np.ones(self.N)
        e[0] = self.rho
        return e

    def with_rho(self, rho: float) -> "Params":
        return derive_params(self.N, self.d, self.delta, self.r, rho)

    def __eq__(self, other):
        if not isinstance(other, Params):
            return NotImplemented
        return (self.N == other.N and self.d == other.d and self.rho == other.rho
                and np.array_equal(self.delta, other.delta)
                and np.array_equal(self.r, other.r))

    def __hash__(self):
        return hash((self.N, self.d, self.rho, tuple(self.delta), tuple(self.r)))


def derive_params(N: int, d: int, delta: Sequence[float], r: Sequence[float],
                  rho: float) -> Params:
    """Validate inputs and build the derived density ratios ``gamma``.

    gamma_1 = 1 - rho^2 and gamma_i = 1 - rho^2 * sum_{j>i} r_j, so the
    jumps must sum to one for gamma_N = 1 to hold.
    """
    N = int(N)
    d = int(d)
    if N < 1:
        raise ConfigError(f"layer count N must be >= 1, got {N}")
    if d not in (1, 2):
        raise ConfigError(f"dimension d must be 1 or 2, got {d}")
    delta = np.asarray(delta, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    if delta.size != N:
        raise ConfigError(f"expected {N} rest depths, got {delta.size}")
    if r.size != N - 1:
        raise ConfigError(f"expected {N - 1} density jumps r_2..r_N, got {r.size}")
    if np.any(~np.isfinite(delta)) or np.any(delta <= 0):
        raise ConfigError("rest depths delta_n must be finite and > 0")
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise ConfigError("density jumps r_n must be finite and > 0")
    rho = float(rho)
    if not (0.0 < rho < 1.0):
        raise ConfigError(f"contrast parameter rho must lie in (0, 1), got {rho}")
    if N > 1 and abs(r.sum() - 1.0) >= SUM_R_TOL:
        raise ConfigError(
            f"density jumps must satisfy sum(r_2..r_N) = 1 (got {r.sum()!r}): "
            "the r_j telescope to (gamma_N - gamma_1)/(1 - gamma_1), and "
            "gamma_N = 1, gamma_1 = 1 - rho^2 force the sum to equal one")

    gamma = np.empty(N)
    gamma[0] = 1.0 - rho ** 2
    # tail[i] = sum_{j > i} r_j in 1-based layer numbering
    tail = np.concatenate([np.cumsum(r[::-1])[::-1], [0.0]])
    for i in range(1, N):
        gamma[i] = 1.0 - rho ** 2 * tail[i]
    if N > 1:
        gamma[-1] = 1.0

    m_bound = float(max(np.max(delta), np.max(1.0 / delta),
                        *(np.concatenate([r, 1.0 / r]) if N > 1 else [0.0])))
    delta.flags.writeable = False
    r.flags.writeable = False
    gamma.flags.writeable = False
    return Params(N=N, d=d, delta=delta, r=r, rho=rho, gamma=gamma,
                  m_bound=m_bound, total_depth=float(delta.sum()))


def normalize_r(r: Sequence[float]) -> np.ndarray:
    """Rescale density jumps so they sum to one (explicit opt-in helper)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ConfigError("density jumps must be > 0")
    return r / r.sum()


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a torus of side lengths ``L``."""

    d: int
    L: tuple
    n: tuple

    def __post_init__(self):
        L = tuple(float(x) for x in np.atleast_1d(self.L))
        n = tuple(int(x) for x in np.atleast_1d(self.n))
        if self.d not in (1, 2):
            raise ConfigError(f"grid dimension must be 1 or 2, got {self.d}")
        if len(L) != self.d or len(n) != self.d:
            raise ConfigError(f"grid needs {self.d} extents and point counts")
        for Li, ni in zip(L, n):
            if not Li > 0:
                raise ConfigError("torus extents must be > 0")
            if ni < 8 or ni & (ni - 1):
                raise ConfigError(f"point counts must be powers of two >= 8, got {ni}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "n", n)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def spacing(self) -> tuple:
        return tuple(Li / ni for Li, ni in zip(self.L, self.n))

    @property
    def dx_min(self) -> float:
        return min(self.spacing)

    @property
    def area(self) -> float:
        return float(np.prod(self.L))

    def coordinates(self) -> list:
        """Meshgrid of point coordinates, ``indexing='ij'``."""
        axes = [np.arange(ni) * Li / ni for Li, ni in zip(self.L, self.n)]
        return np.meshgrid(*axes, indexing="ij")

    def wavenumbers(self) -> list:
        """Full (complex FFT) wavenumber arrays, broadcast to the grid shape."""
        ks = [2 * np.pi * np.fft.fftfreq(ni, d=1.0 / ni) / Li
              for Li, ni in zip(self.L, self.n)]
        return np.meshgrid(*ks, indexing="ij")

    def mode_indices(self) -> list:
        """Integer Fourier indices (non-negative then negative)."""
        ms = [np.fft.fftfreq(ni, d=1.0 / ni) for ni in self.n]
        return np.meshgrid(*ms, indexing="ij")


def _check_same_params(params: Params, N: int, d: int):
    if params.N != N or params.d != d:
        raise ValueError(f"state has (N={N}, d={d}) but params have "
                         f"(N={params.N}, d={params.d})")


@dataclass
class StateU:
    """Physical unknowns as grid fields (or point values for empty grid shape)."""

    scaled_zeta1: np.ndarray
    zeta: np.ndarray
    ux: np.ndarray
    uy: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.ux.shape[0]

    @property
    def d(self) -> int:
        return 1 if self.uy is None else 2

    @property
    def grid_shape(self) -> tuple:
        return self.scaled_zeta1.shape

    def to_array(self) -> np.ndarray:
        parts = [self.scaled_zeta1[None], self.zeta, self.ux]
        if self.uy is not None:
            parts.append(self.uy)
        return np.concatenate(parts, axis=0)

    @classmethod
    def from_array(cls, params: Params, arr) -> "StateU":
        arr = np.asarray(arr, dtype=float)
        N, d = params.N, params.d
        if arr.shape[0] != N * (1 + d):
            raise ValueError(f"expected {N * (1 + d)} variables, got {arr.shape[0]}")
        return cls(scaled_zeta1=arr[0].copy(), zeta=arr[1:N].copy(),
                   ux=arr[N:2 * N].copy(),
                   uy=arr[2 * N:3 * N].copy() if d == 2 else None)

    @classmethod
    def rest(cls, params: Params, shape=()) -> "StateU":
        return cls.from_array(params, np.zeros((params.nvar,) + tuple(shape)))

    def velocities(self) -> np.ndarray:
        """Velocity array of shape ``(d, N, *grid)``."""
        if self.uy is None:
            return self.ux[None]
        return np.stack([self.ux, self.uy])

    def copy(self) -> "StateU":
        return StateU(self.scaled_zeta1.copy(), self.zeta.copy(), self.ux.copy(),
                      None if self.uy is None else self.uy.copy())


@dataclass
class StateV:
    """Normal-form unknowns: shear velocities ``v_2..v_N`` and total flux ``w``."""

    scaled_zeta1: np.ndarray
    zeta: np.ndarray
    vx: np.ndarray
    wx: np.ndarray
    vy: Optional[np.ndarray] = None
    wy: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.vx.shape[0] + 1

    @property
    def d(self) -> int:
        return 1 if self.vy is None else 2

    def to_array(self) -> np.ndarray:
        parts = [self.scaled_zeta1[None], self.zeta, self.vx, self.wx[None]]
        if self.vy is not None:
            parts += [self.vy, self.wy[None]]
        return np.concatenate(parts, axis=0)

    @classmethod
    def from_array(cls, params: Params, arr) -> "StateV":
        arr = np.asarray(arr, dtype=float)
        N, d = params.N, params.d
        if arr.shape[0] != N * (1 + d):
            raise ValueError(f"expected {N * (1 + d)} variables, got {arr.shape[0]}")
        return cls(scaled_zeta1=arr[0].copy(), zeta=arr[1:N].copy(),
                   vx=arr[N:2 * N - 1].copy(), wx=arr[2 * N - 1].copy(),
                   vy=arr[2 * N:3 * N - 1].copy() if d == 2 else None,
                   wy=arr[3 * N - 1].copy() if d == 2 else None)


def interface_deformations(params: Params, U) -> np.ndarray:
    """``(zeta_1, ..., zeta_N, zeta_{N+1} = 0)`` from a U array or StateU."""
    arr = U.to_array() if isinstance(U, StateU) else np.asarray(U, dtype=float)
    N = params.N
    z = np.zeros((N + 1,) + arr.shape[1:])
    z[0] = params.rho * arr[0]
    z[1:N] = arr[1:N]
    return z


def _bcast(vec: np.ndarray, ndim: int) -> np.ndarray:
    return vec.reshape(vec.shape + (1,) * ndim)


def layer_depths(params: Params, U) -> np.ndarray:
    """``h_n = delta_n + zeta_n - zeta_{n+1}`` with ``zeta_1 = rho * U[0]``."""
    z = interface_deformations(params, U)
    return _bcast(params.delta, z.ndim - 1) + z[:-1] - z[1:]


def check_depth_condition(params: Params, U, h0: float):
    """Return ``(ok, per-layer minimum depth)``; the inequality is inclusive."""
    if not h0 > 0:
        raise ValueError("h0 must be > 0")
    h = layer_depths(params, U)
    mins = h.reshape(params.N, -1).min(axis=1)
    return bool(np.all(mins >= h0)), mins


def max_shear(params: Params, U) -> float:
    """Grid maximum of ``|u_n - u_{n-1}|`` (Euclidean over components)."""
    st = U if isinstance(U, StateU) else StateU.from_array(params, U)
    if params.N < 2:
        return 0.0
    vel = st.velocities()
    jump = np.sqrt(np.sum((vel[:, 1:] - vel[:, :-1]) ** 2, axis=0))
    return float(jump.max())


def check_shear_condition(params: Params, U, nu: float):
    """Return ``(ok, max shear)`` where ok means shear < 1/nu strictly."""
    if not nu > 0:
        raise ValueError("nu must be > 0")
    s = max_shear(params, U)
    return bool(s < 1.0 / nu), s
