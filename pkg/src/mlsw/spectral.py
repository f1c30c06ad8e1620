"""Fourier pseudo-spectral operators on the periodic grid.

Transforms act on the trailing ``d`` axes, so leading axes (variables,
layers, components) ride along. Derivative wavenumbers have the Nyquist
entry zeroed, which keeps every operator real-preserving.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import Grid


class SpectralOps:
    def __init__(self, grid: Grid, dealias: bool = True):
        self.grid = grid
        self.d = grid.d
        self.axes = tuple(range(-grid.d, 0))
        self.dealias = dealias
        ms, ks, kt = [], [], []
        for i, (Li, ni) in enumerate(zip(grid.L, grid.n)):
            last = i == grid.d - 1
            m = np.fft.rfftfreq(ni, 1.0 / ni) if last else np.fft.fftfreq(ni, 1.0 / ni)
            kt.append(2 * np.pi * np.abs(m) / Li)
            kd = 2 * np.pi * m / Li
            kd[np.abs(m) == ni // 2] = 0.0
            ms.append(m)
            ks.append(kd)
        self.m = np.meshgrid(*ms, indexing="ij")
        self.kd = np.stack(np.meshgrid(*ks, indexing="ij"))
        # true |k|^2, Nyquist included; used for Sobolev weights
        self.ktrue2 = sum(k ** 2 for k in np.meshgrid(*kt, indexing="ij"))
        self.k2 = np.sum(self.kd ** 2, axis=0)
        self.spec_shape = self.k2.shape
        mask = np.ones(self.spec_shape, dtype=bool)
        for m, ni in zip(self.m, grid.n):
            mask &= np.abs(m) < ni / 3.0
        self.mask = mask if dealias else np.ones(self.spec_shape, dtype=bool)
        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv

    def fft(self, f):
        return np.fft.rfftn(f, axes=self.axes)

    def ifft(self, F):
        return np.fft.irfftn(F, s=self.grid.n, axes=self.axes)

    def filter_hat(self, F):
        return F * self.mask if self.dealias else F

    def filter(self, f):
        return self.ifft(self.filter_hat(self.fft(f))) if self.dealias else f

    def grad_hat(self, F):
        """Spectral gradient: returns shape ``(d, *F.shape)``."""
        kd = self.kd.reshape((self.d,) + (1,) * (F.ndim - self.d) + self.spec_shape)
        return 1j * kd * F[None]

    def div_hat(self, Vh):
        """Divergence of a spectral vector field with components on axis 0."""
        kd = self.kd.reshape((self.d,) + (1,) * (Vh.ndim - 1 - self.d) + self.spec_shape)
        return np.sum(1j * kd * Vh, axis=0)

    def grad(self, f):
        return self.ifft(self.grad_hat(self.fft(f)))

    def div(self, v):
        return self.ifft(self.div_hat(self.fft(v)))

    def leray_hat(self, Vh):
        """``k k^T / |k|^2`` applied to a spectral vector field (d = 2)."""
        kd = self.kd.reshape((self.d,) + (1,) * (Vh.ndim - 1 - self.d) + self.spec_shape)
        kv = np.sum(kd * Vh, axis=0)
        return kd * (kv * self.inv_k2)[None]

    def leray(self, v):
        """Irrotational part of ``v``; for d = 1 this removes the mean."""
        v = np.asarray(v, dtype=float)
        if self.d == 1:
            return v - v.mean(axis=-1, keepdims=True)
        return self.ifft(self.leray_hat(self.fft(v)))

    def mean(self, f):
        return np.mean(f, axis=self.axes)

    def l2_sq(self, f):
        """Discrete squared L2 norm (mean times area), summed over leading axes."""
        return float(np.sum(np.mean(np.asarray(f) ** 2, axis=self.axes)) * self.grid.area)

    def l2(self, f):
        return float(np.sqrt(self.l2_sq(f)))


@lru_cache(maxsize=32)
def spectral_ops(grid: Grid, dealias: bool = True) -> SpectralOps:
    return SpectralOps(grid, dealias)


def leray_project(grid: Grid, v) -> np.ndarray:
    """Irrotational projection ``grad inv-Laplacian div`` on the torus.

    ``v`` has its components on axis 0; the zero mode maps to zero. In one
    dimension every mean-free field is a derivative, so the projection just
    removes the mean.
    """
    return spectral_ops(grid).leray(v)
