"""Fourier multipliers on the periodic box.

Coefficients are full (not half-spectrum) DFT arrays, wavevector k in
[-n/2, n/2)^d, physical wavenumber xi = 2 pi k / L.  First-order symbols
(gradient, divergence, Riesz, Leray) use xi with the Nyquist entry set to
zero so that they keep real fields real and stay mutually consistent;
even symbols (Laplacian, heat) use the full xi.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .field import Grid, VectorField

__all__ = [
    "SpectralField",
    "integer_wavevectors",
    "wavenumbers",
    "forward",
    "forward_scalar",
    "inverse",
    "to_physical",
    "riesz",
    "leray_project",
    "heat_semigroup",
    "gradient",
    "physical_gradient",
    "divergence",
    "laplacian",
    "dealias",
    "dealias_mask",
    "max_divergence",
]


def _workers():
    val = os.environ.get("NSGLS_THREADS")
    return max(1, int(val)) if val else 1


@dataclass(frozen=True)
class SpectralField:
    """``coefficients`` has shape (m,) + grid.shape; m = d for vector fields."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape[1:] != self.grid.shape:
            raise ValueError(f"SpectralField: shape {c.shape} incompatible with grid {self.grid.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def ncomp(self):
        return self.coefficients.shape[0]

    def with_coefficients(self, c):
        return SpectralField(self.grid, c)


@functools.lru_cache(maxsize=32)
def integer_wavevectors(grid):
    """Tuple of d integer wavevector arrays, broadcastable to grid.shape."""
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    return tuple(np.meshgrid(*([k] * grid.d), indexing="ij", sparse=True))


@functools.lru_cache(maxsize=32)
def wavenumbers(grid):
    """(xi, xi_odd, |xi|^2, |xi_odd|^2) with xi_odd the Nyquist-zeroed copy."""
    scale = 2.0 * np.pi / grid.L
    ks = integer_wavevectors(grid)
    xi = tuple(scale * k for k in ks)
    xi_odd = tuple(np.where(k == -grid.n // 2, 0.0, scale * k) for k in ks)
    ksq = np.zeros(grid.shape)
    ksq_odd = np.zeros(grid.shape)
    for a, b in zip(xi, xi_odd):
        ksq = ksq + a**2
        ksq_odd = ksq_odd + b**2
    return xi, xi_odd, ksq, ksq_odd


def _axes(grid):
    return tuple(range(1, grid.d + 1))


def forward(u):
    if not np.all(np.isfinite(u.components)):
        raise ValueError("forward: non-finite samples")
    c = scipy.fft.fftn(u.components, axes=_axes(u.grid), workers=_workers())
    return SpectralField(u.grid, c)


def forward_scalar(grid, f):
    f = np.asarray(f, dtype=float)
    c = scipy.fft.fftn(f[None], axes=_axes(grid), workers=_workers())
    return SpectralField(grid, c)


def to_physical(uh):
    """Real part of the inverse transform, shape (m,) + grid.shape."""
    return scipy.fft.ifftn(uh.coefficients, axes=_axes(uh.grid), workers=_workers()).real


def inverse(uh, time_tag=None):
    if uh.ncomp != uh.grid.d:
        raise ValueError("inverse: need d components; use to_physical for other counts")
    return VectorField(uh.grid, to_physical(uh), time_tag)


def riesz(uh, j):
    """R_j with symbol -i xi_j / |xi|; the zero mode maps to 0."""
    _, xi_odd, _, ksq_odd = wavenumbers(uh.grid)
    norm = np.sqrt(ksq_odd)
    with np.errstate(invalid="ignore", divide="ignore"):
        sym = np.where(norm > 0, -1j * xi_odd[j] / norm, 0.0)
    return uh.with_coefficients(uh.coefficients * sym)


def leray_project(uh):
    """Apply the symbol delta_ij - xi_i xi_j / |xi|^2 (zero mode untouched)."""
    if uh.ncomp != uh.grid.d:
        raise ValueError("leray_project: need a vector field")
    _, xi, _, ksq = wavenumbers(uh.grid)
    c = uh.coefficients
    inv = np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0)
    xi_dot = sum(xi[m] * c[m] for m in range(uh.grid.d)) * inv
    out = np.stack([c[i] - xi[i] * xi_dot for i in range(uh.grid.d)])
    return uh.with_coefficients(out)


def heat_semigroup(uh, t):
    """Multiplier exp(-|xi|^2 t): the periodic heat kernel, unit viscosity."""
    if t < 0:
        raise ValueError(f"heat_semigroup: need t >= 0, got {t}")
    _, _, ksq, _ = wavenumbers(uh.grid)
    return uh.with_coefficients(uh.coefficients * np.exp(-ksq * t))


def gradient(uh):
    """List over directions m of the SpectralField i xi_m uh."""
    _, xi_odd, _, _ = wavenumbers(uh.grid)
    return [uh.with_coefficients(1j * xi_odd[m] * uh.coefficients) for m in range(uh.grid.d)]


def physical_gradient(u):
    """Array g with g[m, i] = d u_i / d x_m in physical space."""
    uh = forward(u)
    return np.stack([to_physical(g) for g in gradient(uh)])


def divergence(uh):
    if uh.ncomp != uh.grid.d:
        raise ValueError("divergence: need a vector field")
    _, xi_odd, _, _ = wavenumbers(uh.grid)
    c = sum(1j * xi_odd[m] * uh.coefficients[m] for m in range(uh.grid.d))
    return SpectralField(uh.grid, c[None])


def laplacian(uh):
    _, _, ksq, _ = wavenumbers(uh.grid)
    return uh.with_coefficients(-ksq * uh.coefficients)


@functools.lru_cache(maxsize=32)
def dealias_mask(grid):
    keep = np.ones(grid.shape, dtype=bool)
    for k in integer_wavevectors(grid):
        keep = keep & (np.abs(k) <= grid.n / 3.0)
    return keep


def dealias(uh):
    """2/3 rule: zero every coefficient with some |k_m| > n/3."""
    return uh.with_coefficients(uh.coefficients * dealias_mask(uh.grid))


def max_divergence(u):
    """Max modulus of the spectral divergence in physical space."""
    return float(np.max(np.abs(to_physical(divergence(forward(u))))))
