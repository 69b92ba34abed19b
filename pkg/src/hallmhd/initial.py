"""Seeded, localized, divergence-free initial data of prescribed spectral class.

A field of class ``sigma`` has coefficients

    f_hat(k) = A |k|^sigma exp(-|k|^2 w^2 / 2) P(k) c_hat(k),
    c_hat(k) = sum_j a_j exp(-i k . x_j),

i.e. the Leray projection of a few point-vectors ``a_j`` near the box centre,
filtered by ``|k|^sigma`` and a Gaussian of width ``w``.  Near ``k = 0`` the
shell-averaged modulus behaves like ``|k|^sigma``, so the heat flow energy
decays like ``(t + w^2/2)^{-(3 + 2 sigma)/2}``; the default ``w^2 = 2`` puts
the offset at ``t + 1``.

Seeds: the master seed is expanded with splitmix64 into one 64-bit seed per
field (stream 0 for ``u``, stream 1 for ``B``), each feeding a PCG64
generator.
"""

from __future__ import annotations

import math

import numpy as np

from .spectral import (
    GridSpec,
    SolenoidalState,
    SpectralField,
    dealias,
    forward_array,
    inverse_array,
    leray_project,
)

__all__ = [
    "splitmix64",
    "field_seeds",
    "make_initial_data",
    "spectral_class_field",
    "random_solenoidal_field",
    "random_solenoidal_state",
]

_MASK64 = (1 << 64) - 1


def splitmix64(seed: int, stream: int) -> int:
    """The ``stream``-th output of a splitmix64 sequence started at ``seed``."""
    z = (int(seed) + (stream + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def field_seeds(master: int) -> tuple[int, int]:
    return splitmix64(master, 0), splitmix64(master, 1)


def spectral_class_field(
    grid: GridSpec,
    sigma: float,
    rng: np.random.Generator,
    width: float = math.sqrt(2.0),
    n_blobs: int = 3,
    spread: float = 0.5,
) -> SpectralField:
    """Unnormalized class-``sigma`` field drawn from ``rng``."""
    centre = 0.5 * grid.box_length
    centres = centre + spread * rng.standard_normal((n_blobs, 3))
    vectors = rng.standard_normal((n_blobs, 3))
    kx, ky, kz = grid.k_vec
    c_hat = np.zeros((3,) + grid.spectral_shape, dtype=np.complex128)
    for x, a in zip(centres, vectors):
        phase = np.exp(-1j * (kx * x[0] + ky * x[1] + kz * x[2]))
        for i in range(3):
            c_hat[i] += a[i] * phase
    k = grid.kmag
    profile = np.exp(-0.5 * width**2 * grid.k2)
    if sigma != 0:
        profile = profile * k**sigma
    profile = np.where(k > 0, profile, 0.0)
    f = leray_project(SpectralField(grid, profile * c_hat))
    return dealias(f)


def make_initial_data(
    sigma: float,
    amplitude: float,
    seed: int,
    grid: GridSpec,
    width: float = math.sqrt(2.0),
    n_blobs: int = 3,
    spread: float = 0.5,
) -> SolenoidalState:
    """Independent ``u0``, ``B0`` of class ``sigma``, each scaled to ``max|f| = amplitude``."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if amplitude == 0:
        return SolenoidalState.zeros(grid)
    fields = []
    for s in field_seeds(seed):
        rng = np.random.Generator(np.random.PCG64(s))
        f = spectral_class_field(grid, sigma, rng, width, n_blobs, spread)
        peak = float(np.sqrt((inverse_array(grid, f.coeffs) ** 2).sum(axis=0).max()))
        fields.append(f * (amplitude / peak))
    return SolenoidalState(fields[0], fields[1], 0.0)


def random_solenoidal_field(grid: GridSpec, rng: np.random.Generator, slope: float = 2.0,
                            scale: float = 1.0) -> SpectralField:
    """Dealiased divergence-free field with Gaussian coefficients of rms ``~ (1+|k|/k0)^-slope``.

    Meant for test ensembles: broadband, Hermitian by construction (drawn in
    physical space), zero mean.
    """
    shaped = forward_array(grid, rng.standard_normal((3,) + grid.physical_shape))
    shaped = shaped * (1.0 + grid.kmag / grid.k0) ** (-slope)
    f = dealias(leray_project(SpectralField(grid, shaped)))
    coeffs = f.coeffs.copy()
    coeffs[:, 0, 0, 0] = 0.0
    return SpectralField(grid, coeffs) * scale


def random_solenoidal_state(grid: GridSpec, rng: np.random.Generator, slope: float = 2.0,
                            scale_u: float = 1.0, scale_B: float = 1.0) -> SolenoidalState:
    return SolenoidalState(random_solenoidal_field(grid, rng, slope, scale_u),
                           random_solenoidal_field(grid, rng, slope, scale_B), 0.0)
