"""Periodic-box Fourier representation and exact spectral operators.

Normalization: the forward transform carries ``1/n^3`` so a coefficient
approximates ``(1/L^3) * integral f(x) exp(-i k.x) dx`` and Parseval reads
``||f||_2^2 = L^3 * sum_k |f_hat(k)|^2``.  Every norm in the package goes
through :func:`l2_norm_sq` / :func:`inner` and therefore uses this one
convention.

Coefficients are stored in the real-FFT half layout ``(c, n, n, n//2 + 1)``
with axes in numpy FFT order.  The missing half of the lattice is implied by
Hermitian symmetry; sums over the full lattice use :attr:`GridSpec.weights`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "SpectralField",
    "SolenoidalState",
    "forward",
    "inverse",
    "partial",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "lambda_power",
    "leray_project",
    "dealias",
    "l2_norm_sq",
    "inner",
    "sobolev_seminorm_sq",
    "is_hermitian",
    "divergence_defect",
    "resample",
]


def fft_workers() -> int:
    """Thread count for scipy.fft, from ``HALLMHD_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HALLMHD_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic box ``[0, L)^3`` sampled with ``n`` points per axis."""

    n_per_axis: int
    box_length: float = 2.0 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        n = self.n_per_axis
        if not isinstance(n, (int, np.integer)) or n <= 0 or n % 2:
            raise ValueError(f"n_per_axis must be a positive even integer, got {n!r}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length!r}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction!r}")

    @property
    def n(self) -> int:
        return int(self.n_per_axis)

    @property
    def volume(self) -> float:
        return float(self.box_length) ** 3

    @property
    def k0(self) -> float:
        """Lattice spacing ``2 pi / L`` in wavenumber space."""
        return 2.0 * math.pi / self.box_length

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def physical_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def cutoff(self) -> int:
        """Largest retained integer mode index per axis."""
        return int(math.floor(self.dealias_fraction * self.n / 2 + 1e-12))

    @cached_property
    def m_full(self) -> np.ndarray:
        """Integer mode indices along a full axis, in ``[-n/2, n/2)``."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)

    @cached_property
    def m_half(self) -> np.ndarray:
        """Integer mode indices along the halved last axis; the Nyquist entry is ``-n/2``."""
        m = np.arange(self.n // 2 + 1, dtype=np.int64)
        m[-1] = -(self.n // 2)
        return m

    @cached_property
    def axis_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Odd-multiplier wavenumbers per axis, Nyquist entries zeroed."""
        kx = self.k0 * self.m_full.astype(float)
        kx[self.n // 2] = 0.0
        kz = self.k0 * self.m_half.astype(float)
        kz[-1] = 0.0
        return kx, kx.copy(), kz

    @cached_property
    def k_vec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The three broadcastable wavevector components used by odd operators."""
        kx, ky, kz = self.axis_wavenumbers
        return kx[:, None, None], ky[None, :, None], kz[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        """True ``|k|^2`` on the half lattice (Nyquist entries keep their magnitude)."""
        mx = self.m_full.astype(float)[:, None, None]
        my = self.m_full.astype(float)[None, :, None]
        mz = self.m_half.astype(float)[None, None, :]
        return self.k0**2 * (mx * mx + my * my + mz * mz)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def axis_masks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = self.cutoff
        mx = np.abs(self.m_full) <= c
        mz = np.abs(self.m_half) <= c
        return mx, mx.copy(), mz

    @cached_property
    def mask(self) -> np.ndarray:
        """Dealias filter: True where every ``|m_i| <= dealias_fraction * n / 2``."""
        mx, my, mz = self.axis_masks
        return mx[:, None, None] & my[None, :, None] & mz[None, None, :]

    @cached_property
    def weights(self) -> np.ndarray:
        """Hermitian multiplicity of each half-lattice entry (1 or 2)."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.broadcast_to(w[None, None, :], self.spectral_shape)

    @cached_property
    def k_max(self) -> float:
        """Largest ``|k|`` among dealias-retained modes."""
        return float(np.sqrt(self.k2[self.mask].max()))

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates ``x_i = i * L / n``."""
        x = np.arange(self.n) * self.dx
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def to_dict(self) -> dict:
        return {
            "n_per_axis": self.n,
            "box_length": float(self.box_length),
            "dealias_fraction": float(self.dealias_fraction),
        }


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real field with ``c`` components (1 or 3)."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim == 3:
            c = c[None]
        if c.shape[1:] != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient block {c.shape[1:]} does not match grid {self.grid.spectral_shape}"
            )
        c = np.array(c, dtype=np.complex128, copy=True)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, grid: GridSpec, ncomp: int = 3) -> "SpectralField":
        return cls(grid, np.zeros((ncomp,) + grid.spectral_shape, dtype=np.complex128))

    def to_physical(self) -> np.ndarray:
        return inverse(self)

    def _check(self, other: "SpectralField"):
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[i : i + 1])


@dataclass(frozen=True, eq=False)
class SolenoidalState:
    """The pair ``(u, B)`` at time ``t``; both fields divergence-free."""

    u: SpectralField
    B: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.B.grid:
            raise ValueError("u and B live on different grids")
        if self.u.ncomp != 3 or self.B.ncomp != 3:
            raise ValueError("u and B must be 3-component vector fields")
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: GridSpec, time: float = 0.0) -> "SolenoidalState":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid), time)

    @classmethod
    def from_physical(cls, grid: GridSpec, u, B, time: float = 0.0, project: bool = True):
        """Build a state from physical samples; projects and dealiases by default."""
        uh, Bh = forward(grid, u), forward(grid, B)
        if project:
            uh, Bh = dealias(leray_project(uh)), dealias(leray_project(Bh))
        return cls(uh, Bh, time)

    def energy(self) -> float:
        """``||u||_2^2 + ||B||_2^2``."""
        return l2_norm_sq(self.u) + l2_norm_sq(self.B)

    def with_time(self, time: float) -> "SolenoidalState":
        return SolenoidalState(self.u, self.B, time)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u.coeffs).all() and np.isfinite(self.B.coeffs).all())


# ------------------------------------------------------------------ transforms

def forward(grid: GridSpec, samples) -> SpectralField:
    """Physical samples ``(c, n, n, n)`` or ``(n, n, n)`` to coefficients."""
    a = np.asarray(samples, dtype=float)
    if a.ndim == 3:
        a = a[None]
    if a.ndim != 4 or a.shape[1:] != grid.physical_shape:
        raise ValueError(f"sample array {a.shape} does not match grid {grid.physical_shape}")
    coeffs = sfft.rfftn(a, axes=(1, 2, 3), norm="forward", workers=fft_workers())
    return SpectralField(grid, coeffs)


def forward_array(grid: GridSpec, a: np.ndarray) -> np.ndarray:
    return sfft.rfftn(a, axes=(1, 2, 3), norm="forward", workers=fft_workers())


def inverse_array(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    return sfft.irfftn(coeffs, s=grid.physical_shape, axes=(1, 2, 3), norm="forward",
                       workers=fft_workers())


def inverse(f: SpectralField) -> np.ndarray:
    """Coefficients back to real samples of shape ``(c, n, n, n)``."""
    return inverse_array(f.grid, f.coeffs)


# ------------------------------------------------------------------- operators

def partial(f: SpectralField, axis: int) -> SpectralField:
    """``d/dx_axis`` applied componentwise."""
    k = f.grid.k_vec[axis]
    return SpectralField(f.grid, 1j * k * f.coeffs)


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar field."""
    if f.ncomp != 1:
        raise ValueError("gradient expects a scalar field")
    kx, ky, kz = f.grid.k_vec
    c = f.coeffs[0]
    return SpectralField(f.grid, np.stack([1j * kx * c, 1j * ky * c, 1j * kz * c]))


def divergence(f: SpectralField) -> SpectralField:
    if f.ncomp != 3:
        raise ValueError("divergence expects a vector field")
    kx, ky, kz = f.grid.k_vec
    c = f.coeffs
    return SpectralField(f.grid, 1j * (kx * c[0] + ky * c[1] + kz * c[2]))


def curl(f: SpectralField) -> SpectralField:
    if f.ncomp != 3:
        raise ValueError("curl expects a vector field")
    kx, ky, kz = f.grid.k_vec
    c = f.coeffs
    return SpectralField(
        f.grid,
        np.stack([
            1j * (ky * c[2] - kz * c[1]),
            1j * (kz * c[0] - kx * c[2]),
            1j * (kx * c[1] - ky * c[0]),
        ]),
    )


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.k2 * f.coeffs)


def lambda_power(f: SpectralField, r: float) -> SpectralField:
    """``Lambda^r = (-Delta)^{r/2}``: multiply by ``|k|^r`` (zero at ``k = 0`` for ``r > 0``)."""
    if r < 0:
        raise ValueError(f"Lambda^r requires r >= 0, got {r}")
    if r == 0:
        return SpectralField(f.grid, f.coeffs)
    return SpectralField(f.grid, f.grid.kmag**r * f.coeffs)


def leray_project(f: SpectralField) -> SpectralField:
    """Orthogonal projection onto divergence-free fields, ``I - k k^T / |k|^2``."""
    if f.ncomp != 3:
        raise ValueError("leray_project expects a vector field")
    kx, ky, kz = f.grid.k_vec
    c = f.coeffs
    k2 = kx * kx + ky * ky + kz * kz
    inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    kd = (kx * c[0] + ky * c[1] + kz * c[2]) * inv
    return SpectralField(f.grid, np.stack([c[0] - kx * kd, c[1] - ky * kd, c[2] - kz * kd]))


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.mask, f.coeffs, 0.0))


# ----------------------------------------------------------------------- norms

def l2_norm_sq(f: SpectralField) -> float:
    """``||f||_2^2 = L^3 sum_k |f_hat(k)|^2`` over the full lattice."""
    g = f.grid
    return float(g.volume * np.sum(g.weights * np.sum(np.abs(f.coeffs) ** 2, axis=0)))


def inner(f: SpectralField, g: SpectralField) -> float:
    """Real ``L^2`` inner product ``integral f . g dx``."""
    f._check(g)
    grid = f.grid
    prod = np.sum((f.coeffs * np.conj(g.coeffs)).real, axis=0)
    return float(grid.volume * np.sum(grid.weights * prod))


def sobolev_seminorm_sq(f: SpectralField, r: float) -> float:
    """``||Lambda^r f||_2^2``."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    g = f.grid
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    mult = np.ones_like(g.k2) if r == 0 else g.k2**r
    return float(g.volume * np.sum(g.weights * mult * power))


# ------------------------------------------------------------------ invariants

def _reflect(plane: np.ndarray) -> np.ndarray:
    """Index map ``m -> -m`` on the two full axes of a half-lattice plane."""
    return np.roll(np.flip(plane, axis=(-2, -1)), 1, axis=(-2, -1))


def is_hermitian(f: SpectralField, rtol: float = 1e-12) -> bool:
    """Check ``f_hat(-k) = conj(f_hat(k))`` on the self-conjugate planes."""
    c = f.coeffs
    scale = max(float(np.abs(c).max()), 1e-300)
    for plane in (c[..., 0], c[..., -1]):
        if np.abs(_reflect(plane) - np.conj(plane)).max() > rtol * scale:
            return False
    return True


def divergence_defect(f: SpectralField) -> float:
    """``max_k |k . f_hat(k)| / max_k |f_hat(k)|`` (0 for the zero field)."""
    kx, ky, kz = f.grid.k_vec
    c = f.coeffs
    top = float(np.abs(c).max())
    if top == 0.0:
        return 0.0
    return float(np.abs(kx * c[0] + ky * c[1] + kz * c[2]).max() / top)


def resample(f: SpectralField, grid: GridSpec) -> SpectralField:
    """Zero-pad or truncate coefficients onto ``grid`` (same box length)."""
    if not math.isclose(grid.box_length, f.grid.box_length):
        raise ValueError("resample requires equal box lengths")
    src, dst = f.grid, grid
    out = np.zeros((f.ncomp,) + dst.spectral_shape, dtype=np.complex128)
    lim = min(src.n, dst.n) // 2 - 1
    keep_full = np.arange(-lim, lim + 1)
    keep_half = np.arange(0, lim + 1)
    ix_src = np.ix_(keep_full % src.n, keep_full % src.n, keep_half)
    ix_dst = np.ix_(keep_full % dst.n, keep_full % dst.n, keep_half)
    for c in range(f.ncomp):
        out[c][ix_dst] = f.coeffs[c][ix_src]
    return SpectralField(dst, out)
