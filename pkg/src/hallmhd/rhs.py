"""Right-hand side of the viscous resistive Hall-MHD system.

Three independent routes compute the nonlinear terms:

* :func:`nonlinear_rhs` - the fused hot path used by the time stepper.  It
  transforms ``u``, ``B`` and ``J = curl B`` once, forms the symmetric stress
  ``u u^T - B B^T`` and the cross product ``(u - J) x B`` in one kernel, then
  applies divergence + Leray projection and a masked curl spectrally.
* :func:`rhs_terms` - term-by-term pseudospectral products in advective form.
* :func:`symbol_fields` - the Fourier-symbol (matrix) form built from the
  product coefficients ``a_kj = (u_k u_j)^``, ``b_kj``, ``c_kj = (u_j B_k)^``.

Viscosity and resistivity are both fixed to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .spectral import (
    GridSpec,
    SolenoidalState,
    SpectralField,
    curl,
    dealias,
    forward_array,
    inverse_array,
    l2_norm_sq,
    leray_project,
)

__all__ = [
    "RhsTerms",
    "SymbolBounds",
    "nonlinear_product",
    "hall_term",
    "nonlinear_rhs",
    "rhs",
    "rhs_terms",
    "symbol_fields",
    "symbol_bound_constant",
    "symbol_bound_report",
]


@dataclass(frozen=True)
class RhsTerms:
    advection: SpectralField          # u . grad u
    lorentz: SpectralField            # B . grad B
    induction_stretch: SpectralField  # B . grad u
    induction_advect: SpectralField   # u . grad B
    hall: SpectralField               # curl((curl B) x B)
    H_hat: SpectralField
    M_hat: SpectralField


@dataclass(frozen=True)
class SymbolBounds:
    ratio_H: float
    ratio_M_linear: float
    ratio_M_quadratic: float


def _same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise ValueError("grid mismatch between operands")


def nonlinear_product(a: SpectralField, b: SpectralField, form: str = "advection") -> SpectralField:
    """Pseudospectral product, dealiased.

    ``form="advection"`` gives ``(a . grad) b``; ``form="cross"`` gives ``a x b``.
    """
    _same_grid(a, b)
    grid = a.grid
    pa = inverse_array(grid, a.coeffs)
    if form == "cross":
        pb = inverse_array(grid, b.coeffs)
        prod = np.stack([
            pa[1] * pb[2] - pa[2] * pb[1],
            pa[2] * pb[0] - pa[0] * pb[2],
            pa[0] * pb[1] - pa[1] * pb[0],
        ])
    elif form == "advection":
        kx, ky, kz = grid.k_vec
        prod = np.zeros((b.ncomp,) + grid.physical_shape)
        for j, kj in enumerate((kx, ky, kz)):
            db = inverse_array(grid, 1j * kj * b.coeffs)
            prod += pa[j] * db
    else:
        raise ValueError(f"unknown product form {form!r}")
    return dealias(SpectralField(grid, forward_array(grid, prod)))


def hall_term(B: SpectralField) -> SpectralField:
    """``curl((curl B) x B)``: J spectrally, J x B pointwise, curl spectrally, dealias."""
    J = curl(B)
    return dealias(curl(nonlinear_product(J, B, "cross")))


def induction_curl_form(u: SpectralField, B: SpectralField) -> SpectralField:
    """``curl(u x B)``, the alternative form of ``B . grad u - u . grad B``."""
    return dealias(curl(nonlinear_product(u, B, "cross")))


class _Workspace:
    """Scratch arrays for the fused right-hand side, one per grid."""

    def __init__(self, grid: GridSpec):
        shape = grid.physical_shape
        self.sym = np.empty((6,) + shape)
        self.cross = np.empty((3,) + shape)
        self.du = np.empty((3,) + grid.spectral_shape, dtype=np.complex128)
        self.dB = np.empty((3,) + grid.spectral_shape, dtype=np.complex128)
        self.J = np.empty((3,) + grid.spectral_shape, dtype=np.complex128)


_workspaces: dict[GridSpec, _Workspace] = {}


def _workspace(grid: GridSpec) -> _Workspace:
    ws = _workspaces.get(grid)
    if ws is None:
        ws = _workspaces[grid] = _Workspace(grid)
    return ws


def nonlinear_rhs(grid: GridSpec, uh: np.ndarray, Bh: np.ndarray, backend=None):
    """Fused nonlinear tendencies on raw coefficient arrays.

    Returns ``(Nu, NB, umax, Bmax)`` where ``Nu = -P div(u u^T - B B^T)``,
    ``NB = curl((u - J) x B)`` (both dealiased, fresh arrays) and the maxima
    are pointwise ``max |u|`` / ``max |B|`` on the grid for the step-size guard.
    """
    k = backend or _kernels.kernels
    ws = _workspace(grid)
    kx, ky, kz = grid.axis_wavenumbers
    mx, my, mz = grid.axis_masks
    k.curl_masked(Bh, kx, ky, kz, mx, my, mz, 1.0, ws.J)
    pu = inverse_array(grid, uh)
    pB = inverse_array(grid, Bh)
    pJ = inverse_array(grid, ws.J)
    k.sym_and_cross(pu, pB, pJ, ws.sym, ws.cross)
    T = forward_array(grid, ws.sym)
    X = forward_array(grid, ws.cross)
    Nu = np.empty_like(uh)
    NB = np.empty_like(Bh)
    k.momentum_project(T, kx, ky, kz, mx, my, mz, Nu)
    k.curl_masked(X, kx, ky, kz, mx, my, mz, 1.0, NB)
    umax = float(np.sqrt((pu * pu).sum(axis=0).max()))
    Bmax = float(np.sqrt((pB * pB).sum(axis=0).max()))
    return Nu, NB, umax, Bmax


def rhs(state: SolenoidalState, include_diffusion: bool = True, nonlinear: bool = True):
    """``(du/dt, dB/dt)`` as SpectralFields.

    ``du/dt = -P(u.grad u - B.grad B) [+ Lap u]`` and
    ``dB/dt = -(u.grad B - B.grad u) - curl((curl B) x B) [+ Lap B]``.
    """
    grid = state.grid
    if nonlinear:
        Nu, NB, _, _ = nonlinear_rhs(grid, state.u.coeffs, state.B.coeffs)
    else:
        Nu = np.zeros_like(state.u.coeffs)
        NB = np.zeros_like(state.B.coeffs)
    if include_diffusion:
        Nu = Nu - grid.k2 * state.u.coeffs
        NB = NB - grid.k2 * state.B.coeffs
    return SpectralField(grid, Nu), SpectralField(grid, NB)


def rhs_terms(state: SolenoidalState) -> RhsTerms:
    """Every nonlinear term separately, each by its own pseudospectral product."""
    u, B = state.u, state.B
    adv = nonlinear_product(u, u, "advection")
    lor = nonlinear_product(B, B, "advection")
    stretch = nonlinear_product(B, u, "advection")
    advect = nonlinear_product(u, B, "advection")
    hall = hall_term(B)
    H = leray_project(adv - lor)
    M = advect - stretch + hall
    return RhsTerms(adv, lor, stretch, advect, hall, H, dealias(M))


def _product_matrix(grid: GridSpec, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Coefficients of ``pa_i * pb_j`` for all ``i, j``: shape ``(3, 3, ...)``."""
    out = np.empty((3, 3) + grid.spectral_shape, dtype=np.complex128)
    for i in range(3):
        out[i] = forward_array(grid, pa[i][None] * pb)
    return np.where(grid.mask, out, 0.0)


def symbol_parts(state: SolenoidalState):
    """``(H_hat, M_linear, M_hall)`` from the product-coefficient matrices.

    ``H_hat = i (I - mu) (a - b) xi`` with ``a_kj = (u_k u_j)^``, ``b_kj = (B_k B_j)^``;
    ``M_linear = i C xi`` with ``C_kj = c_kj - c_jk``, ``c_kj = (u_j B_k)^``;
    ``M_hall = -xi x (xi_j (B_j B)^)``.
    """
    grid = state.grid
    pu = inverse_array(grid, state.u.coeffs)
    pB = inverse_array(grid, state.B.coeffs)
    a = _product_matrix(grid, pu, pu)
    b = _product_matrix(grid, pB, pB)
    c = np.transpose(_product_matrix(grid, pu, pB), (1, 0, 2, 3, 4))  # c[k, j] = (u_j B_k)^
    kx, ky, kz = grid.k_vec
    xi = (kx, ky, kz)
    k2 = kx * kx + ky * ky + kz * kz
    inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)

    S = a - b
    Sxi = np.stack([sum(S[k_, j] * xi[j] for j in range(3)) for k_ in range(3)])
    kS = (kx * Sxi[0] + ky * Sxi[1] + kz * Sxi[2]) * inv
    H = 1j * np.stack([Sxi[i] - xi[i] * kS for i in range(3)])

    C = c - np.transpose(c, (1, 0, 2, 3, 4))
    M_lin = 1j * np.stack([sum(C[k_, j] * xi[j] for j in range(3)) for k_ in range(3)])

    v = np.stack([sum(xi[j] * b[j, i] for j in range(3)) for i in range(3)])  # xi_j (B_j B_i)^
    cross = np.stack([
        ky * v[2] - kz * v[1],
        kz * v[0] - kx * v[2],
        kx * v[1] - ky * v[0],
    ])
    M_hall = -cross
    mask = grid.mask
    return (
        SpectralField(grid, np.where(mask, H, 0.0)),
        SpectralField(grid, np.where(mask, M_lin, 0.0)),
        SpectralField(grid, np.where(mask, M_hall, 0.0)),
    )


def symbol_fields(state: SolenoidalState) -> tuple[SpectralField, SpectralField]:
    """``(H_hat, M_hat)`` with ``du/dt = Lap u - H`` and ``dB/dt = Lap B - M``."""
    H, M_lin, M_hall = symbol_parts(state)
    return H, M_lin + M_hall


def symbol_bound_constant(grid: GridSpec) -> float:
    """Constant forced by Young's convolution inequality under our normalization.

    Each product coefficient obeys ``|(f g)^(k)| <= sum_p |f_hat(p)||g_hat(k-p)|
    <= ||f||_2 ||g||_2 / L^3``; the symbol bounds pick up at most a factor 2
    from the two quadratic pieces, giving ``2 / L^3``.
    """
    return 2.0 / grid.volume


def symbol_bound_report(state: SolenoidalState) -> SymbolBounds:
    """Observed sups of ``|H_hat|/(|k| E)``, ``|i C xi|/(|k| E)``, ``|M_hall|/(|k|^2 ||B||^2)``."""
    grid = state.grid
    E = state.energy()
    EB = l2_norm_sq(state.B)
    if E == 0.0:
        return SymbolBounds(0.0, 0.0, 0.0)
    H, M_lin, M_hall = symbol_parts(state)
    k = grid.kmag
    nz = k > 0

    def sup(f: SpectralField, denom: np.ndarray) -> float:
        mag = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
        return float((mag[nz] / denom[nz]).max())

    ratio_H = sup(H, k * E)
    ratio_ML = sup(M_lin, k * E)
    ratio_MQ = sup(M_hall, k * k * EB) if EB > 0 else 0.0
    return SymbolBounds(ratio_H, ratio_ML, ratio_MQ)
