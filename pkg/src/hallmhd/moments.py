"""Moment matrices, the weighted first moment, and the Sobolev energy-inequality report."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .decay import DecayFit, energy_series, fit_exponent, power_law_tail, trajectory_states
from .rhs import rhs
from .spectral import GridSpec, SolenoidalState, SpectralField, inverse_array

__all__ = [
    "MomentMatrices",
    "M0Membership",
    "InsufficientDecayError",
    "UnresolvedStateError",
    "centred_coordinates",
    "moment_integrands",
    "first_moment",
    "assemble_moments",
    "moment_matrices",
    "m0_membership",
    "weighted_moment",
    "boundary_fraction",
    "HmReport",
    "hm_norm_sq",
    "hm_energy_report",
    "LinearEnvelope",
    "linear_envelope",
]


class InsufficientDecayError(ValueError):
    """Energy decays too slowly for the time integrals to converge."""


class UnresolvedStateError(ValueError):
    """The spectrum reaches the dealias cutoff at the requested order."""


def centred_coordinates(grid: GridSpec) -> np.ndarray:
    """Grid points as displacements from the box centre, shape ``(3, n, n, n)``."""
    return np.stack([np.broadcast_to(c - 0.5 * grid.box_length, grid.physical_shape)
                     for c in grid.coordinates()])


def _pair_integrals(grid: GridSpec, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """``int a_i b_j dx`` by grid quadrature, shape ``(3, 3)``."""
    cell = grid.dx**3
    return np.einsum("ixyz,jxyz->ij", pa, pb) * cell


@dataclass(frozen=True)
class MomentMatrices:
    A_tilde: np.ndarray   # int_0^T int (u_i u_j - B_i B_j)
    C_tilde: np.ndarray   # int_0^T int (u_i B_j - B_i u_j)
    xB0: np.ndarray       # int x_j B0_i
    horizon: float
    tail_bound: float     # power-law estimate of the neglected int_T^inf E
    tail_fraction: float  # tail_bound / int_0^T E
    decay: DecayFit | None

    @property
    def symmetry_defect(self) -> float:
        return _rel_frob(self.A_tilde - self.A_tilde.T, self.A_tilde)

    @property
    def antisymmetry_defect(self) -> float:
        return _rel_frob(self.C_tilde + self.C_tilde.T, self.C_tilde)

    def to_dict(self) -> dict:
        return {
            "A_tilde": self.A_tilde.tolist(),
            "C_tilde": self.C_tilde.tolist(),
            "xB0": self.xB0.tolist(),
            "horizon": self.horizon,
            "tail_bound": self.tail_bound,
            "tail_fraction": self.tail_fraction,
            "symmetry_defect": self.symmetry_defect,
            "antisymmetry_defect": self.antisymmetry_defect,
        }


def _rel_frob(num: np.ndarray, ref: np.ndarray) -> float:
    d = float(np.linalg.norm(ref))
    n = float(np.linalg.norm(num))
    return n / d if d > 0 else 0.0


def moment_integrands(state: SolenoidalState) -> tuple[np.ndarray, np.ndarray]:
    """Spatial integrals ``int (u_i u_j - B_i B_j)`` and ``int (u_i B_j - B_i u_j)`` at one instant."""
    grid = state.grid
    pu = inverse_array(grid, state.u.coeffs)
    pB = inverse_array(grid, state.B.coeffs)
    A = _pair_integrals(grid, pu, pu) - _pair_integrals(grid, pB, pB)
    C = _pair_integrals(grid, pu, pB) - _pair_integrals(grid, pB, pu)
    return A, C


def first_moment(B0: SpectralField) -> np.ndarray:
    """``<x, B0>_ij = int x_j B0_i dx`` with ``x`` measured from the box centre."""
    grid = B0.grid
    return _pair_integrals(grid, inverse_array(grid, B0.coeffs), centred_coordinates(grid))


def assemble_moments(t, A_t, C_t, E, xB0: np.ndarray,
                     window: tuple[float, float] | None = None) -> MomentMatrices:
    """Trapezoid-integrate sampled integrands and bound the neglected tail.

    The tail ``int_T^inf E`` is estimated from the power law fitted to ``E``
    on ``window`` (default: the later half of the samples with ``t >= 1``).
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if t.size < 2:
        raise ValueError("moment matrices need at least two samples")
    A = trapezoid(np.asarray(A_t), t, axis=0)
    C = trapezoid(np.asarray(C_t), t, axis=0)
    integral = float(trapezoid(E, t))
    fit = None
    tail = 0.0
    if integral > 0:
        if window is None:
            late = t[t >= max(1.0, t[len(t) // 2])]
            window = (float(late[0]), float(t[-1]))
        fit = fit_exponent(t, E, window)
        if fit.exponent <= 1:
            raise InsufficientDecayError(
                f"fitted energy exponent {fit.exponent:.3f} <= 1: time integrals diverge"
            )
        tail = power_law_tail(fit, float(t[-1]))
    frac = tail / integral if integral > 0 else 0.0
    return MomentMatrices(A, C, np.asarray(xB0), float(t[-1]), tail, frac, fit)


def moment_matrices(traj, B0: SpectralField | None = None,
                    window: tuple[float, float] | None = None) -> MomentMatrices:
    """Time-integrated moment matrices over the stored states of ``traj``.

    Spatial integrals use grid quadrature, time integrals the trapezoid rule
    from the first to the last state.  ``B0`` defaults to the earliest
    magnetic field.
    """
    states = trajectory_states(traj)
    if len(states) < 2:
        raise ValueError("moment matrices need at least two states")
    B0 = states[0].B if B0 is None else B0
    parts = [moment_integrands(s) for s in states]
    t, E = energy_series(states)
    return assemble_moments(t, [p[0] for p in parts], [p[1] for p in parts], E, first_moment(B0),
                            window)


@dataclass(frozen=True)
class M0Membership:
    is_member: bool
    scalar_defect: float
    C_defect: float
    horizon_error: float   # relative error bar on both defects from the truncated tail

    def to_dict(self) -> dict:
        return {"is_member": self.is_member, "scalar_defect": self.scalar_defect,
                "C_defect": self.C_defect, "horizon_error": self.horizon_error}


def m0_membership(mm: MomentMatrices, tol: float = 1e-2) -> M0Membership:
    """Is ``A_tilde`` scalar and ``C_tilde = <x, B0>``?"""
    A = mm.A_tilde
    scalar = _rel_frob(A - np.trace(A) / 3.0 * np.eye(3), A)
    denom = max(float(np.linalg.norm(mm.C_tilde)), float(np.linalg.norm(mm.xB0)))
    cdef = float(np.linalg.norm(mm.C_tilde - mm.xB0)) / denom if denom > 0 else 0.0
    return M0Membership(bool(scalar < tol and cdef < tol), scalar, cdef, mm.tail_fraction)


def _density(state: SolenoidalState) -> np.ndarray:
    grid = state.grid
    pu = inverse_array(grid, state.u.coeffs)
    pB = inverse_array(grid, state.B.coeffs)
    return (pu * pu).sum(axis=0) + (pB * pB).sum(axis=0)


def weighted_moment(state: SolenoidalState) -> float:
    """``int |x - x_c| (|u|^2 + |B|^2) dx`` with ``x_c`` the box centre."""
    grid = state.grid
    r = np.sqrt((centred_coordinates(grid) ** 2).sum(axis=0))
    return float(np.sum(r * _density(state)) * grid.dx**3)


def boundary_fraction(state: SolenoidalState, width: float = 0.1) -> float:
    """Share of the energy within ``width * L`` of the box faces."""
    grid = state.grid
    dens = _density(state)
    total = float(dens.sum())
    if total == 0:
        return 0.0
    cheb = np.abs(centred_coordinates(grid)).max(axis=0)
    outer = cheb > (0.5 - width) * grid.box_length
    return float(dens[outer].sum()) / total


# ------------------------------------------------------------ H^m energy report

def _hm_weight(grid: GridSpec, m: float) -> np.ndarray:
    return (1.0 + grid.k2) ** m


def hm_norm_sq(f: SpectralField, m: float) -> float:
    """``||f||_{H^m}^2 = L^3 sum (1 + |k|^2)^m |f_hat|^2``."""
    grid = f.grid
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    return float(grid.volume * np.sum(grid.weights * _hm_weight(grid, m) * power))


def _hm_inner(a: SpectralField, b: SpectralField, m: float) -> float:
    grid = a.grid
    prod = np.sum((a.coeffs * np.conj(b.coeffs)).real, axis=0)
    return float(grid.volume * np.sum(grid.weights * _hm_weight(grid, m) * prod))


@dataclass(frozen=True)
class HmReport:
    lhs: float
    rhs_core: float
    implied_constant: float


def _check_resolved(state: SolenoidalState, m: int, tol: float):
    grid = state.grid
    power = np.sum(np.abs(state.u.coeffs) ** 2 + np.abs(state.B.coeffs) ** 2, axis=0)
    w = grid.weights * _hm_weight(grid, m + 1) * power
    total = float(w.sum())
    if total == 0:
        return
    c = grid.cutoff
    mx = np.abs(grid.m_full)[:, None, None]
    my = np.abs(grid.m_full)[None, :, None]
    mz = np.abs(grid.m_half)[None, None, :]
    top = grid.mask & (np.maximum(np.maximum(mx, my), mz) == c)
    share = float(w[top].sum()) / total
    if share >= tol:
        raise UnresolvedStateError(
            f"top dealiased shell carries {share:.2e} of the H^{m + 1} sum (tolerance {tol:.0e})"
        )


def hm_energy_report(state: SolenoidalState, m: int, nonlinear: bool = True,
                     resolution_tol: float = 1e-6) -> HmReport:
    """Measure the ``H^m`` energy inequality at one instant.

    ``lhs = 1/2 d/dt (||u||_{H^m}^2 + ||B||_{H^m}^2) + ||grad u||_{H^m}^2 + ||grad B||_{H^m}^2``
    with the time derivative taken from the right-hand side, and
    ``rhs_core = (||u||_{H^m}^2 + ||B||_{H^m}^2)(||grad u||_{H^m} + ||grad B||_{H^m})``.
    """
    if m < 0:
        raise ValueError("order m must be nonnegative")
    _check_resolved(state, m, resolution_tol)
    grid = state.grid
    weight = grid.weights * _hm_weight(grid, m) * grid.k2
    gu = float(grid.volume * np.sum(weight * np.sum(np.abs(state.u.coeffs) ** 2, axis=0)))
    gB = float(grid.volume * np.sum(weight * np.sum(np.abs(state.B.coeffs) ** 2, axis=0)))
    # The diffusive part of 1/2 d/dt cancels the gradient norms mode by mode,
    # so only the nonlinear tendencies survive in lhs.
    nu, nB = rhs(state, include_diffusion=False, nonlinear=nonlinear)
    lhs = _hm_inner(nu, state.u, m) + _hm_inner(nB, state.B, m)
    core = (hm_norm_sq(state.u, m) + hm_norm_sq(state.B, m)) * (math.sqrt(gu) + math.sqrt(gB))
    implied = lhs / core if core > 0 else 0.0
    return HmReport(lhs, core, implied)


@dataclass(frozen=True)
class LinearEnvelope:
    """``W(t) <= W0 + slope (t + 1)`` fitted on one part of a series, checked on the rest."""

    W0: float
    slope: float
    fit_until: float
    max_excess: float   # max of W - envelope over the held-out samples (<= 0 means it holds)

    @property
    def holds(self) -> bool:
        return self.slope > 0 and self.max_excess <= 0

    def __call__(self, t):
        return self.W0 + self.slope * (np.asarray(t, dtype=float) + 1.0)


def linear_envelope(t, W, fit_fraction: float = 0.5, slope_floor: float = 1e-6) -> LinearEnvelope:
    """Fit ``W(t) <= W(t_0) + slope (t+1)`` on the first ``fit_fraction`` of samples.

    The slope is the larger of the smallest one that bounds the fitted
    samples and the least-squares growth rate of ``W - W(t_0)`` against
    ``t - t_0``.  The second term matters for steady linear growth, where the
    bounding slope approaches the true rate only from below.  The slope is
    floored at ``slope_floor * W(t_0)`` so the envelope grows; the remaining
    samples are a held-out check of the linear-growth bound.
    """
    t = np.asarray(t, dtype=float)
    W = np.asarray(W, dtype=float)
    if t.size < 2:
        raise ValueError("linear envelope needs at least two samples")
    W0 = float(W[0])
    split = max(2, int(math.ceil(fit_fraction * t.size)))
    need = (W[1:split] - W0) / (t[1:split] + 1.0)
    dt = t[1:split] - t[0]
    rate = float(np.dot(dt, W[1:split] - W0) / np.dot(dt, dt)) if np.any(dt > 0) else 0.0
    bound = float(need.max()) if need.size else 0.0
    slope = max(bound, rate, slope_floor * max(abs(W0), 1e-300))
    held = slice(split, None)
    excess = W[held] - (W0 + slope * (t[held] + 1.0))
    return LinearEnvelope(W0, slope, float(t[split - 1]), float(excess.max()) if excess.size else -math.inf)
