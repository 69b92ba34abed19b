"""Gevrey norms, the growing-radius schedule, and spectral-tail radius estimates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .spectral import GridSpec, SolenoidalState, SpectralField, sobolev_seminorm_sq

__all__ = [
    "GevreyParams",
    "GevreyRecord",
    "GevreyOverflowError",
    "InsufficientShellsError",
    "gevrey_norm",
    "log_gevrey_norm",
    "is_resolved",
    "tau_schedule",
    "gevrey_record",
    "track_gevrey",
    "RadiusEstimate",
    "radius_estimate",
    "InequalityCheck",
    "WeightInequalityReport",
    "weight_inequality_check",
    "weight_inequality_modewise",
    "interpolation_constant",
]

_LOG_MAX = math.log(np.finfo(float).max)


class GevreyOverflowError(OverflowError):
    def __init__(self, kmag: float, log_value: float):
        super().__init__(
            f"Gevrey norm overflows double range (log value {log_value:.1f}); "
            f"largest offending |k| = {kmag:.6g}"
        )
        self.kmag = kmag
        self.log_value = log_value


class InsufficientShellsError(ValueError):
    pass


@dataclass(frozen=True)
class GevreyParams:
    r: float = 11.0 / 4.0
    s: float = 11.0 / 8.0
    tau0: float = 0.5
    alpha_tau: float = 0.25

    def __post_init__(self):
        if not self.r > 1.5:
            raise ValueError(f"Sobolev index r must exceed 3/2, got {self.r}")
        if not self.s < 1.5:
            raise ValueError(f"auxiliary index s must be below 3/2, got {self.s}")
        if not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")
        if not 0 < self.alpha_tau <= 0.5:
            raise ValueError(f"alpha_tau must lie in (0, 1/2], got {self.alpha_tau}")
        if self.alpha_tau > self.tau0**2 * (1 + 1e-12):
            raise ValueError(f"alpha_tau = {self.alpha_tau} exceeds tau0^2 = {self.tau0 ** 2}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GevreyRecord:
    t: float
    tau: float
    J_r: float
    H_r: float
    G_r: float
    K_r: float
    N_r: float
    M_r: float
    ratio: float = math.nan
    tau_est: float = math.nan
    resolved: bool = True

    def as_row(self) -> list:
        return [self.t, self.tau, self.J_r, self.H_r, self.G_r, self.K_r, self.N_r, self.M_r,
                self.ratio, self.tau_est, int(self.resolved)]


GEVREY_CSV_COLUMNS = ["t", "tau", "J_r", "H_r", "G_r", "K_r", "N_r", "M_r", "ratio", "tau_est",
                      "resolved_flag"]


def _power(f: SpectralField) -> np.ndarray:
    return np.sum(np.abs(f.coeffs) ** 2, axis=0)


def _log_terms(grid: GridSpec, power: np.ndarray, r: float, tau: float) -> np.ndarray:
    out = np.empty(grid.spectral_shape)
    _kernels.kernels.log_weighted_terms(power, np.ascontiguousarray(grid.kmag), float(tau),
                                        2.0 * float(r), out)
    return out


def log_gevrey_norm(f: SpectralField, r: float, tau: float) -> float:
    """``log ||Lambda^r e^{tau Lambda} f||_2^2`` by log-sum-exp (``-inf`` for zero)."""
    if r < 0 or tau < 0:
        raise ValueError(f"gevrey norm needs r >= 0 and tau >= 0, got r={r}, tau={tau}")
    grid = f.grid
    logs = _log_terms(grid, _power(f), r, tau)
    top = float(logs.max())
    if not math.isfinite(top):
        return -math.inf
    s = float(np.sum(grid.weights * np.exp(logs - top)))
    return top + math.log(s) + math.log(grid.volume)


def gevrey_norm(f: SpectralField, r: float, tau: float) -> float:
    """``||Lambda^r e^{tau Lambda} f||_2^2 = L^3 sum |k|^{2r} e^{2 tau |k|} |f_hat|^2``."""
    if r < 0 or tau < 0:
        raise ValueError(f"gevrey norm needs r >= 0 and tau >= 0, got r={r}, tau={tau}")
    if not np.isfinite(f.coeffs).all():
        raise ValueError("field has non-finite coefficients")
    grid = f.grid
    if 2.0 * tau * float(grid.kmag.max()) < 600.0:
        power = _power(f)
        mult = np.exp(2.0 * tau * grid.kmag)
        if r != 0:
            mult = mult * grid.k2**r
        val = float(grid.volume * np.sum(grid.weights * mult * power))
        if math.isfinite(val):
            return val
    logs = _log_terms(grid, _power(f), r, tau)
    lv = log_gevrey_norm(f, r, tau)
    if lv > _LOG_MAX:
        bad = logs + math.log(grid.volume) > _LOG_MAX
        idx = np.argmax(np.where(bad, grid.kmag, -1.0)) if bad.any() else np.argmax(logs)
        raise GevreyOverflowError(float(grid.kmag.ravel()[idx]), lv)
    return math.exp(lv)


@lru_cache(maxsize=8)
def _top_shell(grid: GridSpec) -> np.ndarray:
    """Retained modes on the outer face layer of the dealias cube."""
    c = grid.cutoff
    mx = np.abs(grid.m_full)[:, None, None]
    my = np.abs(grid.m_full)[None, :, None]
    mz = np.abs(grid.m_half)[None, None, :]
    cheb = np.maximum(np.maximum(mx, my), mz)
    return grid.mask & (cheb == c)


def is_resolved(state: SolenoidalState, r: float, tau: float, tol: float = 1e-6) -> bool:
    """True if the top dealiased shell carries < ``tol`` of the Gevrey sum."""
    grid = state.grid
    logs = _log_terms(grid, _power(state.u) + _power(state.B), r, tau)
    top = float(logs.max())
    if not math.isfinite(top):
        return True
    w = grid.weights * np.exp(logs - top)
    total = float(w.sum())
    return float(w[_top_shell(grid)].sum()) < tol * total


def tau_schedule(t: float, params: GevreyParams) -> float:
    """``tau(t) = sqrt(tau0^2 + alpha t)``; ``tau tau' = alpha / 2`` throughout."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return math.sqrt(params.tau0**2 + params.alpha_tau * t)


def gevrey_record(state: SolenoidalState, params: GevreyParams, gamma: float | None = None,
                  with_radius: bool = True) -> GevreyRecord:
    """All six norms at ``tau = tau_schedule(t)`` plus the bound ratio ``M_r tau^{2(gamma+r)}``."""
    r = params.r
    tau = tau_schedule(state.time, params)
    J = sobolev_seminorm_sq(state.u, r)
    H = sobolev_seminorm_sq(state.B, r)
    G = gevrey_norm(state.u, r, tau)
    K = gevrey_norm(state.B, r, tau)
    M = G + K
    ratio = M * tau ** (2.0 * (gamma + r)) if gamma is not None else math.nan
    tau_est = math.nan
    if with_radius:
        try:
            tau_est = radius_estimate(state).tau_est
        except InsufficientShellsError:
            pass
    return GevreyRecord(state.time, tau, J, H, G, K, J + H, M, ratio, tau_est,
                        is_resolved(state, r, tau))


def track_gevrey(states, params: GevreyParams, gamma: float | None = None) -> list[GevreyRecord]:
    return [gevrey_record(s, params, gamma) for s in states]


def with_gamma(records: list[GevreyRecord], params: GevreyParams, gamma: float) -> list[GevreyRecord]:
    """Recompute the bound ratio of stored records for a new ``gamma``."""
    out = []
    for rec in records:
        d = asdict(rec)
        d["ratio"] = rec.M_r * rec.tau ** (2.0 * (gamma + params.r))
        out.append(GevreyRecord(**d))
    return out


# ----------------------------------------------------------------- radius proxy

@dataclass(frozen=True)
class RadiusEstimate:
    tau_est: float
    fit_residual: float
    n_shells: int
    k_window: tuple[float, float]

    @property
    def radius(self) -> float:
        """Analyticity-radius reading ``tau / sqrt(3)`` of the tail slope."""
        return self.tau_est / math.sqrt(3.0)


@lru_cache(maxsize=8)
def _shell_index(grid: GridSpec) -> np.ndarray:
    idx = np.rint(grid.kmag / grid.k0).astype(np.int64)
    return np.where(grid.mask, idx, -1)


def radius_estimate(obj, floor: float = 1e-12, min_shells: int = 8) -> RadiusEstimate:
    """Exponential decay rate of the spectrum's shell maxima.

    Fits ``-log(max_shell |w_hat|)`` against ``|k|`` by least squares over
    the shells after the amplitude peak that stay above ``floor`` times the
    global maximum.  Accepts a :class:`SpectralField` or a state (then the
    combined amplitude ``sqrt(|u_hat|^2 + |B_hat|^2)`` is used).
    """
    if isinstance(obj, SolenoidalState):
        grid = obj.grid
        amp = np.sqrt(_power(obj.u) + _power(obj.B))
    else:
        grid = obj.grid
        amp = np.sqrt(_power(obj))
    shell = _shell_index(grid)
    kmag = grid.kmag
    valid = (shell > 0)
    flat_s = shell[valid]
    flat_a = amp[valid]
    flat_k = kmag[valid]
    nshell = int(flat_s.max()) + 1 if flat_s.size else 0
    best = np.full(nshell, -1.0)
    kbest = np.zeros(nshell)
    order = np.lexsort((-flat_a, flat_s))  # per shell, largest amplitude first
    first = np.ones(order.size, dtype=bool)
    first[1:] = flat_s[order][1:] != flat_s[order][:-1]
    sel = order[first]
    best[flat_s[sel]] = flat_a[sel]
    kbest[flat_s[sel]] = flat_k[sel]
    top = best.max() if nshell else 0.0
    if top <= 0:
        raise InsufficientShellsError("field has no populated shells")
    peak = int(np.argmax(best))
    tail = []
    for s in range(peak + 1, nshell):
        if best[s] > floor * top:
            tail.append(s)
        else:
            break
    if len(tail) < min_shells:
        raise InsufficientShellsError(
            f"only {len(tail)} populated shells beyond the peak (need {min_shells})"
        )
    ks = kbest[tail]
    y = -np.log(best[tail])
    A = np.vstack([ks, np.ones_like(ks)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return RadiusEstimate(max(float(coef[0]), 0.0), float(np.sqrt(np.mean(resid**2))), len(tail),
                          (float(ks[0]), float(ks[-1])))


# ---------------------------------------------------------- interpolation bounds

@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs_core: float
    implied_constant: float
    ceiling: float
    degenerate: bool = False

    @property
    def holds(self) -> bool:
        return self.implied_constant <= self.ceiling * (1 + 1e-12)


@dataclass(frozen=True)
class WeightInequalityReport:
    exp_split: InequalityCheck             # ||L^r e u||^2 <= 2||L^r u||^2 + 2 tau^2 ||L^{r+1} e u||^2
    exp_shift: InequalityCheck             # ||L^p e u||^2 <= e||L^p u||^2 + (2tau)^{2q}||L^{p+q} e u||^2
    interpolation: InequalityCheck | None  # ||L^q u||^2 <= c tau^{p-2q} ||u|| ||L^p e u||

    @property
    def holds(self) -> bool:
        checks = [self.exp_split, self.exp_shift] + ([self.interpolation] if self.interpolation else [])
        return all(c.holds for c in checks)


def interpolation_constant(p: float, q: float) -> float:
    """Sharp ``c(p, q) = sup_x x^{2q-p} e^{-x} = ((2q - p)/e)^{2q-p}``."""
    a = 2.0 * q - p
    if a < 0:
        raise ValueError("interpolation inequality needs 2q >= p")
    return 1.0 if a == 0 else (a / math.e) ** a


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def weight_inequality_check(f: SpectralField, p: float, q: float, tau: float,
                            ceiling: float | None = None) -> WeightInequalityReport:
    """Evaluate the three exponential-weight inequalities on ``f``.

    The first two are constant-free (ceiling 1).  The interpolation bound is
    checked against ``ceiling`` (default: the sharp modewise constant
    :func:`interpolation_constant`); it is skipped (``None``) outside its
    domain ``2q >= p >= 0, tau > 0``.
    """
    if p < 0 or q < 0 or tau < 0:
        raise ValueError(f"parameters must be nonnegative, got p={p}, q={q}, tau={tau}")
    Gp = gevrey_norm(f, p, tau)
    Sp = sobolev_seminorm_sq(f, p)
    lhs1 = Gp
    rhs1 = 2.0 * Sp + 2.0 * tau**2 * gevrey_norm(f, p + 1, tau)
    c1 = InequalityCheck("exp_split", lhs1, rhs1, _ratio(lhs1, rhs1), 1.0)

    rhs2 = math.e * Sp + (2.0 * tau) ** (2.0 * q) * gevrey_norm(f, p + q, tau)
    c2 = InequalityCheck("exp_shift", Gp, rhs2, _ratio(Gp, rhs2), 1.0, degenerate=(q == 0))

    c3 = None
    if 2 * q >= p and tau > 0:
        lhs3 = sobolev_seminorm_sq(f, q)
        core = tau ** (p - 2.0 * q) * math.sqrt(sobolev_seminorm_sq(f, 0) * Gp)
        ceil3 = interpolation_constant(p, q) if ceiling is None else ceiling
        c3 = InequalityCheck("interpolation", lhs3, core, _ratio(lhs3, core), ceil3)
    return WeightInequalityReport(c1, c2, c3)


def weight_inequality_modewise(rho, tau: float, p: float, q: float) -> dict[str, np.ndarray]:
    """Single-mode slack (RHS - LHS, >= 0 when the inequality holds) at wavenumbers ``rho``."""
    rho = np.asarray(rho, dtype=float)
    x = tau * rho
    e2 = np.exp(2.0 * x)
    out = {
        "exp_split": 2.0 + 2.0 * x**2 * e2 - e2,
        "exp_shift": math.e + (2.0 * x) ** (2.0 * q) * e2 - e2 if q > 0 else np.full_like(rho, math.e),
    }
    if 2 * q >= p and tau > 0:
        # rho^{2q} <= c tau^{p-2q} rho^p e^{tau rho}  <=>  x^{2q-p} e^{-x} <= c
        out["interpolation"] = interpolation_constant(p, q) - x ** (2.0 * q - p) * np.exp(-x)
    return out
