"""Decay-law diagnostics: energy series, power-law fits and exponent calculators.

Time series are plain ``(t, values)`` array pairs.  Functions that take a
trajectory accept a :class:`~hallmhd.stepper.Trajectory` with stored states
or any iterable of :class:`~hallmhd.spectral.SolenoidalState`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import linprog

from .spectral import GridSpec, SolenoidalState, sobolev_seminorm_sq

__all__ = [
    "DecayFit",
    "EnvelopeFit",
    "TwoSidedFit",
    "BootstrapResult",
    "PhiResult",
    "default_window",
    "trajectory_states",
    "energy_series",
    "derivative_series",
    "fit_exponent",
    "envelope_fit",
    "two_sided_fit",
    "bootstrap_exponent",
    "diff_decay_exponent",
    "phi_integral",
    "ball_integral",
    "splitting_radius",
    "splitting_weight",
    "power_law_tail",
]


def default_window(grid: GridSpec, t_lo: float = 2.0) -> tuple[float, float]:
    """``[2, 0.5 (L/2pi)^2]``: past the transient, before the lowest box mode decays."""
    return (t_lo, 0.5 * (grid.box_length / (2.0 * math.pi)) ** 2)


def trajectory_states(traj) -> list[SolenoidalState]:
    """States of a trajectory in time order."""
    if hasattr(traj, "states") and isinstance(traj.states, dict):
        states = list(traj.states.values())
        if traj.initial is not None and not any(s.time == traj.initial.time for s in states):
            states.append(traj.initial)
    else:
        states = list(traj)
    return sorted(states, key=lambda s: s.time)


def energy_series(traj) -> tuple[np.ndarray, np.ndarray]:
    """``E(t) = ||u||_2^2 + ||B||_2^2`` at every stored state."""
    states = trajectory_states(traj)
    return (np.array([s.time for s in states]), np.array([s.energy() for s in states]))


def derivative_series(traj, m: float) -> tuple[np.ndarray, np.ndarray]:
    """``||Lambda^m u||_2^2 + ||Lambda^m B||_2^2`` at every stored state."""
    if m < 0:
        raise ValueError(f"derivative order must be nonnegative, got {m}")
    states = trajectory_states(traj)
    if m == 0:
        return energy_series(states)
    vals = [sobolev_seminorm_sq(s.u, m) + sobolev_seminorm_sq(s.B, m) for s in states]
    return np.array([s.time for s in states]), np.array(vals)


# --------------------------------------------------------------------- fitting

@dataclass(frozen=True)
class DecayFit:
    """``value ~ prefactor * (t+1)^(-exponent)`` [``* (1 + log^2(t+1))`` if flagged]."""

    exponent: float
    prefactor: float
    window: tuple[float, float]
    residual: float
    log_correction: bool = False
    n_samples: int = 0

    def predict(self, t) -> np.ndarray:
        s = np.log1p(np.asarray(t, dtype=float))
        y = self.prefactor * np.exp(-self.exponent * s)
        return y * (1.0 + s**2) if self.log_correction else y

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def _windowed(t, y, window, min_samples=8):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise ValueError("time and value arrays differ in shape")
    lo, hi = window
    if lo < 1:
        raise ValueError(f"fit window must start at t >= 1 to exclude the transient, got {lo}")
    if hi <= lo:
        raise ValueError(f"empty fit window {window}")
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < min_samples:
        raise ValueError(f"only {int(sel.sum())} samples in window {window}; need {min_samples}")
    ys = y[sel]
    if not np.all(ys > 0):
        raise ValueError("series has nonpositive samples in the fit window")
    return t[sel], ys


def _lsq_loglog(s, logy):
    A = np.vstack([-s, np.ones_like(s)]).T
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    resid = logy - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def fit_exponent(t, y, window: tuple[float, float], allow_log: bool = False) -> DecayFit:
    """Least-squares fit of ``log y`` against ``log(t+1)`` on ``window``.

    With ``allow_log`` the model ``C (t+1)^(-p) (1 + log^2(t+1))`` is also
    fitted and kept (flagged) if its residual is lower.
    """
    ts, ys = _windowed(t, y, window)
    s = np.log1p(ts)
    logy = np.log(ys)
    p, logc, res = _lsq_loglog(s, logy)
    fit = DecayFit(p, math.exp(logc), (float(window[0]), float(window[1])), res, False, ts.size)
    if allow_log:
        p2, logc2, res2 = _lsq_loglog(s, logy - np.log1p(s**2))
        if res2 < res:
            fit = DecayFit(p2, math.exp(logc2), fit.window, res2, True, ts.size)
    return fit


@dataclass(frozen=True)
class EnvelopeFit:
    quantile: float
    exponent: float
    prefactor: float
    window: tuple[float, float]


def envelope_fit(t, y, window: tuple[float, float], quantile: float) -> EnvelopeFit:
    """Quantile regression of ``log y`` on ``log(t+1)`` (pinball loss, solved as an LP)."""
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    ts, ys = _windowed(t, y, window)
    s = np.log1p(ts)
    logy = np.log(ys)
    n = s.size
    # variables: [slope, intercept, r_plus (n), r_minus (n)]
    c = np.concatenate([[0.0, 0.0], np.full(n, quantile), np.full(n, 1.0 - quantile)])
    A_eq = np.hstack([np.vstack([-s, np.ones(n)]).T, np.eye(n), -np.eye(n)])
    bounds = [(None, None), (None, None)] + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=logy, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"quantile regression failed: {res.message}")
    p, logc = res.x[0], res.x[1]
    return EnvelopeFit(quantile, float(p), float(math.exp(logc)), (float(window[0]), float(window[1])))


@dataclass(frozen=True)
class TwoSidedFit:
    lower: EnvelopeFit   # 0.1 quantile: the series stays above it
    upper: EnvelopeFit   # 0.9 quantile: the series stays below it
    central: DecayFit

    @property
    def spread(self) -> float:
        return abs(self.lower.exponent - self.upper.exponent)


def two_sided_fit(t, y, window, lower_q: float = 0.1, upper_q: float = 0.9) -> TwoSidedFit:
    return TwoSidedFit(envelope_fit(t, y, window, lower_q), envelope_fit(t, y, window, upper_q),
                       fit_exponent(t, y, window))


def power_law_tail(fit: DecayFit, t_from: float) -> float:
    """``prefactor * int_{t_from}^inf (t+1)^(-p) dt``; infinite when ``p <= 1``."""
    if fit.log_correction:
        raise ValueError("tail integral is only implemented for pure power laws")
    p = fit.exponent
    if p <= 1:
        return math.inf
    return fit.prefactor * (t_from + 1.0) ** (1.0 - p) / (p - 1.0)


# ------------------------------------------------------------- exponent rules

@dataclass(frozen=True)
class BootstrapResult:
    exponent: float
    trace: tuple[float, ...]
    saturated: bool   # True when beta reached 1, so the cap min(alpha, 5/2) applies

    def format_trace(self) -> str:
        def fmt(x):
            return f"{x:g}"
        return ", ".join(fmt(b) for b in self.trace) + f" → {fmt(self.exponent)}"


def bootstrap_exponent(alpha: float) -> BootstrapResult:
    """Iterate ``beta <- min(alpha, 2 beta + 1/2)`` from 0 while ``beta < 1``.

    Once ``beta >= 1`` the time integral of the energy is bounded and the
    rate is ``min(alpha, 5/2)``; otherwise the iteration stops at its
    fixpoint ``beta = alpha``.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    beta = 0.0
    trace = [beta]
    while beta < 1:
        nxt = min(alpha, 2.0 * beta + 0.5)
        if nxt == beta:
            return BootstrapResult(beta, tuple(trace), False)
        beta = nxt
        trace.append(beta)
    return BootstrapResult(min(alpha, 2.5), tuple(trace), True)


def diff_decay_exponent(alpha: float) -> tuple[float, bool]:
    """Decay exponent of the difference from the heat flow, and the ``log^2`` flag."""
    if not 0 <= alpha <= 2.5:
        raise ValueError(f"alpha must lie in [0, 5/2], got {alpha}")
    if alpha > 1:
        return 2.5, False
    if alpha == 1:
        return 2.5, True
    return 2.5 - 2.0 * (1.0 - alpha), False


@dataclass(frozen=True)
class PhiResult:
    t: np.ndarray
    phi: np.ndarray
    classification: str        # "bounded", "log" or "power"
    alpha_hat: float
    residuals: dict

    def to_dict(self) -> dict:
        return {"classification": self.classification, "alpha_hat": self.alpha_hat,
                "residuals": dict(self.residuals)}


def _model_residual(phi, basis):
    A = np.vstack([np.ones_like(basis), basis]).T if basis is not None else np.ones((phi.size, 1))
    coef, *_ = np.linalg.lstsq(A, phi, rcond=None)
    scale = max(float(np.abs(phi).max()), 1e-300)
    return float(np.sqrt(np.mean((phi - A @ coef) ** 2)) / scale)


def phi_integral(t, E, window: tuple[float, float] | None = None, log_band: float = 0.05) -> PhiResult:
    """``Phi(t) = int_0^t E`` by trapezoid, with a growth classification.

    The energy exponent ``alpha_hat`` is fitted on ``window`` (default: the
    second half of the samples, from ``t >= 1``).  Three models are fitted to
    ``Phi`` on the window, ``a + b (t+1)^(1-alpha_hat)``, ``a + b log(t+1)``
    and ``a``, and their relative rms residuals reported.  The class is
    ``"log"`` when ``|alpha_hat - 1| <= log_band``, ``"bounded"`` when
    ``alpha_hat > 1`` and ``"power"`` otherwise.
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    phi = cumulative_trapezoid(E, t, initial=0.0)
    if not np.any(E > 0):
        return PhiResult(t, phi, "bounded", math.inf, {})
    if window is None:
        late = t[t >= max(1.0, t[len(t) // 2])]
        window = (float(late[0]), float(t[-1]))
    fit = fit_exponent(t, E, window)
    a = fit.exponent
    sel = (t >= window[0]) & (t <= window[1])
    tw, pw = t[sel], phi[sel]
    res = {"log": _model_residual(pw, np.log1p(tw)), "constant": _model_residual(pw, None)}
    if abs(a - 1.0) > 1e-9:
        res["power"] = _model_residual(pw, (tw + 1.0) ** (1.0 - a))
    if abs(a - 1.0) <= log_band:
        cls = "log"
    elif a > 1:
        cls = "bounded"
    else:
        cls = "power"
    return PhiResult(t, phi, cls, a, res)


# ------------------------------------------------------------- Fourier splitting

def splitting_radius(t: float, gamma: float) -> float:
    """``g(t) = sqrt(gamma / (2 (t+1)))``, the shrinking splitting ball radius."""
    return math.sqrt(gamma / (2.0 * (t + 1.0)))


def splitting_weight(t: float, gamma: float) -> float:
    """``G(t) = exp(2 int_0^t g^2) = (t+1)^gamma`` (integrating factor, first convention)."""
    return (t + 1.0) ** gamma


def ball_integral(state: SolenoidalState, g: float) -> float:
    """``L^3 sum_{|k| <= g} (|u_hat|^2 + |B_hat|^2)``: energy inside the ball of radius ``g``.

    The measure factor ``L^3`` makes the full-lattice sum equal ``E(t)``.
    """
    if not g > 0:
        raise ValueError(f"ball radius must be positive, got {g}")
    grid = state.grid
    power = np.sum(np.abs(state.u.coeffs) ** 2, axis=0) + np.sum(np.abs(state.B.coeffs) ** 2, axis=0)
    inside = grid.kmag <= g * (1 + 1e-12)
    return float(grid.volume * np.sum(grid.weights[inside] * power[inside]))
