"""Integrating-factor time stepping.

The Laplacian is absorbed exactly: every scheme multiplies coefficients by
``exp(-|k|^2 h)`` and only the nonlinear remainder is approximated.  With the
nonlinearity switched off a step is exactly the heat multiplier.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .rhs import nonlinear_rhs
from .spectral import GridSpec, SolenoidalState, SpectralField

__all__ = [
    "StepperConfig",
    "StabilityError",
    "NonFiniteError",
    "Trajectory",
    "stable_dt",
    "step",
    "evolve",
]

log = logging.getLogger(__name__)

SCHEMES = ("IF-RK4", "IF-Euler")


class StabilityError(RuntimeError):
    """Requested step exceeds the stability bound."""


class NonFiniteError(FloatingPointError):
    """A coefficient became NaN/Inf during time stepping."""

    def __init__(self, time: float):
        super().__init__(f"non-finite coefficients at t = {time:.6g}")
        self.time = time


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "IF-RK4"
    t_end: float = 1.0
    snapshot_times: tuple[float, ...] = ()
    safety: float = 0.4
    nonlinear: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        times = tuple(float(t) for t in self.snapshot_times)
        if list(times) != sorted(times):
            raise ValueError("snapshot_times must be sorted")
        object.__setattr__(self, "snapshot_times", times)
        if not self.safety > 0:
            raise ValueError("safety must be positive")

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "scheme": self.scheme,
            "t_end": self.t_end,
            "snapshot_times": list(self.snapshot_times),
            "safety": self.safety,
            "nonlinear": self.nonlinear,
        }


def stable_dt(grid: GridSpec, umax: float, Bmax: float, safety: float = 0.4) -> float:
    """``safety * min(1/|k_max|^2, dx/(max|u| + max|B|), 1/(|k_max|^2 max|B|))``.

    The last term is the whistler limit: Hall waves have frequency ``~ |k|^2 |B|``.
    """
    kmax2 = grid.k_max**2
    bound = 1.0 / kmax2
    speed = umax + Bmax
    if speed > 0:
        bound = min(bound, grid.dx / speed)
    if Bmax > 0:
        bound = min(bound, 1.0 / (kmax2 * Bmax))
    return safety * bound


def _check_dt(grid, dt, umax, Bmax, safety, time):
    limit = stable_dt(grid, umax, Bmax, safety)
    if abs(dt) > limit * (1 + 1e-12):
        raise StabilityError(
            f"dt = {dt:.6g} exceeds stability bound {limit:.6g} at t = {time:.6g} "
            f"(max|u| = {umax:.3g}, max|B| = {Bmax:.3g}, |k_max| = {grid.k_max:.3g})"
        )


def _advance(grid: GridSpec, uh, Bh, h: float, scheme: str, nonlinear: bool, safety: float, time: float):
    """One step on raw arrays; returns new ``(uh, Bh)``."""
    E = np.exp(-grid.k2 * h)
    if not nonlinear:
        # the exact propagator is unconditionally stable; no bound applies
        return E * uh, E * Bh

    N1u, N1B, umax, Bmax = nonlinear_rhs(grid, uh, Bh)
    _check_dt(grid, h, umax, Bmax, safety, time)
    if not (math.isfinite(umax) and math.isfinite(Bmax)):
        raise NonFiniteError(time)

    if scheme == "IF-Euler":
        return E * (uh + h * N1u), E * (Bh + h * N1B)

    Eh = np.exp(-grid.k2 * (0.5 * h))
    u0h, B0h = Eh * uh, Eh * Bh
    N2u, N2B, _, _ = nonlinear_rhs(grid, u0h + (0.5 * h) * (Eh * N1u), B0h + (0.5 * h) * (Eh * N1B))
    N3u, N3B, _, _ = nonlinear_rhs(grid, u0h + (0.5 * h) * N2u, B0h + (0.5 * h) * N2B)
    N4u, N4B, _, _ = nonlinear_rhs(grid, E * uh + h * (Eh * N3u), E * Bh + h * (Eh * N3B))
    c = h / 6.0
    un = E * uh + c * (E * N1u + 2.0 * Eh * (N2u + N3u) + N4u)
    Bn = E * Bh + c * (E * N1B + 2.0 * Eh * (N2B + N3B) + N4B)
    return un, Bn


def step(state: SolenoidalState, cfg: StepperConfig, dt: float | None = None) -> SolenoidalState:
    """Advance ``state`` by ``dt`` (default ``cfg.dt``).

    A negative ``dt`` is accepted only with the nonlinearity disabled, where
    it runs the exact linear propagator backwards.
    """
    h = cfg.dt if dt is None else float(dt)
    if h < 0 and cfg.nonlinear:
        raise StabilityError("negative steps are only defined for the linear propagator")
    grid = state.grid
    un, Bn = _advance(grid, state.u.coeffs, state.B.coeffs, h, cfg.scheme, cfg.nonlinear,
                      cfg.safety, state.time)
    return SolenoidalState(SpectralField(grid, un), SpectralField(grid, Bn), max(state.time + h, 0.0))


Observer = Callable[[SolenoidalState], Any]


@dataclass
class Trajectory:
    """Output of :func:`evolve`: observer series at the snapshot times."""

    initial: SolenoidalState
    times: list[float] = field(default_factory=list)
    series: dict[str, list] = field(default_factory=dict)
    states: dict[float, SolenoidalState] = field(default_factory=dict)
    steps: int = 0
    final: SolenoidalState | None = None

    def state_at(self, t: float) -> SolenoidalState:
        for key, st in self.states.items():
            if math.isclose(key, t, rel_tol=1e-12, abs_tol=1e-12):
                return st
        raise KeyError(f"no stored snapshot at t = {t}")

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.series[name])


def evolve(
    state0: SolenoidalState,
    cfg: StepperConfig,
    observers: Mapping[str, Observer] | None = None,
    keep_states: bool | tuple[float, ...] = False,
    progress: Callable[[float], None] | None = None,
) -> Trajectory:
    """Integrate from ``state0`` to ``cfg.t_end``.

    Observers run on the initial state and at every snapshot time (hit
    exactly by shortening the step that would overshoot).  ``keep_states``
    stores every snapshot (``True``) or only those at the listed times.
    """
    observers = dict(observers or {})
    traj = Trajectory(initial=state0, series={name: [] for name in observers})
    grid = state0.grid
    t0 = state0.time

    def want(t):
        if keep_states is True:
            return True
        if keep_states is False:
            return False
        return any(math.isclose(t, k, rel_tol=1e-12, abs_tol=1e-12) for k in keep_states)

    def record(st: SolenoidalState):
        if not st.is_finite():
            raise NonFiniteError(st.time)
        traj.times.append(st.time)
        for name, fn in observers.items():
            traj.series[name].append(fn(st))
        if want(st.time):
            traj.states[st.time] = st

    record(state0)
    targets = [t for t in cfg.snapshot_times if t0 < t <= cfg.t_end + 1e-12]
    if cfg.t_end > t0 and (not targets or not math.isclose(targets[-1], cfg.t_end)):
        targets.append(cfg.t_end)

    uh, Bh = state0.u.coeffs, state0.B.coeffs
    t = t0
    for target in targets:
        while t < target - 1e-12:
            h = min(cfg.dt, target - t)
            if target - (t + h) < 1e-9 * cfg.dt:
                h = target - t
            uh, Bh = _advance(grid, uh, Bh, h, cfg.scheme, cfg.nonlinear, cfg.safety, t)
            traj.steps += 1
            t = t + h
        t = target
        st = SolenoidalState(SpectralField(grid, uh), SpectralField(grid, Bh), t)
        record(st)
        if progress is not None:
            progress(t)
        log.debug("t = %.4g, steps = %d", t, traj.steps)

    traj.final = SolenoidalState(SpectralField(grid, uh), SpectralField(grid, Bh), t)
    return traj
