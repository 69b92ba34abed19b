"""Exact heat flow from the same data, and the difference state ``D = (u - v, B - w)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import SolenoidalState, SpectralField

__all__ = ["HeatFlow", "heat_evolve", "difference_state", "restart_comparator"]


@dataclass(frozen=True)
class HeatFlow:
    """Heat evolution seeded from ``initial`` (at time ``initial.time``)."""

    initial: SolenoidalState

    @property
    def start(self) -> float:
        return self.initial.time


def heat_evolve(flow: HeatFlow, t: float) -> SolenoidalState:
    """State after elapsed time ``t``: coefficients times ``exp(-|k|^2 t)``."""
    if t < 0:
        raise ValueError(f"heat flow is only defined forward in time, got t = {t}")
    if t == 0:
        return flow.initial
    grid = flow.initial.grid
    E = np.exp(-grid.k2 * t)
    return SolenoidalState(
        SpectralField(grid, E * flow.initial.u.coeffs),
        SpectralField(grid, E * flow.initial.B.coeffs),
        flow.start + t,
    )


def difference_state(traj_state: SolenoidalState, flow: HeatFlow) -> SolenoidalState:
    """``D = (u - v, B - w)`` at ``traj_state.time``, formed in spectral space."""
    if traj_state.grid != flow.initial.grid:
        raise ValueError("trajectory state and heat flow live on different grids")
    elapsed = traj_state.time - flow.start
    if elapsed < -1e-12 * max(1.0, abs(flow.start)):
        raise ValueError(
            f"time mismatch: state at t = {traj_state.time} precedes heat flow start {flow.start}"
        )
    heat = heat_evolve(flow, max(elapsed, 0.0))
    return SolenoidalState(traj_state.u - heat.u, traj_state.B - heat.B, traj_state.time)


def restart_comparator(traj, T: float) -> HeatFlow:
    """Heat flow seeded with the trajectory's stored state at time ``T``."""
    if math.isclose(T, traj.initial.time, abs_tol=1e-12):
        return HeatFlow(traj.initial)
    try:
        return HeatFlow(traj.state_at(T))
    except KeyError:
        raise KeyError(f"T = {T} is not a stored snapshot of the trajectory") from None
