"""Integrating-factor time stepping: accuracy, exactness on the linear part and guards."""

import math

import numpy as np
import pytest

from hallmhd.initial import make_initial_data, random_solenoidal_state
from hallmhd.spectral import GridSpec, SolenoidalState, SpectralField, l2_norm_sq
from hallmhd.stepper import (
    NonFiniteError,
    StabilityError,
    StepperConfig,
    evolve,
    stable_dt,
    step,
)


def _error(a: SolenoidalState, b: SolenoidalState) -> float:
    return math.sqrt(l2_norm_sq(a.u - b.u) + l2_norm_sq(a.B - b.B))


@pytest.fixture(scope="module")
def moderate_state():
    g = GridSpec(16, 2 * math.pi)
    return random_solenoidal_state(g, np.random.default_rng(5), slope=3.0, scale_u=2.0, scale_B=2.0)


def _solve(state, dt, t_end, scheme="IF-RK4"):
    cfg = StepperConfig(dt=dt, t_end=t_end, scheme=scheme)
    return evolve(state, cfg).final


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            StepperConfig(dt=0)
        with pytest.raises(ValueError):
            StepperConfig(dt=0.1, scheme="RK45")
        with pytest.raises(ValueError):
            StepperConfig(dt=0.1, snapshot_times=(2.0, 1.0))
        with pytest.raises(ValueError):
            StepperConfig(dt=0.1, t_end=-1)

    def test_to_dict(self):
        d = StepperConfig(dt=0.1, snapshot_times=(1, 2)).to_dict()
        assert d["snapshot_times"] == [1.0, 2.0] and d["scheme"] == "IF-RK4"


class TestStableDt:
    def test_diffusive_limit_for_quiet_fields(self):
        g = GridSpec(64, 32 * math.pi)
        assert stable_dt(g, 0.0, 0.0) == pytest.approx(0.4 / g.k_max**2)
        assert stable_dt(g, 0.0, 0.0) == pytest.approx(0.0774, abs=5e-5)

    def test_whistler_limit(self):
        g = GridSpec(16)
        assert stable_dt(g, 0.0, 10.0) == pytest.approx(0.4 / (10 * g.k_max**2))

    def test_advective_limit(self):
        g = GridSpec(16, 200.0)
        assert stable_dt(g, 1e3, 0.0) == pytest.approx(0.4 * g.dx / 1e3)

    def test_oversized_step_raises(self, moderate_state):
        cfg = StepperConfig(dt=1.0)
        with pytest.raises(StabilityError, match="exceeds stability bound"):
            step(moderate_state, cfg)


class TestAccuracy:
    def test_rk4_fourth_order(self, moderate_state):
        t_end = 0.08
        ref = _solve(moderate_state, 0.08 / 128, t_end)
        errs = [_error(_solve(moderate_state, t_end / n, t_end), ref) for n in (16, 32, 64)]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(3.5 < p < 4.5 for p in orders), orders

    def test_euler_first_order(self, moderate_state):
        t_end = 0.08
        ref = _solve(moderate_state, 0.08 / 128, t_end)
        errs = [_error(_solve(moderate_state, t_end / n, t_end, "IF-Euler"), ref) for n in (16, 32, 64)]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(0.8 < p < 1.2 for p in orders), orders

    def test_linear_part_exact(self, random_state):
        """With the nonlinearity off any step size reproduces ``exp(-|k|^2 t)`` exactly."""
        cfg = StepperConfig(dt=0.004, t_end=0.1, nonlinear=False)
        out = evolve(random_state, cfg).final
        E = np.exp(-random_state.grid.k2 * 0.1)
        np.testing.assert_allclose(out.u.coeffs, E * random_state.u.coeffs, rtol=1e-12, atol=1e-15)

    def test_linear_backward_step_inverts(self, random_state):
        cfg = StepperConfig(dt=0.005, nonlinear=False)
        back = step(step(random_state, cfg), cfg, dt=-0.005)
        assert _error(back, random_state) < 1e-12 * math.sqrt(random_state.energy())

    def test_nonlinear_backward_step_rejected(self, random_state):
        with pytest.raises(StabilityError):
            step(random_state, StepperConfig(dt=0.001), dt=-0.001)

    def test_energy_decreases(self, moderate_state):
        traj = evolve(moderate_state, StepperConfig(dt=0.004, t_end=0.2, snapshot_times=(0.05, 0.1, 0.15)),
                      observers={"E": lambda s: s.energy()})
        E = traj.column("E")
        assert np.all(np.diff(E) < 0)


def _unit_mode(grid, amplitude=1.0):
    c = np.zeros((3,) + grid.spectral_shape, complex)
    c[0, 0, 0, 1] = amplitude  # k = e_z, u along e_x
    return SpectralField(grid, c)


class TestLinearClosedForms:
    def test_unit_mode_single_step(self, grid16):
        """With the nonlinearity off one step of a ``|k| = 1`` mode multiplies it by ``exp(-dt)``."""
        f = _unit_mode(grid16)
        s = SolenoidalState(f, SpectralField.zeros(grid16))
        out = step(s, StepperConfig(dt=0.1, nonlinear=False))
        assert out.u.coeffs[0, 0, 0, 1].real == pytest.approx(math.exp(-0.1), rel=1e-14)
        assert out.time == pytest.approx(0.1)

    def test_zero_state_stays_zero(self, grid16):
        out = _solve(SolenoidalState.zeros(grid16), 0.005, 0.05)
        assert not out.u.coeffs.any() and not out.B.coeffs.any()

    def test_energy_observer_matches_heat_sum(self, random_state):
        """The recorded energy of a linear run equals ``sum exp(-2 k^2 t) |f_hat|^2``."""
        g = random_state.grid
        cfg = StepperConfig(dt=0.01, t_end=0.2, snapshot_times=(0.05, 0.1, 0.15), nonlinear=False)
        traj = evolve(random_state, cfg, observers={"E": lambda s: s.energy()})
        power = (np.abs(random_state.u.coeffs) ** 2 + np.abs(random_state.B.coeffs) ** 2).sum(axis=0)
        for t, E in zip(traj.times, traj.column("E")):
            exact = g.volume * np.sum(g.weights * np.exp(-2 * g.k2 * t) * power)
            assert E == pytest.approx(exact, rel=1e-10)


class TestEvolve:
    def test_snapshot_times_hit_exactly(self, random_state):
        cfg = StepperConfig(dt=0.003, t_end=0.05, snapshot_times=(0.01, 0.0275))
        traj = evolve(random_state, cfg, observers={"t": lambda s: s.time}, keep_states=(0.0275,))
        assert traj.times == [0.0, 0.01, 0.0275, 0.05]
        assert traj.column("t").tolist() == traj.times
        assert list(traj.states) == [0.0275]
        assert traj.state_at(0.0275).time == 0.0275
        with pytest.raises(KeyError):
            traj.state_at(0.01)

    def test_zero_duration(self, random_state):
        traj = evolve(random_state, StepperConfig(dt=0.01, t_end=0.0), observers={"E": lambda s: s.energy()})
        assert traj.times == [0.0] and traj.steps == 0
        assert traj.final.energy() == random_state.energy()

    def test_progress_callback(self, random_state):
        seen = []
        evolve(random_state, StepperConfig(dt=0.004, t_end=0.02, snapshot_times=(0.01,)), progress=seen.append)
        assert seen == [0.01, 0.02]

    def test_non_finite_detected(self, grid16):
        c = np.zeros((3,) + grid16.spectral_shape, complex)
        c[0, 1, 0, 0] = np.nan
        bad = SolenoidalState(SpectralField(grid16, c), SpectralField.zeros(grid16))
        with pytest.raises(NonFiniteError):
            evolve(bad, StepperConfig(dt=0.001, t_end=0.01))

    def test_deterministic(self):
        g = GridSpec(16, 8.0)
        s = make_initial_data(0, 0.1, 3, g)
        cfg = StepperConfig(dt=0.005, t_end=0.05)
        a, b = evolve(s, cfg).final, evolve(s, cfg).final
        np.testing.assert_array_equal(a.u.coeffs, b.u.coeffs)
