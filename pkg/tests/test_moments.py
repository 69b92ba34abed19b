"""Moment matrices, class membership, spatial localization and the Sobolev energy report."""

import math

import numpy as np
import pytest

from hallmhd.heat import HeatFlow, heat_evolve
from hallmhd.initial import make_initial_data, random_solenoidal_field
from hallmhd.moments import (
    InsufficientDecayError,
    MomentMatrices,
    UnresolvedStateError,
    assemble_moments,
    boundary_fraction,
    centred_coordinates,
    first_moment,
    hm_energy_report,
    hm_norm_sq,
    linear_envelope,
    m0_membership,
    moment_integrands,
    moment_matrices,
    weighted_moment,
)
from hallmhd.spectral import GridSpec, SolenoidalState, SpectralField, forward, l2_norm_sq, resample


def _constant_state(grid):
    """``u = e_x``, ``B = 0``: unit energy density everywhere."""
    c = np.zeros((3,) + grid.spectral_shape, complex)
    c[0, 0, 0, 0] = 1.0
    return SolenoidalState(SpectralField(grid, c), SpectralField.zeros(grid))


@pytest.fixture(scope="module")
def heat_states():
    g = GridSpec(32, 8 * math.pi)
    flow = HeatFlow(make_initial_data(0, 0.1, 4, g))
    return [heat_evolve(flow, t) for t in np.concatenate([[0.0], np.geomspace(0.25, 8.0, 30)])]


@pytest.fixture(scope="module")
def smooth_state():
    return make_initial_data(0, 0.5, 9, GridSpec(32, 4 * math.pi))


class TestIntegrands:
    def test_aligned_fields_vanish(self, grid16, rng):
        f = random_solenoidal_field(grid16, rng)
        A, C = moment_integrands(SolenoidalState(f, f))
        assert np.abs(A).max() < 1e-14 and np.abs(C).max() < 1e-14

    def test_symmetry_structure(self, random_state):
        A, C = moment_integrands(random_state)
        np.testing.assert_allclose(A, A.T, atol=1e-14 * np.abs(A).max())
        np.testing.assert_allclose(C, -C.T, atol=1e-14 * np.abs(C).max())

    def test_trace_is_energy_difference(self, random_state):
        A, _ = moment_integrands(random_state)
        assert np.trace(A) == pytest.approx(l2_norm_sq(random_state.u) - l2_norm_sq(random_state.B), rel=1e-12)


class TestFirstMoment:
    def test_discrete_closed_form(self):
        """``B0 = (sin z, 0, 0)`` on the ``2 pi`` box.

        The quadrature of ``(z - pi) sin z`` is ``h^2 sum_j j sin(j h)`` with
        ``sum_j j sin(j h) = -(n/2) cot(pi/n)``, so only entry ``(0, 2)`` is
        nonzero and equals ``-4 pi^2 (2 pi^2 / n) cot(pi / n)``; the continuum
        value is ``-8 pi^3``.
        """
        n = 16
        g = GridSpec(n)
        _, _, z = g.coordinates()
        B = np.zeros((3,) + g.physical_shape)
        B[0] = np.sin(z)
        M = first_moment(forward(g, B))
        expected = -4 * math.pi**2 * (2 * math.pi**2 / n) / math.tan(math.pi / n)
        assert M[0, 2] == pytest.approx(expected, rel=1e-12)
        M[0, 2] = 0.0
        assert np.abs(M).max() < 1e-10
        assert expected == pytest.approx(-8 * math.pi**3, rel=0.02)

    def test_centred_coordinates(self, grid16):
        x = centred_coordinates(grid16)
        assert x.shape == (3,) + grid16.physical_shape
        assert x[0, 0, 0, 0] == pytest.approx(-math.pi)
        assert x[2, 0, 0, 8] == pytest.approx(0.0, abs=1e-15)


class TestAssemble:
    def test_tail_closed_form(self):
        """``E = (t+1)^-2`` gives the tail ``(T+1)^-1`` beyond the horizon."""
        t = np.linspace(0, 20, 401)
        E = (t + 1) ** -2.0
        zeros = np.zeros((t.size, 3, 3))
        mm = assemble_moments(t, zeros, zeros, E, np.zeros((3, 3)))
        assert mm.tail_bound == pytest.approx(1 / 21, rel=1e-6)
        # the denominator is the trapezoid integral, off by O(h^2) = 4e-4 here
        assert mm.tail_fraction == pytest.approx((1 / 21) / (1 - 1 / 21), rel=1e-3)
        assert mm.horizon == 20.0 and mm.decay.exponent == pytest.approx(2.0)

    def test_slow_decay_rejected(self):
        t = np.linspace(0, 20, 401)
        zeros = np.zeros((t.size, 3, 3))
        with pytest.raises(InsufficientDecayError):
            assemble_moments(t, zeros, zeros, (t + 1) ** -0.8, np.zeros((3, 3)))

    def test_time_integration(self):
        t = np.linspace(0, 2, 201)
        A_t = np.array([np.eye(3) * s for s in t])
        C_t = np.zeros_like(A_t)
        mm = assemble_moments(t, A_t, C_t, np.zeros_like(t), np.zeros((3, 3)))
        np.testing.assert_allclose(mm.A_tilde, 2.0 * np.eye(3), rtol=1e-12)
        assert mm.tail_bound == 0.0 and mm.decay is None

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            assemble_moments([0.0], [np.eye(3)], [np.eye(3)], [1.0], np.eye(3))


class TestMomentMatrices:
    def test_heat_flow_structure(self, heat_states):
        mm = moment_matrices(heat_states)
        assert mm.symmetry_defect < 1e-12
        assert mm.antisymmetry_defect < 1e-12
        assert mm.decay.exponent > 1
        assert 0 < mm.tail_fraction < 1
        d = mm.to_dict()
        assert np.array(d["A_tilde"]).shape == (3, 3)

    def test_zero_field_membership(self, heat_states):
        """With ``B = 0`` both ``C_tilde`` and ``<x, B0>`` vanish."""
        states = [SolenoidalState(s.u, SpectralField.zeros(s.grid), s.time) for s in heat_states]
        mm = moment_matrices(states)
        m0 = m0_membership(mm)
        assert m0.C_defect == 0.0
        assert np.all(mm.C_tilde == 0)

    def test_scalar_matrix_is_member(self):
        mm = MomentMatrices(2.0 * np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)), 10.0, 0.0, 0.0, None)
        m = m0_membership(mm)
        assert m.is_member and m.scalar_defect == 0.0
        assert m.to_dict()["is_member"] is True

    def test_needs_two_states(self, heat_states):
        with pytest.raises(ValueError):
            moment_matrices(heat_states[:1])


class TestSpatialDiagnostics:
    def test_weighted_moment_uniform_density(self):
        """Uniform density: the mean distance to the centre of a unit cube is 0.4802959782."""
        g = GridSpec(64, 2.0)
        W = weighted_moment(_constant_state(g))
        assert W / g.box_length**4 == pytest.approx(0.4802959782, rel=2e-3)

    def test_weighted_moment_single_mode(self):
        """``u = (cos(2 pi z / L), 0, 0)`` against Gauss-Legendre quadrature of the continuum integral.

        The integrand is even in every centred coordinate, so the oracle
        integrates one octant with a tensor Gauss rule and multiplies by 8.
        """
        L, n = 2.0, 64
        g = GridSpec(n, L)
        _, _, z = g.coordinates()
        u = np.zeros((3,) + g.physical_shape)
        u[0] = np.cos(2 * math.pi * z / L)
        s = SolenoidalState(forward(g, u), SpectralField.zeros(g))
        nodes, w = np.polynomial.legendre.leggauss(80)
        x = 0.25 * L * (nodes + 1)
        w = 0.25 * L * w
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        W3 = w[:, None, None] * w[None, :, None] * w[None, None, :]
        oracle = 8 * np.sum(W3 * np.sqrt(X**2 + Y**2 + Z**2) * np.cos(2 * math.pi * Z / L) ** 2)
        assert weighted_moment(s) == pytest.approx(oracle, rel=2e-3)
        assert weighted_moment(SolenoidalState.zeros(g)) == 0.0

    def test_boundary_fraction_uniform(self):
        """On 32 points per axis the shell ``> 0.4 L`` from the centre holds 7 layers of 32."""
        g = GridSpec(32, 5.0)
        assert boundary_fraction(_constant_state(g)) == pytest.approx(1 - (25 / 32) ** 3, rel=1e-12)

    def test_boundary_fraction_localized(self):
        """Projected data keeps algebraic tails, but well under 1% reaches the faces."""
        g = GridSpec(32, 16 * math.pi)
        assert boundary_fraction(make_initial_data(1.0, 0.1, 7, g)) < 1e-2
        assert boundary_fraction(SolenoidalState.zeros(g)) == 0.0


class TestHmReport:
    def test_norm_weights(self, grid16):
        c = np.zeros((3,) + grid16.spectral_shape, complex)
        c[1, 0, 0, 2] = 1.0  # |k| = 2, kz > 0 so counted twice
        f = SpectralField(grid16, c)
        assert hm_norm_sq(f, 1.5) == pytest.approx(grid16.volume * 2 * 5.0**1.5)

    def test_zero_state(self, grid16):
        rep = hm_energy_report(SolenoidalState.zeros(grid16), 2)
        assert (rep.lhs, rep.rhs_core, rep.implied_constant) == (0.0, 0.0, 0.0)

    def test_heat_only_is_zero(self, smooth_state):
        rep = hm_energy_report(smooth_state, 2, nonlinear=False)
        assert rep.lhs == 0.0 and rep.implied_constant == 0.0
        assert rep.rhs_core > 0

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_implied_constant_finite(self, smooth_state, m):
        rep = hm_energy_report(smooth_state, m)
        assert math.isfinite(rep.implied_constant)
        assert abs(rep.implied_constant) < 10

    def test_refinement_stable(self, smooth_state):
        """Resampling a resolved state onto a finer grid changes the constant by less than 2x."""
        fine = resample(smooth_state.u, GridSpec(64, smooth_state.grid.box_length))
        fineB = resample(smooth_state.B, fine.grid)
        a = hm_energy_report(smooth_state, 3).implied_constant
        b = hm_energy_report(SolenoidalState(fine, fineB), 3).implied_constant
        assert 0.5 < abs(b / a) < 2.0

    def test_unresolved_raises(self, grid16, rng):
        s = SolenoidalState(random_solenoidal_field(grid16, rng, slope=0.0),
                            random_solenoidal_field(grid16, rng, slope=0.0))
        with pytest.raises(UnresolvedStateError, match="top dealiased shell"):
            hm_energy_report(s, 2)

    def test_negative_order(self, smooth_state):
        with pytest.raises(ValueError):
            hm_energy_report(smooth_state, -1)


class TestLinearEnvelope:
    t = np.linspace(0, 40, 81)

    def test_linear_growth_holds(self):
        W = 3 + 0.5 * self.t
        env = linear_envelope(self.t, W)
        assert env.holds
        assert env.slope == pytest.approx(0.5, rel=1e-9)
        np.testing.assert_array_less(W - 1e-12, env(self.t))

    def test_sublinear_growth_holds(self):
        assert linear_envelope(self.t, 1 + np.sqrt(self.t)).holds

    def test_bounded_oscillation_holds(self):
        W = 2 + 0.3 * self.t + 0.2 * np.sin(self.t)
        assert linear_envelope(self.t, W).holds

    def test_quadratic_growth_fails(self):
        env = linear_envelope(self.t, 1 + self.t**2)
        assert not env.holds and env.max_excess > 0

    def test_constant_series_floors_slope(self):
        env = linear_envelope(self.t, np.full_like(self.t, 2.0))
        assert env.slope == pytest.approx(2e-6) and env.holds

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            linear_envelope([0.0], [1.0])
