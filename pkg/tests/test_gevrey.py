"""Gevrey norms, the radius proxy and the exponential-weight inequalities."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hallmhd.gevrey import (
    GEVREY_CSV_COLUMNS,
    GevreyOverflowError,
    GevreyParams,
    InsufficientShellsError,
    gevrey_norm,
    gevrey_record,
    interpolation_constant,
    is_resolved,
    weight_inequality_check,
    weight_inequality_modewise,
    log_gevrey_norm,
    radius_estimate,
    tau_schedule,
    track_gevrey,
    with_gamma,
)
from hallmhd.heat import HeatFlow, heat_evolve
from hallmhd.initial import random_solenoidal_field
from hallmhd.spectral import GridSpec, SolenoidalState, SpectralField, leray_project, sobolev_seminorm_sq

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _spectrum_field(grid, amplitude, seed=0, jitter=0.0):
    """Divergence-free field with ``|f_hat(k)|`` set by ``amplitude(|k|)`` and random phases."""
    rng = np.random.default_rng(seed)
    raw = random_solenoidal_field(grid, rng, slope=0.0)
    c = raw.coeffs
    mag = np.sqrt((np.abs(c) ** 2).sum(axis=0))
    scale = np.where(mag > 0, amplitude(grid.kmag) / np.where(mag > 0, mag, 1.0), 0.0)
    if jitter:
        scale = scale * rng.uniform(1.0 - jitter, 1.0, size=scale.shape)
    out = leray_project(SpectralField(grid, c * scale))
    return out


@pytest.fixture(scope="module")
def grid64():
    return GridSpec(64, 2 * math.pi)


class TestParams:
    @pytest.mark.parametrize("kw", [
        {"r": 1.5}, {"s": 1.5}, {"tau0": 0.0}, {"alpha_tau": 0.0}, {"alpha_tau": 0.6},
        {"tau0": 0.1, "alpha_tau": 0.05},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            GevreyParams(**kw)

    def test_defaults(self):
        p = GevreyParams()
        assert (p.r, p.s, p.tau0, p.alpha_tau) == (2.75, 1.375, 0.5, 0.25)

    def test_schedule_derivative(self):
        """``tau tau'`` is constant and equal to ``alpha / 2``."""
        p = GevreyParams()
        for t in (0.0, 1.0, 30.0):
            h = 1e-6
            d = (tau_schedule(t + h, p) - tau_schedule(t, p)) / h
            assert tau_schedule(t, p) * d == pytest.approx(p.alpha_tau / 2, rel=1e-5)
        assert tau_schedule(0.0, p) == p.tau0
        assert tau_schedule(7.0, p) ** 2 - p.tau0**2 == pytest.approx(7.0 * p.alpha_tau, rel=1e-14)

    def test_schedule_at_critical_rate(self):
        """``alpha = tau0^2`` gives ``tau = tau0 sqrt(1 + t)``."""
        p = GevreyParams(tau0=0.6, alpha_tau=0.36)
        for t in (0.0, 0.5, 20.0):
            assert tau_schedule(t, p) == pytest.approx(0.6 * math.sqrt(1 + t), rel=1e-14)
        with pytest.raises(ValueError):
            tau_schedule(-1.0, p)


class TestNorms:
    def test_tau_zero_is_sobolev(self, random_field):
        for r in (0.0, 1.0, 2.75):
            assert gevrey_norm(random_field, r, 0.0) == pytest.approx(
                sobolev_seminorm_sq(random_field, r), rel=1e-12)

    def test_single_mode_closed_form(self, grid16):
        """``cos(2y) e_x`` has ``L^3 * 2 * (1/2)^2 * |k|^{2r} e^{2 tau |k|}`` with ``|k| = 2``."""
        c = np.zeros((3,) + grid16.spectral_shape, complex)
        c[0, 0, 2, 0] = 0.5
        c[0, 0, -2, 0] = 0.5
        f = SpectralField(grid16, c)
        expected = grid16.volume * 2 * 0.25 * 2.0 ** 5.5 * math.exp(2 * 0.3 * 2.0)
        assert gevrey_norm(f, 2.75, 0.3) == pytest.approx(expected, rel=1e-13)

    def test_unit_mode_closed_form(self, grid16):
        """Amplitude ``a`` at ``|k| = 1`` with ``r = 2``, ``tau = 0.5`` gives ``2 L^3 a^2 e``."""
        a = 0.3
        c = np.zeros((3,) + grid16.spectral_shape, complex)
        c[0, 0, 0, 1] = a
        f = SpectralField(grid16, c)
        assert gevrey_norm(f, 2.0, 0.5) == pytest.approx(2 * grid16.volume * a * a * math.e, rel=1e-14)

    def test_heat_flow_of_analytic_data_stays_finite(self, grid64):
        """Data with ``|w_hat| = exp(-eta |k|)``: after heat flow the norm at ``tau = eta`` is finite and smaller."""
        eta = 0.7
        f = _spectrum_field(grid64, lambda k: np.exp(-eta * k))
        s = heat_evolve(HeatFlow(SolenoidalState(f, f)), 0.5)
        before = gevrey_norm(f, 2.75, eta)
        after = gevrey_norm(s.u, 2.75, eta)
        assert math.isfinite(after) and 0 < after < before

    def test_log_path_matches_direct(self, random_field):
        for tau in (0.1, 0.5, 2.0):
            assert log_gevrey_norm(random_field, 2.0, tau) == pytest.approx(
                math.log(gevrey_norm(random_field, 2.0, tau)), rel=1e-13)

    def test_log_of_zero(self, grid16):
        assert log_gevrey_norm(SpectralField.zeros(grid16), 1.0, 1.0) == -math.inf
        assert gevrey_norm(SpectralField.zeros(grid16), 1.0, 1.0) == 0.0

    def test_large_tau_uses_log_path(self, random_field):
        """Past the direct-evaluation threshold the result stays finite and consistent."""
        tau = 25.0
        assert math.log(gevrey_norm(random_field, 1.0, tau)) == pytest.approx(
            log_gevrey_norm(random_field, 1.0, tau), rel=1e-12)

    def test_overflow_names_offending_wavenumber(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.ones_like(k))
        with pytest.raises(GevreyOverflowError) as exc:
            gevrey_norm(f, 2.75, 20.0)
        assert exc.value.kmag == pytest.approx(grid64.kmag[grid64.mask].max())
        assert "largest offending |k|" in str(exc.value)

    def test_rejects_negative_and_nonfinite(self, random_field, grid16):
        with pytest.raises(ValueError):
            gevrey_norm(random_field, -1.0, 0.1)
        with pytest.raises(ValueError):
            log_gevrey_norm(random_field, 1.0, -0.1)
        c = np.zeros((3,) + grid16.spectral_shape, complex)
        c[0, 1, 0, 0] = np.inf
        with pytest.raises(ValueError):
            gevrey_norm(SpectralField(grid16, c), 1.0, 0.1)

    @given(seeds, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
    def test_monotone_in_tau(self, seed, t1, t2):
        f = random_solenoidal_field(GridSpec(16), np.random.default_rng(seed))
        lo, hi = sorted((t1, t2))
        assert gevrey_norm(f, 2.0, lo) <= gevrey_norm(f, 2.0, hi) * (1 + 1e-14)

    @given(seeds, st.floats(0.0, 4.0), st.floats(0.0, 4.0))
    def test_monotone_in_r_on_unit_lattice(self, seed, r1, r2):
        """On the ``2 pi`` box every nonzero ``|k| >= 1``, so the norm grows with ``r``."""
        f = random_solenoidal_field(GridSpec(16), np.random.default_rng(seed))
        lo, hi = sorted((r1, r2))
        assert gevrey_norm(f, lo, 0.4) <= gevrey_norm(f, hi, 0.4) * (1 + 1e-14)


class TestResolution:
    def test_smooth_field_resolved(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.exp(-2.0 * k))
        assert is_resolved(SolenoidalState(f, f), 2.75, 0.5)

    def test_white_field_unresolved(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.ones_like(k))
        assert not is_resolved(SolenoidalState(f, f), 2.75, 0.5)

    def test_zero_state_resolved(self, grid16):
        assert is_resolved(SolenoidalState.zeros(grid16), 2.75, 0.5)


class TestRadiusEstimate:
    def test_exponential_spectrum(self, grid64):
        """``|w_hat| = e^{-0.7|k|}`` gives a fitted rate of 0.7."""
        f = _spectrum_field(grid64, lambda k: np.exp(-0.7 * k))
        est = radius_estimate(f)
        assert est.tau_est == pytest.approx(0.7, abs=1e-10)
        assert est.fit_residual < 1e-8
        assert est.radius == pytest.approx(0.7 / math.sqrt(3))

    def test_exponential_spectrum_with_jitter(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.exp(-0.7 * k), seed=3, jitter=0.5)
        assert radius_estimate(f).tau_est == pytest.approx(0.7, abs=0.02)

    def test_white_spectrum(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.ones_like(k))
        assert radius_estimate(f).tau_est == pytest.approx(0.0, abs=1e-3)

    def test_state_combines_fields(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.exp(-0.4 * k))
        est = radius_estimate(SolenoidalState(f, f * 0.5))
        assert est.tau_est == pytest.approx(0.4, abs=1e-10)

    def test_too_few_shells(self, grid64):
        f = _spectrum_field(grid64, lambda k: np.exp(-8.0 * k))
        with pytest.raises(InsufficientShellsError):
            radius_estimate(f)
        with pytest.raises(InsufficientShellsError):
            radius_estimate(SpectralField.zeros(grid64))


class TestRecords:
    def test_record_fields(self, random_state):
        p = GevreyParams()
        s = random_state.with_time(2.0)
        rec = gevrey_record(s, p, gamma=1.5)
        tau = tau_schedule(2.0, p)
        assert rec.tau == tau
        assert rec.N_r == pytest.approx(rec.J_r + rec.H_r)
        assert rec.M_r == pytest.approx(rec.G_r + rec.K_r)
        assert rec.ratio == pytest.approx(rec.M_r * tau ** (2 * (1.5 + p.r)))
        assert len(rec.as_row()) == len(GEVREY_CSV_COLUMNS)

    def test_without_gamma_ratio_is_nan(self, random_state):
        rec = gevrey_record(random_state, GevreyParams(), with_radius=False)
        assert math.isnan(rec.ratio) and math.isnan(rec.tau_est)

    def test_with_gamma_recomputes(self, random_state):
        p = GevreyParams()
        recs = track_gevrey([random_state, random_state.with_time(1.0)], p)
        again = with_gamma(recs, p, 2.0)
        for a, b in zip(recs, again):
            assert b.M_r == a.M_r
            assert b.ratio == pytest.approx(a.M_r * a.tau ** (2 * (2.0 + p.r)))


class TestInequalities:
    def test_interpolation_constant(self):
        assert interpolation_constant(2.75, 1.375) == 1.0
        assert interpolation_constant(1.0, 1.0) == pytest.approx(1 / math.e)
        assert interpolation_constant(0.0, 1.0) == pytest.approx((2 / math.e) ** 2)
        with pytest.raises(ValueError):
            interpolation_constant(3.0, 1.0)

    def test_constant_is_sharp(self):
        """The modewise slack touches zero at ``tau rho = 2q - p``."""
        p, q, tau = 1.0, 1.5, 0.5
        rho = np.linspace(0.01, 20, 200001)
        slack = weight_inequality_modewise(rho, tau, p, q)["interpolation"]
        assert slack.min() >= -1e-15
        assert slack.min() < 1e-9
        assert rho[np.argmin(slack)] == pytest.approx((2 * q - p) / tau, abs=1e-3)

    @pytest.mark.parametrize("p,q", [(2.75, 1.375), (1.0, 2.0), (0.0, 0.5), (3.0, 0.0)])
    def test_modewise_nonnegative(self, p, q):
        rho = np.geomspace(1e-3, 50, 2000)
        for tau in (0.05, 0.5, 3.0):
            for name, slack in weight_inequality_modewise(rho, tau, p, q).items():
                assert np.all(slack >= -1e-12 * np.maximum(1, np.abs(slack))), name

    @given(seeds, st.floats(0.05, 1.5))
    def test_field_checks_hold(self, seed, tau):
        f = random_solenoidal_field(GridSpec(16, 4 * math.pi), np.random.default_rng(seed), slope=1.0)
        rep = weight_inequality_check(f, 2.75, 1.375, tau)
        assert rep.holds
        assert rep.interpolation is not None

    def test_domain_and_degenerate_cases(self, random_field):
        rep = weight_inequality_check(random_field, 3.0, 1.0, 0.5)
        assert rep.interpolation is None
        assert weight_inequality_check(random_field, 2.0, 0.0, 0.5).exp_shift.degenerate
        with pytest.raises(ValueError):
            weight_inequality_check(random_field, -1.0, 1.0, 0.5)

    def test_zero_field(self, grid16):
        rep = weight_inequality_check(SpectralField.zeros(grid16), 2.75, 1.375, 0.5)
        assert rep.holds and rep.exp_split.implied_constant == 0.0
