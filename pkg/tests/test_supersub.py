import numpy as np
import pytest

from wavespeed_lab.errors import ConfigurationError, DomainError, RegimeError
from wavespeed_lab.frontwave import cubic_closed_form
from wavespeed_lab.limits import frozen_speed_curve, homogenized_speed
from wavespeed_lab.reaction import (CubicNonlinearity, TemporalCoefficient,
                                    stability_margins)
from wavespeed_lab.supersub import (cubic_profile_family, rapid_aggregates,
                                    rapid_schedule, rapid_supersub_eval,
                                    residual_check, sandwich_check,
                                    slow_aggregates, slow_schedule,
                                    slow_supersub_eval)


@pytest.fixture(scope="module")
def rapid_setup():
    nl = CubicNonlinearity(TemporalCoefficient.constant(1.0),
                           TemporalCoefficient.trig(0.5, [(1.0, 0.0, 0.2)]))
    margins = stability_margins(nl)
    _, phi0 = homogenized_speed(nl)
    eps1 = margins.delta1 / 4.0
    agg = rapid_aggregates(nl, phi0, margins, eps1)
    return nl, margins, phi0, eps1, agg


@pytest.fixture(scope="module")
def slow_setup():
    nl = CubicNonlinearity(TemporalCoefficient.trig(2.0, [(1.0, 1.0, 0.0)]),
                           TemporalCoefficient.trig(0.5, [(1.0, 0.0, 0.2)]))
    margins = stability_margins(nl)
    eps2 = margins.delta1 / 4.0
    agg = slow_aggregates(nl, margins, eps2)
    curve = frozen_speed_curve(nl, resolution=64)
    return nl, margins, eps2, agg, curve


class TestRapidSchedule:
    def test_schedule_solves_zone_odes(self, rapid_setup):
        nl, margins, phi0, eps1, agg = rapid_setup
        T1 = eps1 * margins.gamma1 / agg.K0
        sched = rapid_schedule(eps1, 0.5 * T1, margins, agg)
        h = 1e-6
        for t in (0.1, 1.0, 5.0):
            dq = (sched.q(t + h) - sched.q(t - h)) / (2 * h)
            # q' = -gamma1 q + K0 T
            assert abs(dq + margins.gamma1 * sched.q(t)
                       - agg.K0 * sched.T) < 1e-8
            deta = (sched.eta(t + h) - sched.eta(t - h)) / (2 * h)
            # eta' = -(gamma1 + K1) q / beta
            assert abs(deta + (margins.gamma1 + agg.K1) * sched.q(t)
                       / agg.beta) < 1e-8

    def test_initial_amplitude_and_floor(self, rapid_setup):
        nl, margins, phi0, eps1, agg = rapid_setup
        T1 = eps1 * margins.gamma1 / agg.K0
        sched = rapid_schedule(eps1, 0.5 * T1, margins, agg)
        assert sched.q(0.0) == pytest.approx(eps1)
        assert sched.eta(0.0) == pytest.approx(0.0)
        floor = agg.K0 * sched.T / margins.gamma1
        assert sched.q(1e4) == pytest.approx(floor, rel=1e-9)
        assert floor < eps1

    def test_regime_gate(self, rapid_setup):
        nl, margins, phi0, eps1, agg = rapid_setup
        T1 = eps1 * margins.gamma1 / agg.K0
        with pytest.raises(RegimeError):
            rapid_schedule(eps1, 2.0 * T1, margins, agg)
        with pytest.raises(DomainError):
            rapid_schedule(margins.delta1, 0.5 * T1, margins, agg)

    def test_super_dominates_sub(self, rapid_setup):
        nl, margins, phi0, eps1, agg = rapid_setup
        T1 = eps1 * margins.gamma1 / agg.K0
        sched = rapid_schedule(eps1, 0.25 * T1, margins, agg)
        x = np.linspace(-30.0, 30.0, 301)
        for t in (0.0, 2.0, 17.0):
            hi = rapid_supersub_eval(sched, phi0, nl.F, t, x, "+")
            lo = rapid_supersub_eval(sched, phi0, nl.F, t, x, "-")
            assert np.all(hi > lo)

    def test_bad_side_label(self, rapid_setup):
        nl, margins, phi0, eps1, agg = rapid_setup
        T1 = eps1 * margins.gamma1 / agg.K0
        sched = rapid_schedule(eps1, 0.25 * T1, margins, agg)
        with pytest.raises(ConfigurationError):
            rapid_supersub_eval(sched, phi0, nl.F, 0.0, np.zeros(3), "up")

    def test_residual_signs_on_coarse_grid(self, rapid_setup):
        nl, margins, phi0, eps1, agg = rapid_setup
        T1 = eps1 * margins.gamma1 / agg.K0
        sched = rapid_schedule(eps1, 0.25 * T1, margins, agg)
        t_grid = np.linspace(0.05, 10.0, 12)
        x_grid = np.linspace(-25.0, 25.0, 81)
        for side, sign_ok in (("+", 1.0), ("-", 1.0)):
            cand = lambda t, x, s=side: rapid_supersub_eval(
                sched, phi0, nl.F, t, x, s)
            worst, _ = residual_check(cand, nl, sched.T, t_grid, x_grid, side)
            assert worst >= -1e-8


class TestSlowSchedule:
    def test_schedule_solves_zone_odes(self, slow_setup):
        nl, margins, eps2, agg, curve = slow_setup
        T2 = agg.C2 / (eps2 * margins.gamma1)
        sched = slow_schedule(eps2, 3.0 * T2, margins, agg, curve, nl.period)
        h = 1e-6
        for t in (0.5, 4.0):
            dp = (sched.p(t + h) - sched.p(t - h)) / (2 * h)
            assert abs(dp + margins.gamma1 * sched.p(t)
                       - agg.C2 / sched.T) < 1e-8

    def test_phase_tracks_frozen_speed_integral(self, slow_setup):
        nl, margins, eps2, agg, curve = slow_setup
        T2 = agg.C2 / (eps2 * margins.gamma1)
        T = 3.0 * T2
        sched = slow_schedule(eps2, T, margins, agg, curve, nl.period)
        # X(T) = T * int_0^1 c(s) ds, and X' = c(t/T)
        s = np.linspace(0.0, 1.0, 2001)
        expect = T * np.trapezoid(curve(s), s)
        assert sched.X(T) == pytest.approx(expect, rel=1e-6, abs=1e-9)
        h = 1e-3
        t = 0.4 * T
        dX = (sched.X(t + h) - sched.X(t - h)) / (2 * h)
        assert dX == pytest.approx(float(curve(t / T)), abs=1e-3)

    def test_regime_gate(self, slow_setup):
        nl, margins, eps2, agg, curve = slow_setup
        T2 = agg.C2 / (eps2 * margins.gamma1)
        with pytest.raises(RegimeError):
            slow_schedule(eps2, 0.5 * T2, margins, agg, curve, nl.period)

    def test_super_dominates_sub(self, slow_setup):
        nl, margins, eps2, agg, curve = slow_setup
        T2 = agg.C2 / (eps2 * margins.gamma1)
        T = 4.0 * T2
        sched = slow_schedule(eps2, T, margins, agg, curve, nl.period)
        family = cubic_profile_family(nl)
        x = np.linspace(-30.0, 30.0, 301)
        for t in (0.0, 0.3 * T, 1.7 * T):
            hi = slow_supersub_eval(sched, family, t, x, "+")
            lo = slow_supersub_eval(sched, family, t, x, "-")
            assert np.all(hi > lo)

    def test_profile_family_is_exact(self, slow_setup):
        nl, margins, eps2, agg, curve = slow_setup
        family = cubic_profile_family(nl)
        prof = family(0.3)
        direct = cubic_closed_form(float(nl.a(0.3)), float(nl.b(0.3)))
        xi = np.linspace(-10, 10, 101)
        np.testing.assert_allclose(prof(xi), direct(xi), atol=1e-12)


class TestSandwichCheck:
    def test_rejects_trace_without_states(self):
        class Dummy:
            states = []
        with pytest.raises(ConfigurationError):
            sandwich_check(Dummy(), lambda t, x: x, lambda t, x: x)

    def test_detects_violation_on_synthetic_state(self):
        from wavespeed_lab.evolve import Grid1D, State

        grid = Grid1D.make(5.0, 0.1)
        vals = np.full(grid.n, 0.5)

        class Trace:
            states = [State(0.0, vals, grid)]

        ok, worst = sandwich_check(Trace(),
                                   lambda t, x: np.full_like(x, 0.4),
                                   lambda t, x: np.full_like(x, 0.0))
        assert not ok
        assert worst == pytest.approx(-0.1)
        ok2, worst2 = sandwich_check(Trace(),
                                     lambda t, x: np.full_like(x, 0.6),
                                     lambda t, x: np.full_like(x, 0.4))
        assert ok2
        assert worst2 == pytest.approx(0.1)
