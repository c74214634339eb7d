import math

import numpy as np
import pytest

from wavespeed_lab.errors import (DomainError, NoHeteroclinicError,
                                  ValidationError)
from wavespeed_lab.frontwave import (SolveOptions, cubic_closed_form,
                                     decay_rates, solve_frozen_wave,
                                     speed_bracket, speed_sign_classifier,
                                     uniform_decay_rates)
from wavespeed_lab.reaction import CubicNonlinearity, TemporalCoefficient


def frozen_cubic(a0, b0):
    nl = CubicNonlinearity(TemporalCoefficient.constant(a0),
                           TemporalCoefficient.constant(b0))
    return nl.frozen(0.0)


def exact_speed(a0, b0):
    return math.sqrt(2.0 * a0) * (0.5 - b0)


def exact_profile(a0, xi):
    return 1.0 / (1.0 + np.exp(np.sqrt(a0 / 2.0) * xi))


class TestSolveFrozenWave:
    def test_speed_matches_closed_form(self):
        for a0, b0 in [(1.0, 0.3), (2.0, 0.5), (4.0, 0.7), (0.5, 0.1)]:
            prof = solve_frozen_wave(frozen_cubic(a0, b0))
            assert abs(prof.speed - exact_speed(a0, b0)) < 1e-8

    def test_profile_matches_sigmoid_and_is_b_independent(self):
        xi = np.linspace(-15.0, 15.0, 601)
        expect = exact_profile(1.0, xi)
        for b0 in (0.2, 0.5, 0.8):
            prof = solve_frozen_wave(frozen_cubic(1.0, b0))
            assert np.max(np.abs(prof(xi) - expect)) < 1e-4

    def test_profile_is_normalized_and_monotone(self):
        prof = solve_frozen_wave(frozen_cubic(2.0, 0.35))
        assert abs(float(prof(0.0)) - 0.5) < 1e-10
        xi = np.linspace(-30.0, 30.0, 1201)
        vals = prof(xi)
        assert np.all(np.diff(vals) < 0.0)
        assert vals[0] > 0.999 and vals[-1] < 1e-3

    def test_tail_decay_matches_linearization(self):
        a0, b0 = 1.0, 0.3
        prof = solve_frozen_wave(frozen_cubic(a0, b0))
        lam1, lam2 = decay_rates(prof.speed, -a0 * b0, -a0 * (1.0 - b0))
        xi = np.linspace(8.0, 14.0, 61)
        slope_right = -np.polyfit(xi, np.log(prof(xi)), 1)[0]
        slope_left = -np.polyfit(xi, np.log(1.0 - prof(-xi)), 1)[0]
        assert abs(slope_right - lam1) / lam1 < 0.02
        assert abs(slope_left - lam2) / lam2 < 0.02

    def test_zero_speed_at_balanced_cubic(self):
        prof = solve_frozen_wave(frozen_cubic(3.0, 0.5))
        assert abs(prof.speed) < 1e-9

    def test_degenerate_cubic_rejected(self):
        with pytest.raises((DomainError, NoHeteroclinicError,
                            ValidationError)):
            solve_frozen_wave(frozen_cubic(1.0, 0.0))


class TestCubicClosedForm:
    def test_matches_shooting_solution(self):
        a0, b0 = 2.5, 0.4
        exact = cubic_closed_form(a0, b0)
        shot = solve_frozen_wave(frozen_cubic(a0, b0))
        xi = np.linspace(-10.0, 10.0, 401)
        assert abs(exact.speed - shot.speed) < 1e-8
        assert np.max(np.abs(exact(xi) - shot(xi))) < 1e-4

    def test_is_exact_sigmoid(self):
        prof = cubic_closed_form(4.0, 0.25)
        xi = np.linspace(-20.0, 20.0, 801)
        np.testing.assert_allclose(prof(xi), exact_profile(4.0, xi),
                                   atol=1e-12)
        assert abs(prof.speed - exact_speed(4.0, 0.25)) < 1e-14


class TestDecayRates:
    def test_quadratic_characteristic_roots(self):
        c, dg0, dg1 = 0.7, -0.3, -0.9
        lam1, lam2 = decay_rates(c, dg0, dg1)
        # lam1 solves lam^2 - c lam + dg0 = 0 (right tail, e^{-lam1 xi})
        assert abs(lam1 * lam1 - c * lam1 + dg0) < 1e-12
        assert abs(lam2 * lam2 + c * lam2 + dg1) < 1e-12
        assert lam1 > 0 and lam2 > 0

    def test_requires_stable_limit_states(self):
        with pytest.raises(DomainError):
            decay_rates(0.5, 0.1, -0.5)

    def test_uniform_rates_bound_actual_rates(self):
        c, gamma0 = 0.4, 0.2
        mu1, mu2 = uniform_decay_rates(c, gamma0)
        lam1, lam2 = decay_rates(c, -gamma0, -gamma0)
        assert mu1 == pytest.approx(lam1) and mu2 == pytest.approx(lam2)


class TestSpeedBracket:
    def test_bracket_contains_all_frozen_speeds(self):
        nl = CubicNonlinearity(
            TemporalCoefficient.trig(2.0, [(1.0, 1.0, 0.0)]),
            TemporalCoefficient.trig(0.5, [(1.0, 0.0, 0.2)]))
        views = [nl.frozen(s) for s in np.linspace(0.0, 1.0, 17)]
        bracket = speed_bracket(views)
        for s in np.linspace(0.0, 1.0, 9):
            a0, b0 = float(nl.a(s)), float(nl.b(s))
            assert bracket.lo < exact_speed(a0, b0) < bracket.hi

    def test_bracket_reused_by_solver(self):
        g = frozen_cubic(1.0, 0.35)
        bracket = speed_bracket([g])
        prof = solve_frozen_wave(g, bracket=bracket)
        assert abs(prof.speed - exact_speed(1.0, 0.35)) < 1e-8


class TestSpeedSignClassifier:
    def test_signs_of_cubic_family(self):
        nl_neg = CubicNonlinearity(TemporalCoefficient.constant(1.0),
                                   TemporalCoefficient.constant(0.7))
        nl_pos = CubicNonlinearity(TemporalCoefficient.constant(1.0),
                                   TemporalCoefficient.constant(0.3))
        nl_zero = CubicNonlinearity(TemporalCoefficient.constant(1.0),
                                    TemporalCoefficient.constant(0.5))
        assert speed_sign_classifier(nl_neg.averaged()) == "negative"
        assert speed_sign_classifier(nl_pos.averaged()) == "positive"
        assert speed_sign_classifier(nl_zero.averaged()) == "zero"
