import math

import numpy as np
import pytest

from wavespeed_lab.errors import DomainError, ValidationError
from wavespeed_lab.limits import (cubic_d0, cubic_dstar, fit_rate,
                                  frozen_speed_curve, homogenized_speed,
                                  kpp_spreading_speed, slow_limit_speed)
from wavespeed_lab.reaction import CubicNonlinearity, TemporalCoefficient


def trig_nl():
    return CubicNonlinearity(
        TemporalCoefficient.trig(2.0, [(1.0, 1.0, 0.0)]),
        TemporalCoefficient.trig(0.5, [(1.0, 0.0, 0.2)]))


class TestCubicLimits:
    def test_d0_with_constant_coefficients_is_frozen_speed(self):
        a = TemporalCoefficient.constant(2.0)
        b = TemporalCoefficient.constant(0.3)
        assert cubic_d0(a, b) == pytest.approx(2.0 * (0.5 - 0.3), abs=1e-14)
        assert cubic_dstar(a, b) == pytest.approx(2.0 * (0.5 - 0.3), abs=1e-12)

    def test_d0_quadrature_oracle(self):
        # d0 = sqrt(2 int a) (1/2 - int ab / int a) by brute quadrature
        a = TemporalCoefficient.trig(2.0, [(1.0, 1.0, 0.0)])
        b = TemporalCoefficient.trig(0.5, [(1.0, 0.3, 0.2), (2.0, 0.0, 0.1)])
        t = np.linspace(0.0, 1.0, 200001)
        ma = np.trapezoid(a(t), t)
        mab = np.trapezoid(a(t) * b(t), t)
        expect = math.sqrt(2.0 * ma) * (0.5 - mab / ma)
        assert cubic_d0(a, b) == pytest.approx(expect, abs=1e-9)

    def test_dstar_quadrature_oracle(self):
        a = TemporalCoefficient.trig(2.0, [(1.0, 1.0, 0.0)])
        b = TemporalCoefficient.trig(0.5, [(1.0, 0.0, 0.2)])
        t = np.linspace(0.0, 1.0, 200001)
        expect = np.trapezoid(np.sqrt(2.0 * a(t)) * (0.5 - b(t)), t)
        assert cubic_dstar(a, b) == pytest.approx(expect, abs=1e-9)

    def test_nonpositive_mean_a_rejected(self):
        a = TemporalCoefficient.constant(-1.0)
        b = TemporalCoefficient.constant(0.3)
        with pytest.raises(DomainError):
            cubic_d0(a, b)


class TestHomogenizedSpeed:
    def test_matches_d0_for_trig_coefficients(self):
        nl = trig_nl()
        c0, prof = homogenized_speed(nl)
        assert c0 == pytest.approx(cubic_d0(nl.a, nl.b), abs=1e-6)
        assert abs(float(prof(0.0)) - 0.5) < 1e-10


class TestFrozenSpeedCurve:
    def test_curve_matches_pointwise_closed_form(self):
        nl = trig_nl()
        curve = frozen_speed_curve(nl, resolution=32)
        for s in (0.0, 10 / 32, 21 / 32):   # grid nodes: no interpolation
            a0, b0 = float(nl.a(s)), float(nl.b(s))
            expect = math.sqrt(2.0 * a0) * (0.5 - b0)
            assert float(curve(s)) == pytest.approx(expect, abs=1e-4)

    def test_curve_is_periodic(self):
        curve = frozen_speed_curve(trig_nl(), resolution=32)
        assert float(curve(0.2)) == pytest.approx(float(curve(1.2)), abs=1e-12)

    def test_slow_limit_matches_dstar(self):
        nl = trig_nl()
        curve = frozen_speed_curve(nl, resolution=256)
        assert slow_limit_speed(curve) == pytest.approx(
            cubic_dstar(nl.a, nl.b), abs=1e-5)

    def test_curve_is_cached(self):
        nl = trig_nl()
        c1 = frozen_speed_curve(nl, resolution=32)
        c2 = frozen_speed_curve(nl, resolution=32)
        assert c1 is c2

    def test_non_bistable_slice_reported_with_s(self):
        # b leaves (0, 1) for part of the period
        nl = CubicNonlinearity(
            TemporalCoefficient.constant(1.0),
            TemporalCoefficient.trig(0.5, [(1.0, 0.0, 0.7)]))
        with pytest.raises(ValidationError, match="s ="):
            frozen_speed_curve(nl, resolution=32)


class TestKppSpreadingSpeed:
    def test_matches_mu_grid_minimization(self):
        rng = np.random.default_rng(7)
        mu = np.linspace(1e-3, 50.0, 2000001)
        for m_bar in rng.uniform(0.05, 9.0, 5):
            brute = np.min((m_bar + mu * mu) / mu)
            assert abs(kpp_spreading_speed(m_bar) - brute) < 1e-8

    def test_needs_positive_mean_slope(self):
        with pytest.raises(DomainError):
            kpp_spreading_speed(0.0)


class TestFitRate:
    def test_exact_power_law(self):
        T = np.array([0.05, 0.1, 0.2, 0.4])
        slope, r2 = fit_rate(T, 0.7 * T)
        assert slope == pytest.approx(1.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_small_quadratic_contamination(self):
        T = np.array([0.05, 0.1, 0.2, 0.4])
        slope, r2 = fit_rate(T, 0.7 * T + 0.01 * T * T)
        assert 0.95 <= slope <= 1.05
        assert r2 > 0.99

    def test_nonpositive_deviations_dropped(self):
        with pytest.raises(DomainError):
            fit_rate([0.1, 0.2], [0.0, -1.0])
