"""Limiting speeds: homogenized c0, frozen curve c(s), slow limit c_*,
cubic closed forms d0/d_*, and the KPP spreading speed.

c0 is the wave speed of the time-averaged equation (rapid-oscillation
limit); c_* is the time average of the frozen speed curve (slow limit).
For the cubic family both admit closed forms d0 and d_*.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NumericError, ValidationError, WavespeedError
from .frontwave import SolveOptions, WaveProfile, solve_frozen_wave, speed_bracket
from .reaction import (Nonlinearity, TemporalCoefficient,
                       coefficient_product_mean)


@dataclass(frozen=True)
class FrozenSpeedCurve:
    """Sampled frozen wave speeds c(s) with quadrature metadata."""

    s_grid: np.ndarray
    speeds: np.ndarray
    period: float | None
    lipschitz_estimate: float
    ergodic_error: float = 0.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.period is not None:
            s = np.mod(s, self.period)
        return np.interp(s, self.s_grid, self.speeds)


@dataclass
class SpeedReport:
    """Everything the sweep experiments compare against."""

    c0: float
    c_star: float
    d0: float | None = None
    d_star: float | None = None
    kpp: float | None = None
    per_T: list = field(default_factory=list)   # (T, estimate, uncertainty)
    rate_rapid: float | None = None
    rate_slow: float | None = None


def homogenized_speed(nl: Nonlinearity,
                      opts: SolveOptions = SolveOptions()):
    """Wave speed (and profile) of the time-averaged equation."""
    prof = solve_frozen_wave(nl.averaged(), opts)
    return prof.speed, prof


_curve_cache = weakref.WeakKeyDictionary()


def frozen_speed_curve(nl: Nonlinearity, resolution=256,
                       opts: SolveOptions = SolveOptions()) -> FrozenSpeedCurve:
    """Frozen speeds c(s) on one period (or an ergodic window), memoized.

    A single speed bracket built from the coefficient envelopes is reused
    for every s, so the per-sample bisection starts tight.  The grid is
    uniform plus the ramp breakpoints of smoothed-step coefficients, which
    keeps the later c_* quadrature second order across the kinks.
    """
    if resolution < 16:
        raise DomainError("curve resolution must be at least 16")
    cached = _curve_cache.get(nl, {}).get(resolution)
    if cached is not None:
        return cached

    period = nl.period
    ergodic_error = 0.0
    if period is not None:
        window = period
        grid = set(np.linspace(0.0, window, resolution, endpoint=False))
        grid |= set(_breakpoints(nl))
        grid.add(window)
        s_grid = np.array(sorted(grid))
    else:
        window = _ergodic_window(nl)
        s_grid = np.linspace(0.0, window, resolution)

    views = [nl.frozen(float(s)) for s in s_grid]
    bracket = speed_bracket(views, opts)
    speeds = np.empty(len(s_grid))
    for i, (s, view) in enumerate(zip(s_grid, views)):
        try:
            speeds[i] = solve_frozen_wave(view, opts, bracket=bracket).speed
        except WavespeedError as exc:
            raise ValidationError(
                f"frozen equation at s = {s:g} has no single wave: {exc}"
            ) from exc

    lip = float(np.max(np.abs(np.diff(speeds) / np.diff(s_grid))))
    if period is None:
        half = len(s_grid) // 2
        ergodic_error = abs(float(np.mean(speeds))
                            - float(np.mean(speeds[:half])))
    curve = FrozenSpeedCurve(s_grid=s_grid, speeds=speeds, period=period,
                             lipschitz_estimate=lip,
                             ergodic_error=ergodic_error)
    _curve_cache.setdefault(nl, {})[resolution] = curve
    return curve


def _breakpoints(nl: Nonlinearity):
    pts = []
    for coef in (getattr(nl, "a", None), getattr(nl, "b", None)):
        if coef is not None and coef.kind == "smoothed-step":
            reps = int(round(nl.period / coef.period))
            for k in range(reps):
                pts.extend(p + k * coef.period
                           for p in coef.step_breakpoints())
    return [p for p in pts if 0.0 <= p < nl.period]


def _ergodic_window(nl: Nonlinearity, periods=1.0e3):
    freqs = []
    for coef in (getattr(nl, "a", None), getattr(nl, "b", None)):
        if coef is not None and coef.modes:
            freqs.extend(m[0] for m in coef.modes)
    if not freqs:
        return periods
    return periods / min(freqs)


def slow_limit_speed(curve: FrozenSpeedCurve):
    """c_* = mean of c(s): trapezoid over one period, or the Birkhoff mean."""
    if curve.period is not None:
        return float(np.trapezoid(curve.speeds, curve.s_grid)) / curve.period
    return float(np.mean(curve.speeds))


# ---------------------------------------------------------------------------
# cubic closed forms
# ---------------------------------------------------------------------------

def _check_cubic_coeffs(a: TemporalCoefficient, b: TemporalCoefficient):
    for coef, name in ((a, "a"), (b, "b")):
        if coef.kind != "constant" and coef.period is None:
            raise DomainError(f"coefficient {name} must be periodic")
    ma = a.exact_mean()
    if ma <= 0:
        raise DomainError("mean of a must be positive")
    return ma


def cubic_d0(a: TemporalCoefficient, b: TemporalCoefficient):
    """Rapid limit sqrt(2 int a) (1/2 - int ab / int a), means exact."""
    ma = _check_cubic_coeffs(a, b)
    mab = coefficient_product_mean(a, b)
    return math.sqrt(2.0 * ma) * (0.5 - mab / ma)


def cubic_dstar(a: TemporalCoefficient, b: TemporalCoefficient):
    """Slow limit int_0^1 sqrt(2 a(s)) (1/2 - b(s)) ds, panel quadrature."""
    _check_cubic_coeffs(a, b)
    period = 1.0
    for coef in (a, b):
        if coef.period is not None:
            if abs(coef.period - round(coef.period / period) * period) > 1e-12 \
                    and abs(period - round(period / coef.period) * coef.period) > 1e-12:
                raise DomainError("cubic_dstar needs commensurate periods")
            period = max(period, coef.period)

    panels = {0.0, period}
    for coef in (a, b):
        if coef.kind == "smoothed-step":
            reps = int(round(period / coef.period))
            for k in range(reps):
                panels.update(p + k * coef.period
                              for p in coef.step_breakpoints())
    edges = sorted(p for p in panels if 0.0 <= p <= period)

    def integrand(s):
        av = float(a(s))
        if av <= 0:
            raise DomainError(f"a({s:g}) <= 0: frozen equation degenerate")
        return math.sqrt(2.0 * av) * (0.5 - float(b(s)))

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = quad(integrand, lo, hi, limit=200,
                        epsabs=1e-13, epsrel=1e-12)
        if err > 1e-9:
            raise NumericError(f"slow-limit quadrature stalled on "
                               f"[{lo:g}, {hi:g}] (err {err:g})")
        total += val
    return total / period


def kpp_spreading_speed(m_bar):
    """inf_{mu>0} (m_bar + mu^2)/mu = 2 sqrt(m_bar)."""
    if m_bar <= 0:
        raise DomainError("KPP spreading speed needs mean slope m_bar > 0")
    return 2.0 * math.sqrt(m_bar)


def fit_rate(values, deviations):
    """Log-log slope and r^2 of deviations against values.

    Used with values = T (rapid regime) or 1/T (slow regime); ignores
    non-positive deviations (already converged below noise).
    """
    v = np.asarray(values, dtype=float)
    d = np.asarray(deviations, dtype=float)
    keep = (v > 0) & (d > 0)
    if np.count_nonzero(keep) < 2:
        raise DomainError("rate fit needs at least two positive deviations")
    lx = np.log(v[keep])
    ly = np.log(d[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)
