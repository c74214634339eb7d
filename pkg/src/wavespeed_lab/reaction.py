"""Temporal coefficients and reaction nonlinearities.

The equation under study is u_t = u_xx + f(t/T, u) with a bistable reaction
term, typically the cubic

    f(t, u) = a(t) * u * (u - b(t)) * (1 - u),

where a > 0 and b in (0, 1) are almost periodic in time.  This module holds

* ``TemporalCoefficient``: trig polynomials, mollified steps and
  quasi-periodic combinations, with exact or ergodic means,
* ``CubicNonlinearity`` / ``GeneralNonlinearity``: f with partials, the time
  average f_bar, the primitive F(t,u) = int_0^t (f - f_bar) and its
  exponential smoothing F_T,
* ``stability_margins``: the numerically certified margins
  (gamma0, delta0, gamma1, delta1, K1) used by the comparison arguments,
* ``diophantine_margin``: a finite-cutoff witness of the non-resonance
  condition for quasi-periodic frequency vectors.

Closed forms are used wherever the temporal dependence is a finite trig
polynomial; smoothed steps fall back to piecewise quadrature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, DomainError, ValidationError

TWO_PI = 2.0 * math.pi

# Certified margins are shrunk by this relative haircut so the reported
# inequalities are strict on the scan grid (the comparison residuals then keep
# a positive slack instead of touching zero where the scan minimum is attained).
_MARGIN_HAIRCUT = 1.0e-3


# ---------------------------------------------------------------------------
# trig-polynomial bookkeeping
# ---------------------------------------------------------------------------

class _TrigPoly:
    """mean + sum_k [c_k cos(2 pi f_k t) + s_k sin(2 pi f_k t)].

    Frequencies are in cycles per unit time and strictly positive; products
    are expanded mode-by-mode, so exact means of products like a(t)*b(t)
    are available even for incommensurate frequencies.
    """

    __slots__ = ("mean", "modes")

    def __init__(self, mean=0.0, modes=None):
        self.mean = float(mean)
        # modes: dict freq -> [cos_amp, sin_amp]
        self.modes = {}
        if modes:
            for freq, c, s in modes:
                self._add_mode(float(freq), float(c), float(s))

    def _add_mode(self, freq, c, s):
        if freq == 0.0:
            self.mean += c
            return
        if freq < 0.0:
            freq, c, s = -freq, c, -s
        cur = self.modes.setdefault(freq, [0.0, 0.0])
        cur[0] += c
        cur[1] += s
        if cur[0] == 0.0 and cur[1] == 0.0:
            del self.modes[freq]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.mean)
        for freq, (c, s) in self.modes.items():
            w = TWO_PI * freq * t
            out += c * np.cos(w) + s * np.sin(w)
        return out

    def __add__(self, other):
        if isinstance(other, _TrigPoly):
            res = _TrigPoly(self.mean + other.mean)
            for poly in (self, other):
                for freq, (c, s) in poly.modes.items():
                    res._add_mode(freq, c, s)
            return res
        res = _TrigPoly(self.mean + float(other))
        for freq, (c, s) in self.modes.items():
            res._add_mode(freq, c, s)
        return res

    def scaled(self, factor):
        res = _TrigPoly(self.mean * factor)
        for freq, (c, s) in self.modes.items():
            res._add_mode(freq, c * factor, s * factor)
        return res

    def __mul__(self, other):
        """Product expanded via product-to-sum identities (exact)."""
        res = _TrigPoly(self.mean * other.mean)
        for freq, (c, s) in self.modes.items():
            res._add_mode(freq, c * other.mean, s * other.mean)
        for freq, (c, s) in other.modes.items():
            res._add_mode(freq, c * self.mean, s * self.mean)
        for f1, (c1, s1) in self.modes.items():
            for f2, (c2, s2) in other.modes.items():
                # cos cos, sin sin, cos sin, sin cos
                res._add_mode(f1 + f2, 0.5 * (c1 * c2 - s1 * s2),
                              0.5 * (c1 * s2 + s1 * c2))
                res._add_mode(abs(f1 - f2), 0.5 * (c1 * c2 + s1 * s2),
                              0.5 * math.copysign(1.0, f2 - f1) * (c1 * s2 - s1 * c2)
                              if f1 != f2 else 0.0)
        return res

    def oscillatory_integral(self, t):
        """int_0^t of the zero-mean oscillatory part, closed form."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for freq, (c, s) in self.modes.items():
            w = TWO_PI * freq
            out += (c * np.sin(w * t) + s * (1.0 - np.cos(w * t))) / w
        return out

    def exp_smoothed(self, T, t):
        """int_{-inf}^t e^{-T(t-tau)} * (oscillatory part)(tau) dtau."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for freq, (c, s) in self.modes.items():
            w = TWO_PI * freq
            den = T * T + w * w
            cw = np.cos(w * t)
            sw = np.sin(w * t)
            # cos mode: (T cos + w sin)/den ; sin mode: (T sin - w cos)/den
            out += c * (T * cw + w * sw) / den + s * (T * sw - w * cw) / den
        return out

    def amplitude_sum(self):
        return sum(math.hypot(c, s) for c, s in self.modes.values())

    def min_frequency(self):
        return min(self.modes) if self.modes else None


# ---------------------------------------------------------------------------
# temporal coefficients
# ---------------------------------------------------------------------------

_KINDS = ("constant", "trig-polynomial", "smoothed-step", "quasi-periodic")


@dataclass(frozen=True)
class TemporalCoefficient:
    """A scalar almost periodic function of time.

    kind discriminates the evaluation path:

    * ``constant``: the value ``mean``.
    * ``trig-polynomial``: mean + finite list of (freq, cos_amp, sin_amp)
      modes with commensurate frequencies; ``period`` present.
    * ``smoothed-step``: 1-periodic-style step function given by ``steps``
      = ((t0, t1, value), ...) covering one period, with jumps replaced by
      C^1 cosine ramps of total width ``width`` (symmetric about the jump,
      so interval means are preserved exactly; width 0 keeps the raw step).
    * ``quasi-periodic``: same evaluation as a trig polynomial but with
      incommensurate frequencies; no period, means taken over an ergodic
      window of length ``horizon``.
    """

    kind: str
    mean: float
    modes: tuple = ()
    steps: tuple = ()
    width: float = 0.0
    period: float | None = None
    horizon: float | None = 1.0e4

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown coefficient kind {self.kind!r}")
        if not np.isfinite(self.mean):
            raise DomainError("coefficient mean must be finite")
        if self.kind == "smoothed-step":
            if not self.steps:
                raise ConfigurationError("smoothed-step needs a step table")
            starts = [s[0] for s in self.steps]
            ends = [s[1] for s in self.steps]
            if starts[0] != 0.0 or any(e != s for e, s in zip(ends[:-1], starts[1:])):
                raise ConfigurationError("step intervals must tile [0, period)")
            if self.period is None:
                object.__setattr__(self, "period", ends[-1])
            elif self.period != ends[-1]:
                raise ConfigurationError("step table does not span the period")
            if self.width < 0 or self.width >= min(e - s for s, e, _ in self.steps):
                raise ConfigurationError("ramp width must fit inside every interval")
            object.__setattr__(self, "mean", self._step_mean())
        elif self.kind == "quasi-periodic":
            if self.period is not None:
                raise ConfigurationError("quasi-periodic coefficients have no period")
        elif self.kind == "trig-polynomial":
            if self.period is None and self.modes:
                object.__setattr__(self, "period", _common_period(
                    [m[0] for m in self.modes]))
        elif self.kind == "constant":
            object.__setattr__(self, "period", None)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value):
        return TemporalCoefficient(kind="constant", mean=float(value))

    @staticmethod
    def trig(mean, modes, period=None):
        return TemporalCoefficient(kind="trig-polynomial", mean=float(mean),
                                   modes=tuple(tuple(map(float, m)) for m in modes),
                                   period=period)

    @staticmethod
    def smoothed_step(intervals, width=0.02):
        return TemporalCoefficient(kind="smoothed-step", mean=0.0,
                                   steps=tuple(tuple(map(float, s)) for s in intervals),
                                   width=float(width))

    @staticmethod
    def quasi_periodic(mean, modes, horizon=1.0e4):
        return TemporalCoefficient(kind="quasi-periodic", mean=float(mean),
                                   modes=tuple(tuple(map(float, m)) for m in modes),
                                   horizon=horizon)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.mean)
        if self.kind in ("trig-polynomial", "quasi-periodic"):
            return self._trig()(t)
        return self._step_values(t)

    def _trig(self):
        return _TrigPoly(self.mean, self.modes)

    def has_trig_form(self):
        return self.kind in ("constant", "trig-polynomial", "quasi-periodic")

    def _step_mean(self):
        total = sum(v * (t1 - t0) for t0, t1, v in self.steps)
        return total / self.steps[-1][1]

    def _step_values(self, t):
        P = self.period
        s = np.mod(t, P)
        starts = np.array([iv[0] for iv in self.steps])
        values = np.array([iv[2] for iv in self.steps])
        idx = np.searchsorted(starts, s, side="right") - 1
        out = values[idx].astype(float)
        w = self.width
        if w > 0.0:
            half = 0.5 * w
            n = len(self.steps)
            for i in range(n):
                bp = self.steps[i][0]  # jump from interval i-1 into i
                v_prev = self.steps[(i - 1) % n][2]
                v_next = self.steps[i][2]
                if v_prev == v_next:
                    continue
                delta = s - bp
                delta = np.where(delta > P / 2, delta - P, delta)
                delta = np.where(delta < -P / 2, delta + P, delta)
                on_ramp = np.abs(delta) <= half
                mid = 0.5 * (v_prev + v_next)
                jump = 0.5 * (v_next - v_prev)
                out = np.where(on_ramp, mid + jump * np.sin(math.pi * delta / w), out)
        return out

    def step_breakpoints(self):
        """Ramp boundaries within one period (quadrature panel edges)."""
        if self.kind != "smoothed-step":
            return []
        pts = set()
        half = 0.5 * self.width
        P = self.period
        for t0, _t1, _v in self.steps:
            for edge in (t0 - half, t0, t0 + half):
                pts.add(edge % P)
        return sorted(pts)

    # -- means --------------------------------------------------------------

    def exact_mean(self):
        """Time average; exact except for the quasi-periodic ergodic path."""
        if self.kind == "quasi-periodic":
            return self.ergodic_mean()[0]
        return self.mean

    def ergodic_mean(self):
        """(mean over [0, horizon], half-window discrepancy as error bar)."""
        if self.horizon is None:
            raise ConfigurationError(
                "quasi-periodic coefficient has no averaging horizon configured")
        return _ergodic_average(self, self.horizon)


def _common_period(freqs):
    """Smallest common period of rational frequencies, None if incommensurate."""
    from fractions import Fraction
    fracs = []
    for f in freqs:
        if f == 0:
            continue
        fr = Fraction(f).limit_denominator(10 ** 6)
        if abs(float(fr) - f) > 1e-12 * max(1.0, abs(f)):
            return None
        fracs.append(fr)
    if not fracs:
        return None
    # period = 1 / gcd of the frequencies
    g = fracs[0]
    for fr in fracs[1:]:
        g = Fraction(math.gcd(g.numerator, fr.numerator),
                     math.lcm(g.denominator, fr.denominator))
    return float(1 / g)


def _ergodic_average(fn, horizon, samples_per_unit=32):
    n = max(2048, int(horizon * samples_per_unit))
    t = np.linspace(0.0, horizon, n + 1)
    vals = fn(t)
    full = np.trapezoid(vals, t) / horizon
    m = n // 2
    half = np.trapezoid(vals[: m + 1], t[: m + 1]) / t[m]
    return full, abs(full - half)


def coefficient_product_mean(a: TemporalCoefficient, b: TemporalCoefficient):
    """Exact/ergodic time average of a(t)*b(t) per the coefficient kinds."""
    if a.kind == "quasi-periodic" or b.kind == "quasi-periodic":
        horizon = min(h for h in (a.horizon, b.horizon) if h is not None) \
            if (a.horizon or b.horizon) else None
        if horizon is None:
            raise ConfigurationError(
                "quasi-periodic product mean needs an averaging horizon")
        return _ergodic_average(lambda t: a(t) * b(t), horizon)[0]
    if a.has_trig_form() and b.has_trig_form():
        return (a._trig() * b._trig()).mean
    # at least one smoothed step: integrate one common period piecewise
    step, other = (a, b) if a.kind == "smoothed-step" else (b, a)
    P = step.period
    if other.period is not None:
        ratio = P / other.period
        if abs(ratio - round(ratio)) > 1e-9 and abs(1 / ratio - round(1 / ratio)) > 1e-9:
            raise ConfigurationError("incommensurate step/trig periods")
        P = max(P, other.period)
    if step.width == 0.0 and other.has_trig_form():
        # exact: per interval, integrate value * trig closed form
        tp = other._trig()
        total = 0.0
        reps = int(round(P / step.period))
        for k in range(reps):
            off = k * step.period
            for t0, t1, v in step.steps:
                seg = tp.mean * (t1 - t0)
                seg += float(tp.oscillatory_integral(off + t1)
                             - tp.oscillatory_integral(off + t0))
                total += v * seg
        return total / P
    panels = sorted({0.0, P} | {p + k * step.period
                                for p in step.step_breakpoints()
                                for k in range(int(round(P / step.period)))})
    total = 0.0
    for lo, hi in zip(panels[:-1], panels[1:]):
        if hi <= lo:
            continue
        val, _ = quad(lambda t: float(a(t) * b(t)), lo, hi, limit=200,
                      epsabs=1e-13, epsrel=1e-12)
        total += val
    return total / P


# ---------------------------------------------------------------------------
# frozen one-variable views
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrozenView:
    """A one-variable nonlinearity u -> g(u) with derivatives.

    ``poly`` carries the coefficients (highest power first) when g is a
    polynomial in u, which unlocks the fast compiled shooting path.
    """

    fun: object
    dfun: object
    d2fun: object
    poly: np.ndarray | None = None
    label: str = ""

    def __call__(self, u):
        return self.fun(u)


def _cubic_view(a_val, b_val, label):
    """g(u) = a * u * (u - b) * (1 - u) as a FrozenView."""
    a_val = float(a_val)
    b_val = float(b_val)
    poly = np.array([-a_val, a_val * (1.0 + b_val), -a_val * b_val, 0.0])

    def g(u):
        return a_val * u * (u - b_val) * (1.0 - u)

    def dg(u):
        return a_val * (-3.0 * u * u + 2.0 * (1.0 + b_val) * u - b_val)

    def d2g(u):
        return a_val * (-6.0 * u + 2.0 * (1.0 + b_val))

    return FrozenView(fun=g, dfun=dg, d2fun=d2g, poly=poly, label=label)


def _mixed_cubic_view(abar, mab, label):
    """g(u) = abar * u^2(1-u) - mab * u(1-u) (the averaged cubic)."""
    abar = float(abar)
    mab = float(mab)
    poly = np.array([-abar, abar + mab, -mab, 0.0])

    def g(u):
        return abar * u * u * (1.0 - u) - mab * u * (1.0 - u)

    def dg(u):
        return abar * (2.0 * u - 3.0 * u * u) - mab * (1.0 - 2.0 * u)

    def d2g(u):
        return abar * (2.0 - 6.0 * u) + 2.0 * mab

    return FrozenView(fun=g, dfun=dg, d2fun=d2g, poly=poly, label=label)


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

class Nonlinearity:
    """Interface shared by the cubic and general reaction terms."""

    period = None

    def f(self, t, u):
        raise NotImplementedError

    def fu(self, t, u):
        raise NotImplementedError

    def fuu(self, t, u):
        raise NotImplementedError

    def fbar(self, u):
        raise NotImplementedError

    def fbar_du(self, u):
        raise NotImplementedError

    def frozen(self, s):
        raise NotImplementedError

    def averaged(self):
        raise NotImplementedError

    def F(self, t, u):
        raise NotImplementedError

    def F_T(self, T, t, u):
        raise NotImplementedError

    def time_grid(self, n):
        """Representative scan times: one period, or an ergodic stretch."""
        if self.period is not None:
            return np.linspace(0.0, self.period, n, endpoint=False)
        return np.linspace(0.0, 128.0, n)


class CubicNonlinearity(Nonlinearity):
    """f(t,u) = a(t) u (u - b(t)) (1 - u) with almost periodic a, b."""

    def __init__(self, a: TemporalCoefficient, b: TemporalCoefficient):
        self.a = a
        self.b = b
        self.period = _merge_periods(a, b)
        self.abar = a.exact_mean()
        self.mab = coefficient_product_mean(a, b)
        # trig representations when closed forms apply
        self._a_tp = a._trig() if a.has_trig_form() else None
        if a.has_trig_form() and b.has_trig_form():
            self._ab_tp = a._trig() * b._trig()
        else:
            self._ab_tp = None

    # shape factors: f = a * h2(u) - (a b) * h1(u)
    @staticmethod
    def _h1(u):
        return u * (1.0 - u)

    @staticmethod
    def _h2(u):
        return u * u * (1.0 - u)

    def f(self, t, u):
        _check_finite(t, u)
        a = self.a(t)
        b = self.b(t)
        return a * u * (u - b) * (1.0 - u)

    def fu(self, t, u):
        a = self.a(t)
        b = self.b(t)
        return a * (-3.0 * u * u + 2.0 * (1.0 + b) * u - b)

    def fuu(self, t, u):
        a = self.a(t)
        b = self.b(t)
        return a * (-6.0 * u + 2.0 * (1.0 + b))

    def fbar(self, u):
        return self.abar * self._h2(u) - self.mab * self._h1(u)

    def fbar_du(self, u):
        return self.abar * (2.0 * u - 3.0 * u * u) - self.mab * (1.0 - 2.0 * u)

    def frozen(self, s):
        return _cubic_view(self.a(s), self.b(s), label=f"frozen s={s:g}")

    def averaged(self):
        return _mixed_cubic_view(self.abar, self.mab, label="averaged")

    # -- primitive F and its smoothing -------------------------------------

    def _temporal_deviations(self, t):
        """(A(t), B(t)) with A = int_0^t (a - abar), B = int_0^t (ab - mab)."""
        if self._a_tp is not None and self._ab_tp is not None:
            A = self._a_tp.oscillatory_integral(t) + (self._a_tp.mean - self.abar) * t
            B = (self._ab_tp.oscillatory_integral(t)
                 + (self._ab_tp.mean - self.mab) * t)
            return A, B
        # periodic non-trig path: a - abar and ab - mab have zero mean per
        # period, so only the partial period contributes
        P = self.period
        if P is None:
            raise ConfigurationError("primitive F needs a period or trig form")

        def dev_a(tau):
            return float(self.a(tau)) - self.abar

        def dev_ab(tau):
            return float(self.a(tau) * self.b(tau)) - self.mab

        pts = self._panel_points()
        A = _periodic_primitive(dev_a, t, P, pts)
        B = _periodic_primitive(dev_ab, t, P, pts)
        return A, B

    def _panel_points(self):
        pts = set()
        for coef in (self.a, self.b):
            if coef.kind == "smoothed-step":
                reps = int(round(self.period / coef.period))
                for p in coef.step_breakpoints():
                    for k in range(reps):
                        pts.add(p + k * coef.period)
        return sorted(pts)

    def F(self, t, u):
        A, B = self._temporal_deviations(np.asarray(t, dtype=float))
        return A * self._h2(u) - B * self._h1(u)

    def F_u(self, t, u):
        A, B = self._temporal_deviations(np.asarray(t, dtype=float))
        return A * (2.0 * u - 3.0 * u * u) - B * (1.0 - 2.0 * u)

    def F_uu(self, t, u):
        A, B = self._temporal_deviations(np.asarray(t, dtype=float))
        return A * (2.0 - 6.0 * u) + 2.0 * B

    def F_T(self, T, t, u):
        if T <= 0:
            raise DomainError("F_T needs T > 0")
        t = np.asarray(t, dtype=float)
        if self._a_tp is not None and self._ab_tp is not None:
            A = (self._a_tp.exp_smoothed(T, t)
                 + (self._a_tp.mean - self.abar) / T)
            B = (self._ab_tp.exp_smoothed(T, t)
                 + (self._ab_tp.mean - self.mab) / T)
            return A * self._h2(u) - B * self._h1(u)
        P = self.period
        if P is None:
            raise ConfigurationError("F_T needs a period or trig form")
        pts = self._panel_points()
        A = _periodic_exp_smoothed(lambda tau: float(self.a(tau)) - self.abar,
                                   T, t, P, pts)
        B = _periodic_exp_smoothed(
            lambda tau: float(self.a(tau) * self.b(tau)) - self.mab, T, t, P, pts)
        return A * self._h2(u) - B * self._h1(u)


class GeneralNonlinearity(Nonlinearity):
    """A reaction term given by closures f, f_u, f_uu of (t, u).

    The time average is tabulated on a u-grid over one period (trapezoid on
    the periodic grid) or over an ergodic horizon, then splined.
    """

    def __init__(self, f, fu=None, fuu=None, period=None, horizon=1.0e4,
                 u_range=(-1.5, 2.5), nu=801, nt=4096):
        self._f = f
        self._fu = fu
        self._fuu = fuu
        self.period = period
        self.horizon = horizon
        if period is None and horizon is None:
            raise ConfigurationError(
                "general nonlinearity needs a period or an ergodic horizon")
        from scipy.interpolate import CubicSpline
        ugrid = np.linspace(u_range[0], u_range[1], nu)
        if period is not None:
            tgrid = np.linspace(0.0, period, nt, endpoint=False)
        else:
            tgrid = np.linspace(0.0, horizon, nt)
        vals = np.array([np.mean(f(tgrid, np.full(tgrid.shape, uu)))
                         for uu in ugrid])
        self._fbar_spline = CubicSpline(ugrid, vals)

    def f(self, t, u):
        _check_finite(t, u)
        return self._f(np.asarray(t, dtype=float), np.asarray(u, dtype=float))

    def fu(self, t, u):
        if self._fu is not None:
            return self._fu(np.asarray(t, dtype=float), np.asarray(u, dtype=float))
        h = 1e-6
        return (self.f(t, u + h) - self.f(t, u - h)) / (2 * h)

    def fuu(self, t, u):
        if self._fuu is not None:
            return self._fuu(np.asarray(t, dtype=float), np.asarray(u, dtype=float))
        h = 1e-4
        return (self.f(t, u + h) - 2 * self.f(t, u) + self.f(t, u - h)) / (h * h)

    def fbar(self, u):
        return self._fbar_spline(u)

    def fbar_du(self, u):
        return self._fbar_spline(u, 1)

    def frozen(self, s):
        s = float(s)
        return FrozenView(fun=lambda u: self.f(s, u),
                          dfun=lambda u: self.fu(s, u),
                          d2fun=lambda u: self.fuu(s, u),
                          poly=None, label=f"frozen s={s:g}")

    def averaged(self):
        return FrozenView(fun=self.fbar, dfun=self.fbar_du,
                          d2fun=lambda u: self._fbar_spline(u, 2),
                          poly=None, label="averaged")

    def F(self, t, u):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        u_arr = np.broadcast_to(np.asarray(u, dtype=float), t_arr.shape)
        out = np.empty(t_arr.shape)
        for i, (tt, uu) in enumerate(zip(t_arr.ravel(), u_arr.ravel())):
            fb = float(self.fbar(uu))
            if self.period is not None:
                out.ravel()[i] = _periodic_primitive(
                    lambda tau: float(self.f(tau, uu)) - fb, tt, self.period, [])
            else:
                val, err = quad(lambda tau: float(self.f(tau, uu)) - fb,
                                0.0, tt, limit=500, epsabs=1e-10, epsrel=1e-9)
                out.ravel()[i] = val
        return out.reshape(np.shape(t)) if np.shape(t) else float(out[0])

    def F_T(self, T, t, u):
        if T <= 0:
            raise DomainError("F_T needs T > 0")
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        u_arr = np.broadcast_to(np.asarray(u, dtype=float), t_arr.shape)
        out = np.empty(t_arr.shape)
        for i, (tt, uu) in enumerate(zip(t_arr.ravel(), u_arr.ravel())):
            fb = float(self.fbar(uu))

            def dev(tau):
                return float(self.f(tau, uu)) - fb

            if self.period is not None:
                out.ravel()[i] = float(_periodic_exp_smoothed(
                    dev, T, np.asarray(tt), self.period, []))
            else:
                depth = math.log(1e12) / T
                val, _ = quad(lambda s: math.exp(-T * s) * dev(tt - s),
                              0.0, depth, limit=1000, epsabs=1e-11, epsrel=1e-9)
                out.ravel()[i] = val
        return out.reshape(np.shape(t)) if np.shape(t) else float(out[0])


def _merge_periods(a, b):
    pa, pb = a.period, b.period
    if a.kind == "quasi-periodic" or b.kind == "quasi-periodic":
        return None
    if pa is None:
        return pb
    if pb is None:
        return pa
    # least common multiple of the two periods (commensurate case)
    for mult in range(1, 1000):
        cand = pa * mult
        ratio = cand / pb
        if abs(ratio - round(ratio)) < 1e-9:
            return cand
    return None


def _periodic_primitive(dev, t, P, panel_pts):
    """int_0^t dev, with dev zero-mean P-periodic; exact period folding."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape)
    edges = sorted(set([0.0, P] + [p for p in panel_pts if 0.0 < p < P]))
    for i, tt in enumerate(t_arr.ravel()):
        # full periods contribute zero, so only the remainder matters
        # (this also covers negative t via the mod)
        rem = tt % P
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if rem <= lo:
                break
            val, _ = quad(dev, lo, min(hi, rem), limit=200,
                          epsabs=1e-12, epsrel=1e-11)
            total += val
        out.ravel()[i] = total
    return out.reshape(np.shape(t)) if np.shape(t) else float(out[0])


def _periodic_exp_smoothed(dev, T, t, P, panel_pts):
    """int_{-inf}^t e^{-T(t-s)} dev(s) ds for P-periodic dev.

    Substituting s = t - tau and summing the geometric series over whole
    periods gives (1 - e^{-T P})^{-1} int_0^P e^{-T tau} dev(t - tau) dtau.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape)
    geom = 1.0 / (1.0 - math.exp(-T * P)) if T * P < 700 else 1.0
    for i, tt in enumerate(t_arr.ravel()):
        pts = sorted({0.0, P} | {(tt - p) % P for p in panel_pts} |
                     {(tt % P)})
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, _ = quad(lambda tau: math.exp(-T * tau) * dev(tt - tau),
                          lo, hi, limit=200, epsabs=1e-13, epsrel=1e-11)
            total += val
        out.ravel()[i] = geom * total
    return out.reshape(np.shape(t)) if np.shape(t) else float(out[0])


def _check_finite(t, u):
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(u))):
        raise DomainError("non-finite (t, u) input")


# ---------------------------------------------------------------------------
# module operations
# ---------------------------------------------------------------------------

def eval_f(nl: Nonlinearity, t, u):
    """f(t, u); partials are available as nl.fu / nl.fuu."""
    return nl.f(t, u)


def temporal_mean(nl: Nonlinearity, u):
    """f_bar(u), the long-time average of f(., u)."""
    return nl.fbar(u)


def primitive_F(nl: Nonlinearity, t, u):
    """F(t, u) = int_0^t (f(tau, u) - f_bar(u)) dtau; F(0, u) = 0."""
    return nl.F(t, u)


def smoothed_primitive_F_T(nl: Nonlinearity, T, t, u):
    """F_T(t, u) = int_{-inf}^t e^{-T(t-tau)} (f(tau, u) - f_bar(u)) dtau."""
    return nl.F_T(T, t, u)


@dataclass(frozen=True)
class ScanGrid:
    """Resolution of the stability-margin scan."""

    nt: int = 256
    nu: int = 401


@dataclass(frozen=True)
class StabilityMargins:
    gamma0: float
    delta0: float
    gamma1: float
    delta1: float
    K1: float


_DYADIC = [0.25 / 2 ** k for k in range(7)]


def stability_margins(nl: Nonlinearity, scan: ScanGrid = ScanGrid()) -> StabilityMargins:
    """Certify the bistability margins on a (t, u) scan grid.

    gamma0/delta0: largest dyadic delta0 <= 1/4 such that on the scan grid
    f(t,u) <= -gamma0 u on (0, delta0], f(t,u) >= gamma0 (1-u) on [1-delta0, 1),
    with some gamma0 > 0, while f pushes back toward the limit states on the
    outer sides (f >= 0 on [-delta0, 0], f <= 0 on [1, 1+delta0]).  The
    literal two-sided linear bound cannot hold on the outer sides for any
    smooth bistable f, so the outer sides are certified as sign conditions.

    gamma1/delta1: largest dyadic delta1 <= delta0 with
    d_u f(t,u) <= -gamma1 < 0 on [-delta1, delta1] u [1-delta1, 1+delta1].

    K1: sup of |d_u f| over u in [-1, 2].
    """
    tgrid = nl.time_grid(scan.nt)

    # (A2) zeroes
    z0 = np.max(np.abs(nl.f(tgrid, np.zeros_like(tgrid))))
    z1 = np.max(np.abs(nl.f(tgrid, np.ones_like(tgrid))))
    if max(z0, z1) > 1e-9:
        raise ValidationError("f(t,0) or f(t,1) is not zero on the scan grid")

    def inner_margin(delta):
        u_lo = np.linspace(delta / scan.nu, delta, scan.nu)
        u_hi = np.linspace(1.0 - delta, 1.0 - delta / scan.nu, scan.nu)
        tt = tgrid[:, None]
        m_lo = np.min(-nl.f(tt, u_lo[None, :]) / u_lo[None, :])
        m_hi = np.min(nl.f(tt, u_hi[None, :]) / (1.0 - u_hi[None, :]))
        return min(m_lo, m_hi)

    def outer_ok(delta):
        u_neg = np.linspace(-delta, 0.0, scan.nu)
        u_big = np.linspace(1.0, 1.0 + delta, scan.nu)
        tt = tgrid[:, None]
        lo_vals = nl.f(tt, u_neg[None, :])
        hi_vals = nl.f(tt, u_big[None, :])
        if np.min(lo_vals) < -1e-12:
            it, iu = np.unravel_index(np.argmin(lo_vals), lo_vals.shape)
            return False, (tgrid[it], u_neg[iu])
        if np.max(hi_vals) > 1e-12:
            it, iu = np.unravel_index(np.argmax(hi_vals), hi_vals.shape)
            return False, (tgrid[it], u_big[iu])
        return True, None

    gamma0 = delta0 = None
    worst = None
    for delta in _DYADIC:
        margin = inner_margin(delta)
        ok, bad = outer_ok(delta)
        if margin > 0 and ok:
            gamma0, delta0 = margin, delta
            break
        worst = bad or worst
    if gamma0 is None:
        raise ValidationError(
            f"(A2) stability inequalities fail on the scan grid near {worst}")

    gamma1 = delta1 = None
    for delta in _DYADIC:
        if delta > delta0:
            continue
        u_zone = np.concatenate([np.linspace(-delta, delta, scan.nu),
                                 np.linspace(1.0 - delta, 1.0 + delta, scan.nu)])
        slopes = nl.fu(tgrid[:, None], u_zone[None, :])
        margin = -np.max(slopes)
        if margin > 0:
            gamma1, delta1 = margin, delta
            break
    if gamma1 is None:
        raise ValidationError("no derivative margin: d_u f not negative near 0/1")

    u_full = np.linspace(-1.0, 2.0, 2 * scan.nu)
    K1 = float(np.max(np.abs(nl.fu(tgrid[:, None], u_full[None, :]))))

    gamma0 *= 1.0 - _MARGIN_HAIRCUT
    gamma1 *= 1.0 - _MARGIN_HAIRCUT
    gamma1 = min(gamma1, gamma0)
    return StabilityMargins(gamma0=float(gamma0), delta0=float(delta0),
                            gamma1=float(gamma1), delta1=float(delta1),
                            K1=K1)


def diophantine_margin(omega, cutoff, alpha=None):
    """min over integer vectors 0 < |a|_inf <= cutoff of |a . omega| |a|^alpha.

    A finite-cutoff witness of the non-resonance condition; alpha defaults
    to the number of frequencies.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size == 0 or not np.any(omega):
        raise DomainError("omega must be a non-zero frequency vector")
    if cutoff < 1:
        raise DomainError("cutoff must be >= 1")
    n = omega.size
    if alpha is None:
        alpha = n
    best = math.inf
    for vec in itertools.product(range(-cutoff, cutoff + 1), repeat=n):
        if not any(vec):
            continue
        norm = max(abs(v) for v in vec)
        val = abs(float(np.dot(vec, omega))) * norm ** alpha
        best = min(best, val)
    return best
