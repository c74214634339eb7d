"""Explicit super/sub-solution schedules and their numerical verification.

Rapid regime: v+-(t,x) = phi0(x - c0 t +- eta_T(t)) +- q_T(t)
              + T F(t/T, phi0(...) +- q_T(t)),
with q_T, eta_T solving the linear zone ODEs; valid for T < T1 = eps1 gamma1/K0.

Slow regime:  w+(t,x) = phi(x - X_T(t) + kappa_T(t); t/T) + p_T(t)  (and the
mirrored w-), with X_T the frozen-speed phase; valid for T > T2 = C2/(eps2 gamma1).

The residual and sandwich checks are diagnostics: the schedule constants are
sampled suprema with a safety factor, not proved bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigurationError, DomainError, NumericError,
                     RegimeError)
from .frontwave import WaveProfile, cubic_closed_form
from .reaction import Nonlinearity, StabilityMargins


# ---------------------------------------------------------------------------
# rapid regime
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RapidAggregates:
    """Sampled-supremum constants of the rapid construction."""

    K1: float      # global Lipschitz bound of f in u
    K2: float      # sup |F|, |F_u|, |F_uu| on the corridor
    K3: float      # sup of the profile-derivative combination
    K0: float      # K1 K2 + K2 K3
    C1: float      # zone boundary: phi0 <= eps1 beyond C1, >= 1-eps1 before -C1
    beta: float    # min |phi0'| on the middle zone [-C1, C1]


def rapid_aggregates(nl: Nonlinearity, phi0: WaveProfile,
                     margins: StabilityMargins, eps1,
                     F=None, resolution=512, safety=2.0) -> RapidAggregates:
    """Estimate K2, K3, K0 and the zone geometry for Lemma-style schedules.

    F defaults to the exact primitive nl.F; pass a closure for the smoothed
    F_T variant.  Suprema are sampled on a (time x u) grid of the given
    resolution and inflated by the safety factor, which only shrinks T1.
    """
    if F is None:
        F = nl.F
    xi = np.linspace(phi0.xi[0], phi0.xi[-1], 4 * resolution + 1)
    vals = phi0(xi)

    # zone boundary and derivative floor
    right = xi[vals <= eps1]
    left = xi[vals >= 1.0 - eps1]
    if not len(right) or not len(left):
        raise DomainError("profile window too narrow for the eps1 zones")
    C1 = max(float(right[0]), -float(left[-1]))
    mid = np.abs(xi) <= C1
    beta = float(np.min(np.abs(phi0.derivative(xi[mid]))))
    if beta <= 0:
        raise DomainError("profile derivative vanishes on the middle zone")

    # K2: sup of |F|, |F_u|, |F_uu| over the corridor
    u = np.linspace(-eps1, 1.0 + eps1, resolution)
    k2 = 0.0
    times = nl.time_grid(resolution)
    for t in times:
        k2 = max(k2, float(np.max(np.abs(F(float(t), u)))))
    if hasattr(nl, "F_u") and F is nl.F:
        for t in times:
            k2 = max(k2, float(np.max(np.abs(nl.F_u(float(t), u)))),
                     float(np.max(np.abs(nl.F_uu(float(t), u)))))
    else:
        # derivative suprema by central differences of F in u
        h = 1e-5
        for t in times:
            fp = np.asarray(F(float(t), u + h))
            fm = np.asarray(F(float(t), u - h))
            f0 = np.asarray(F(float(t), u))
            k2 = max(k2, float(np.max(np.abs((fp - fm) / (2 * h)))),
                     float(np.max(np.abs((fp - 2 * f0 + fm) / (h * h)))))
    k2 *= safety

    # K3: sup |phi0' eta'| + |q'| + |c0 phi0'| + |phi0''| + phi0'^2
    k1 = margins.K1
    gamma1 = margins.gamma1
    dphi = np.abs(phi0.derivative(xi))
    ddphi = np.abs(phi0.derivative(xi, 2))
    sup_d = float(np.max(dphi))
    sup_dd = float(np.max(ddphi))
    A1 = eps1 * gamma1
    A2 = (gamma1 + k1) * eps1 / beta
    k3 = safety * (A2 * sup_d + A1 + abs(phi0.speed) * sup_d
                   + sup_dd + sup_d ** 2)
    k0 = k1 * k2 + k2 * k3
    return RapidAggregates(K1=k1, K2=k2, K3=k3, K0=k0, C1=C1, beta=beta)


@dataclass(frozen=True)
class RapidSchedule:
    """q_T and eta_T with their construction constants; requires T < T1."""

    eps1: float
    T: float
    K0: float
    gamma1: float
    K1: float
    beta: float
    C1: float
    T1: float

    def q(self, t):
        t = np.asarray(t, dtype=float)
        floor = self.K0 * self.T / self.gamma1
        return floor + (self.eps1 - floor) * np.exp(-self.gamma1 * t)

    def eta(self, t):
        t = np.asarray(t, dtype=float)
        g1, k1 = self.gamma1, self.K1
        floor = self.K0 * self.T / self.gamma1
        return (-(g1 + k1) / (self.beta * g1) * (self.eps1 - floor)
                * (1.0 - np.exp(-g1 * t))
                - (g1 + k1) * self.K0 * self.T / (self.beta * g1) * t)


def rapid_schedule(eps1, T, margins: StabilityMargins,
                   agg: RapidAggregates) -> RapidSchedule:
    if not 0.0 < eps1 < margins.delta1 / 2.0:
        raise DomainError(f"eps1 must lie in (0, delta1/2 = "
                          f"{margins.delta1 / 2:g})")
    T1 = eps1 * margins.gamma1 / agg.K0
    if not 0.0 < T < T1:
        raise RegimeError(f"rapid construction needs 0 < T < T1 = {T1:g}, "
                          f"got T = {T:g}")
    return RapidSchedule(eps1=eps1, T=T, K0=agg.K0, gamma1=margins.gamma1,
                         K1=agg.K1, beta=agg.beta, C1=agg.C1, T1=T1)


def rapid_supersub_eval(sched: RapidSchedule, phi0: WaveProfile, F,
                        t, x, side):
    """v+-(t,x); F is an (s, u) evaluator (nl.F, or F_T via a closure)."""
    sign = _side_sign(side)
    x = np.asarray(x, dtype=float)
    xi = x - phi0.speed * t + sign * sched.eta(t)
    base = phi0(xi) + sign * sched.q(t)
    if np.any(base < -1.0) or np.any(base > 2.0):
        raise DomainError("comparison function left the corridor [-1, 2]")
    return base + sched.T * np.asarray(F(t / sched.T, base))


def _side_sign(side):
    if side in ("+", "super"):
        return 1.0
    if side in ("-", "sub"):
        return -1.0
    raise ConfigurationError(f"side must be '+' or '-', got {side!r}")


# ---------------------------------------------------------------------------
# slow regime
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlowAggregates:
    C2: float      # sup |d_s phi| over s and xi (safety-inflated)
    beta1: float   # min |d_xi phi| on the middle zone, uniform in s
    C1: float      # zone boundary uniform in s
    zone_ok: bool  # middle zone satisfies 2 eps2 <= phi <= 1 - 2 eps2


def cubic_profile_family(nl):
    """s -> exact frozen wave of the cubic family (machine precision)."""
    def family(s):
        return cubic_closed_form(float(nl.a(s)), float(nl.b(s)))
    return family


def slow_aggregates(nl: Nonlinearity, margins: StabilityMargins, eps2,
                    profile_family=None, resolution=128, safety=2.0,
                    ds=1e-3) -> SlowAggregates:
    """C2 and the uniform zone geometry from sampled frozen profiles.

    d_s phi is a central difference of normalized profiles at s +- ds; the
    supremum over (s, xi) is inflated by the safety factor (which only
    grows T2).
    """
    if profile_family is None:
        profile_family = cubic_profile_family(nl)
    s_grid = nl.time_grid(resolution)
    xi = np.linspace(-40.0, 40.0, 1601)
    edge = min(2.0 * eps2, margins.delta1 / 2.0)

    c2 = 0.0
    c1 = 0.0
    beta1 = math.inf
    zone_ok = True
    for s in s_grid:
        prof = profile_family(float(s))
        vals = prof(xi)
        dplus = profile_family(float(s) + ds)(xi)
        dminus = profile_family(float(s) - ds)(xi)
        c2 = max(c2, float(np.max(np.abs(dplus - dminus))) / (2.0 * ds))
        right = xi[vals <= edge]
        left = xi[vals >= 1.0 - edge]
        if not len(right) or not len(left):
            raise DomainError("profile window too narrow for the eps2 zones")
        c1 = max(c1, float(right[0]), -float(left[-1]))
        mid = (vals >= 2.0 * eps2) & (vals <= 1.0 - 2.0 * eps2)
        if not np.any(mid):
            zone_ok = False
            continue
        beta1 = min(beta1, float(np.min(np.abs(prof.derivative(xi[mid])))))
    if not math.isfinite(beta1) or beta1 <= 0:
        raise DomainError("middle-zone derivative floor is degenerate")
    return SlowAggregates(C2=safety * c2, beta1=beta1, C1=c1, zone_ok=zone_ok)


class _PhaseIntegral:
    """X_T(t) = T * int_0^{t/T} c(s) ds from a periodic cumulative table."""

    def __init__(self, speed, period, n=8192):
        s = np.linspace(0.0, period, n + 1)
        c = np.asarray(speed(s), dtype=float)
        self.period = period
        self.s = s
        self.cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (c[1:] + c[:-1]) * np.diff(s))])
        self.per_period = float(self.cum[-1])

    def antiderivative(self, s):
        s = np.asarray(s, dtype=float)
        k = np.floor(s / self.period)
        frac = s - k * self.period
        return k * self.per_period + np.interp(frac, self.s, self.cum)


@dataclass(frozen=True)
class SlowSchedule:
    eps2: float
    T: float
    C2: float
    gamma1: float
    K1: float
    beta1: float
    C1: float
    T2: float
    phase: _PhaseIntegral

    def p(self, t):
        t = np.asarray(t, dtype=float)
        floor = self.C2 / (self.T * self.gamma1)
        return floor + (self.eps2 - floor) * np.exp(-self.gamma1 * t)

    def kappa(self, t):
        t = np.asarray(t, dtype=float)
        g1, k1 = self.gamma1, self.K1
        floor = self.C2 / (g1 * self.T)
        return (-(g1 + k1) / (self.beta1 * g1) * (self.eps2 - floor)
                * (1.0 - np.exp(-g1 * t))
                - (g1 + k1) * self.C2 / (self.beta1 * g1 * self.T) * t)

    def X(self, t):
        t = np.asarray(t, dtype=float)
        return self.T * self.phase.antiderivative(t / self.T)


def slow_schedule(eps2, T, margins: StabilityMargins, agg: SlowAggregates,
                  speed, period) -> SlowSchedule:
    """Schedule for T > T2; ``speed`` is the frozen speed curve c(s)."""
    if not 0.0 < eps2 < margins.delta1 / 2.0:
        raise DomainError(f"eps2 must lie in (0, delta1/2 = "
                          f"{margins.delta1 / 2:g})")
    T2 = agg.C2 / (eps2 * margins.gamma1)
    if T <= T2:
        raise RegimeError(f"slow construction needs T > T2 = {T2:g}, "
                          f"got T = {T:g}")
    phase = _PhaseIntegral(speed, period)
    return SlowSchedule(eps2=eps2, T=T, C2=agg.C2, gamma1=margins.gamma1,
                        K1=margins.K1, beta1=agg.beta1, C1=agg.C1, T2=T2,
                        phase=phase)


def slow_supersub_eval(sched: SlowSchedule, profile_family, t, x, side):
    """w+-(t,x) = phi(x - X_T +- kappa_T; t/T) +- p_T."""
    sign = _side_sign(side)
    x = np.asarray(x, dtype=float)
    prof = profile_family(t / sched.T)
    xi = x - sched.X(t) + sign * sched.kappa(t)
    return prof(xi) + sign * sched.p(t)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def residual_check(candidate, nl: Nonlinearity, T, t_grid, x_grid, side,
                   h=1e-4):
    """Minimum signed parabolic residual of a candidate over a (t,x) grid.

    N = d_t v - d_xx v - f(t/T, v) by Richardson-extrapolated central
    differences; a super-solution needs N >= 0 (side '+'), a sub-solution
    N <= 0 (side '-').  Diagnostic only: returns (min residual, argmin).
    """
    sign = _side_sign(side)
    x = np.asarray(x_grid, dtype=float)
    worst = math.inf
    argmin = (None, None)
    for t in np.asarray(t_grid, dtype=float):
        t = float(t)
        v = np.asarray(candidate(t, x))
        d1 = (np.asarray(candidate(t + h, x))
              - np.asarray(candidate(t - h, x))) / (2.0 * h)
        d1f = (np.asarray(candidate(t + 0.5 * h, x))
               - np.asarray(candidate(t - 0.5 * h, x))) / h
        vt = (4.0 * d1f - d1) / 3.0
        d2 = (np.asarray(candidate(t, x + h)) - 2.0 * v
              + np.asarray(candidate(t, x - h))) / (h * h)
        d2f = (np.asarray(candidate(t, x + 0.5 * h)) - 2.0 * v
               + np.asarray(candidate(t, x - 0.5 * h))) / (0.25 * h * h)
        vxx = (4.0 * d2f - d2) / 3.0
        res = sign * (vt - vxx - np.asarray(nl.f(t / T, v)))
        if not np.all(np.isfinite(res)):
            raise NumericError(f"finite differences broke down at t = {t:g}")
        i = int(np.argmin(res))
        if res[i] < worst:
            worst = float(res[i])
            argmin = (t, float(x[i]))
    return worst, argmin


def sandwich_check(trace, super_eval, sub_eval, stride=1, tol=1e-8):
    """Check sub <= u <= super on every recorded state of an evolve run.

    Evaluators take (t, x array).  Returns (holds, worst gap): the gap is
    the most negative slack, so holds means worst >= -tol.
    """
    states = getattr(trace, "states", None)
    if not states:
        raise ConfigurationError(
            "sandwich_check needs an evolve run with recorded states")
    worst = math.inf
    for state in states[::stride]:
        x = state.grid.nodes()
        upper = np.asarray(super_eval(state.time, x)) - state.values
        lower = state.values - np.asarray(sub_eval(state.time, x))
        worst = min(worst, float(np.min(upper)), float(np.min(lower)))
    return worst >= -tol, worst
