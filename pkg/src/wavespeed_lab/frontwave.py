"""Traveling-wave solver for the frozen/homogenized equations.

Solves phi'' + c phi' + g(phi) = 0, phi(-inf) = 1, phi(+inf) = 0 by
phase-plane shooting: launch just below the u = 1 saddle along its unstable
eigendirection, classify the trajectory as "overshoot" (phi crosses 0 with
phi' < 0) or "turnback" (phi' reaches 0 while phi > 0), and bisect on c.
The resulting monotone profile is re-gridded on a uniform window and shifted
so phi(0) = 1/2, with exponential tails beyond the traced range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import (DomainError, NoHeteroclinicError, NumericError,
                     PrecisionError, ValidationError)
from .reaction import FrozenView

OVERSHOOT = "overshoot"
TURNBACK = "turnback"

_OUTCOME_NAME = {_kernels.OUTCOME_OVERSHOOT: OVERSHOOT,
                 _kernels.OUTCOME_TURNBACK: TURNBACK}


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of the shooting solver (defaults sized for the cubic family)."""

    window: float = 40.0
    n_points: int = 4001
    launch_eps: float = 1.0e-8
    c_tol: float = 1.0e-10
    max_iter: int = 200
    step: float = 4.0e-3          # RK4 step of the phase-plane integration
    xi_span: float = 400.0
    trace_floor: float = 3.0e-5   # stop tracing below this phi, switch to tail
    tail_anchor: float = 1.0e-3   # anchor the analytic tail at this phi level
    zero_floor: float = 1.0e-14   # phi below this counts as an overshoot


@dataclass(frozen=True)
class SpeedBracket:
    lo: float
    hi: float
    classification_trace: tuple = ()
    fallback: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError("bracket requires lo < hi")


@dataclass
class WaveProfile:
    """Monotone front profile phi on a uniform grid with speed and tails."""

    xi: np.ndarray
    values: np.ndarray
    speed: float
    decay: tuple  # (lam1 right-tail rate, lam2 left-tail rate)
    normalization_shift: float = 0.0

    def __post_init__(self):
        self._spline = None

    def _ensure_spline(self):
        if self._spline is None:
            from scipy.interpolate import CubicSpline
            self._spline = CubicSpline(self.xi, self.values)

    def __call__(self, x):
        """phi(x), tail-extended by its exponential asymptotics."""
        self._ensure_spline()
        x = np.asarray(x, dtype=float)
        lam1, lam2 = self.decay
        W_lo, W_hi = self.xi[0], self.xi[-1]
        inner = np.clip(x, W_lo, W_hi)
        out = self._spline(inner)
        right = x > W_hi
        left = x < W_lo
        if np.any(right):
            out = np.where(right, self.values[-1] * np.exp(-lam1 * (x - W_hi)), out)
        if np.any(left):
            out = np.where(left,
                           1.0 - (1.0 - self.values[0]) * np.exp(lam2 * (x - W_lo)),
                           out)
        return out

    def derivative(self, x, order=1):
        self._ensure_spline()
        x = np.asarray(x, dtype=float)
        lam1, lam2 = self.decay
        W_lo, W_hi = self.xi[0], self.xi[-1]
        inner = np.clip(x, W_lo, W_hi)
        out = self._spline(inner, order)
        right = x > W_hi
        left = x < W_lo
        if np.any(right):
            out = np.where(right, self.values[-1] * (-lam1) ** order
                           * np.exp(-lam1 * (x - W_hi)), out)
        if np.any(left):
            out = np.where(left, -(1.0 - self.values[0]) * lam2 ** order
                           * np.exp(lam2 * (x - W_lo)), out)
        return out


# ---------------------------------------------------------------------------
# decay rates
# ---------------------------------------------------------------------------

def decay_rates(c, dg0, dg1):
    """Tail decay rates of the connecting wave (linearization at 0 and 1)."""
    if dg0 >= 0 or dg1 >= 0:
        raise DomainError("decay rates need strictly stable limit states")
    lam1 = (c + math.sqrt(c * c - 4.0 * dg0)) / 2.0
    lam2 = (-c + math.sqrt(c * c - 4.0 * dg1)) / 2.0
    return lam1, lam2


def uniform_decay_rates(c, gamma0):
    """Uniform-in-s decay bounds built from the stability margin gamma0."""
    if gamma0 <= 0:
        raise DomainError("uniform decay rates need gamma0 > 0")
    disc = math.sqrt(c * c + 4.0 * gamma0)
    return (c + disc) / 2.0, (-c + disc) / 2.0


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def _check_view(g: FrozenView):
    g0 = float(g.fun(0.0))
    g1 = float(g.fun(1.0))
    if abs(g0) > 1e-10 or abs(g1) > 1e-10:
        raise ValidationError(f"g(0)={g0:g}, g(1)={g1:g}: limit states are not zeros")
    dg0 = float(g.dfun(0.0))
    dg1 = float(g.dfun(1.0))
    if dg0 >= 0 or dg1 >= 0:
        raise ValidationError("limit states must be linearly stable (g'(0), g'(1) < 0)")
    return dg0, dg1


def _capture_tol(g: FrozenView):
    # scale of |phi'| below which a trajectory sitting where g > 0 counts as
    # captured by an interior equilibrium; the connecting orbit keeps
    # |phi'| ~ sqrt(sup|g|) there, so two orders of magnitude is safe
    sup_g = float(np.max(np.abs(g.fun(np.linspace(0.0, 1.0, 201)))))
    return 1e-3 * min(1.0, math.sqrt(max(sup_g, 1e-12)))


def _classify(g: FrozenView, c, opts: SolveOptions, dg1, capture_p):
    lam2 = (-c + math.sqrt(c * c - 4.0 * dg1)) / 2.0
    phi0 = 1.0 - opts.launch_eps
    p0 = -lam2 * opts.launch_eps
    # a weak unstable eigenvalue at u = 1 (large |c|) stretches both the
    # departure and the capture phase, so widen the span before giving up
    for span in (opts.xi_span, 4.0 * opts.xi_span, 16.0 * opts.xi_span):
        if g.poly is not None:
            code = _kernels.shoot_classify(np.asarray(g.poly, dtype=float), c,
                                           phi0, p0, opts.step, span,
                                           opts.zero_floor, capture_p)
        else:
            code = _py_shoot_classify(g.fun, c, phi0, p0, opts.step, span,
                                      opts.zero_floor, capture_p)
        if code != _kernels.OUTCOME_UNDECIDED:
            return _OUTCOME_NAME[code]
    raise PrecisionError(f"trajectory undecided within span at c={c:.12g}")


def _py_rk4_step(gfun, c, phi, p, h):
    def rhs(phi_, p_):
        return p_, -c * p_ - float(gfun(phi_))

    k1p, k1q = rhs(phi, p)
    k2p, k2q = rhs(phi + 0.5 * h * k1p, p + 0.5 * h * k1q)
    k3p, k3q = rhs(phi + 0.5 * h * k2p, p + 0.5 * h * k2q)
    k4p, k4q = rhs(phi + h * k3p, p + h * k3q)
    return (phi + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
            p + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q))


def _py_shoot_classify(gfun, c, phi0, p0, h, xi_max, floor, capture_p):
    phi, p = phi0, p0
    xi = 0.0
    while xi < xi_max:
        phi, p = _py_rk4_step(gfun, c, phi, p, h)
        xi += h
        if phi <= floor:
            return _kernels.OUTCOME_OVERSHOOT
        if p >= 0.0:
            return _kernels.OUTCOME_TURNBACK
        if 1e-3 < phi < 0.98 and (p >= -1e-6 or
                                  (p >= -capture_p and float(gfun(phi)) > 0.0)):
            # interior-equilibrium capture: same side as a turnback
            return _kernels.OUTCOME_TURNBACK
    return _kernels.OUTCOME_UNDECIDED


def _py_shoot_trace(gfun, c, phi0, p0, h, xi_max, stop_phi):
    xs, phis, ps = [0.0], [phi0], [p0]
    phi, p = phi0, p0
    xi = 0.0
    while xi < xi_max:
        phi_new, p_new = _py_rk4_step(gfun, c, phi, p, h)
        xi += h
        if p_new >= 0.0 or phi_new <= stop_phi:
            break
        phi, p = phi_new, p_new
        xs.append(xi)
        phis.append(phi)
        ps.append(p)
    return np.array(xs), np.array(phis), np.array(ps)


def _trace(g: FrozenView, c, opts: SolveOptions, dg1):
    lam2 = (-c + math.sqrt(c * c - 4.0 * dg1)) / 2.0
    phi0 = 1.0 - opts.launch_eps
    p0 = -lam2 * opts.launch_eps
    if g.poly is not None:
        cap = int(opts.xi_span / opts.step) + 2
        xs = np.empty(cap)
        phis = np.empty(cap)
        ps = np.empty(cap)
        n = _kernels.shoot_trace(np.asarray(g.poly, dtype=float), c, phi0, p0,
                                 opts.step, opts.xi_span, opts.trace_floor,
                                 xs, phis, ps)
        return xs[:n], phis[:n], ps[:n]
    return _py_shoot_trace(g.fun, c, phi0, p0, opts.step, opts.xi_span,
                           opts.trace_floor)


def _default_bracket(g: FrozenView):
    u = np.linspace(-0.1, 1.1, 601)
    sup_slope = float(np.max(np.abs(g.dfun(u))))
    cbar = 2.0 * math.sqrt(2.0 * max(sup_slope, 1e-12))
    return -cbar - 0.1, cbar + 0.1


def solve_frozen_wave(g: FrozenView, opts: SolveOptions = SolveOptions(),
                      bracket: SpeedBracket | tuple | None = None) -> WaveProfile:
    """Shooting/bisection solve of the connecting wave of g.

    Returns the profile on a uniform grid over [-W, W], normalized so
    phi(0) = 1/2, with |c - c*| <= opts.c_tol at the bisection fixed point.
    """
    dg0, dg1 = _check_view(g)

    if bracket is None:
        lo, hi = _default_bracket(g)
    elif isinstance(bracket, SpeedBracket):
        lo, hi = bracket.lo, bracket.hi
    else:
        lo, hi = bracket

    trace_log = []
    capture_p = _capture_tol(g)

    def outcome(c):
        res = _classify(g, c, opts, dg1, capture_p)
        trace_log.append((c, res))
        return res

    out_lo = outcome(lo)
    out_hi = outcome(hi)
    expand = 0
    while out_lo == out_hi and expand < 6:
        width = hi - lo
        lo -= width
        hi += width
        out_lo = outcome(lo)
        out_hi = outcome(hi)
        expand += 1
    if out_lo == out_hi:
        raise NoHeteroclinicError(
            f"no sign change across bracket [{lo:g}, {hi:g}] (both {out_lo})")

    for _ in range(opts.max_iter):
        if hi - lo <= opts.c_tol:
            break
        mid = 0.5 * (lo + hi)
        if outcome(mid) == out_lo:
            lo = mid
        else:
            hi = mid
    else:
        raise PrecisionError("bisection did not reach tolerance within max_iter")
    c_star = 0.5 * (lo + hi)

    lam1, lam2 = decay_rates(c_star, dg0, dg1)
    xs, phis, ps = _trace(g, c_star, opts, dg1)
    # keep the strictly decreasing part only (a near-miss may curl at the end)
    dec = np.nonzero(np.diff(phis) >= 0)[0]
    if dec.size:
        end = dec[0] + 1
        xs, phis, ps = xs[:end], phis[:end], ps[:end]
    # below tail_anchor the bisection residual, amplified along the departing
    # direction, pollutes the trace; anchor the analytic tail above that
    keep = np.nonzero(phis >= opts.tail_anchor)[0]
    if keep.size:
        end = keep[-1] + 1
        xs, phis, ps = xs[:end], phis[:end], ps[:end]
    if phis[-1] > 0.45 or phis[0] < 0.55:
        raise PrecisionError("traced trajectory does not span the half level")

    half = _hermite_root(xs, phis, ps, 0.5)

    W = opts.window
    grid = np.linspace(-W, W, opts.n_points)
    x_abs = grid + half
    values = _hermite_eval(xs, phis, ps, np.clip(x_abs, xs[0], xs[-1]))
    left = x_abs < xs[0]
    right = x_abs > xs[-1]
    values = np.where(left,
                      1.0 - (1.0 - phis[0]) * np.exp(lam2 * (x_abs - xs[0])),
                      values)
    values = np.where(right, phis[-1] * np.exp(-lam1 * (x_abs - xs[-1])), values)

    # float64 saturates the exponential tails (1 - eps rounds to 1), so the
    # open-interval and strict-decrease checks apply to the unsaturated core
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise NumericError("profile left [0, 1]")
    if np.any(np.diff(values) > 0.0):
        raise NumericError("profile is not monotone decreasing on the grid")
    core = (values > 1e-12) & (1.0 - values > 1e-12)
    if np.any(np.diff(values[core]) >= 0.0):
        raise NumericError("profile is not strictly decreasing in the core")

    return WaveProfile(xi=grid, values=values, speed=c_star,
                       decay=(lam1, lam2), normalization_shift=half)


def _hermite_interval(xs, queries):
    idx = np.clip(np.searchsorted(xs, queries, side="right") - 1, 0, len(xs) - 2)
    return idx


def _hermite_eval(xs, phis, ps, queries):
    """Cubic Hermite interpolation using the exact phase-plane slopes."""
    q = np.asarray(queries, dtype=float)
    idx = _hermite_interval(xs, q)
    h = xs[idx + 1] - xs[idx]
    s = (q - xs[idx]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return (h00 * phis[idx] + h10 * h * ps[idx]
            + h01 * phis[idx + 1] + h11 * h * ps[idx + 1])


def _hermite_root(xs, phis, ps, level):
    """xi with phi(xi) = level on the traced, strictly decreasing samples."""
    k = int(np.searchsorted(-phis, -level))  # phis decreasing
    k = min(max(k, 1), len(xs) - 1)
    lo, hi = xs[k - 1], xs[k]
    return brentq(lambda x: float(_hermite_eval(xs, phis, ps, x)) - level,
                  lo, hi, xtol=1e-13)


def cubic_closed_form(a0, b0, opts: SolveOptions = SolveOptions()) -> WaveProfile:
    """Exact wave of the frozen cubic: psi(x) = 1/(1+exp(sqrt(a0/2) x))."""
    if a0 <= 0 or not 0 < b0 < 1:
        raise DomainError("cubic closed form needs a0 > 0, b0 in (0,1)")
    grid = np.linspace(-opts.window, opts.window, opts.n_points)
    kappa = math.sqrt(a0 / 2.0)
    values = 1.0 / (1.0 + np.exp(kappa * grid))
    c = math.sqrt(2.0 * a0) * (0.5 - b0)
    lam1, lam2 = decay_rates(c, -a0 * b0, -a0 * (1.0 - b0))
    return WaveProfile(xi=grid, values=values, speed=c,
                       decay=(lam1, lam2), normalization_shift=0.0)


# ---------------------------------------------------------------------------
# speed brackets from envelope nonlinearities
# ---------------------------------------------------------------------------

def _tabulated_view(ugrid, vals, label):
    from scipy.interpolate import CubicSpline
    spline = CubicSpline(ugrid, vals)
    return FrozenView(fun=spline, dfun=lambda u: spline(u, 1),
                      d2fun=lambda u: spline(u, 2), poly=None, label=label)


def _is_bistable(ugrid, vals):
    """Zero at the ends, negative then positive inside, one sign change."""
    interior = (ugrid > 1e-3) & (ugrid < 1.0 - 1e-3)
    v = vals[interior]
    signs = np.sign(np.where(np.abs(v) < 1e-14, 0.0, v))
    nz = signs[signs != 0]
    if nz.size == 0 or nz[0] > 0 or nz[-1] < 0:
        return False
    changes = np.count_nonzero(np.diff(nz) != 0)
    return changes == 1


def speed_bracket(views, opts: SolveOptions = SolveOptions()) -> SpeedBracket:
    """Bracket [c(g-), c(g+)] from the pointwise envelopes of a frozen family.

    The envelopes bound every member, so by comparison their wave speeds
    bracket every frozen speed; the bracket is widened by 10% for safety.
    Falls back to [-cbar, cbar] with cbar = 2 sqrt(2 sup|g'|) when an
    envelope is not bistable even after smoothing.
    """
    views = list(views)
    if not views:
        raise DomainError("speed_bracket needs at least one frozen view")
    ugrid = np.linspace(-0.25, 1.25, 1501)
    table = np.array([np.asarray(v.fun(ugrid), dtype=float) for v in views])
    env_lo = table.min(axis=0)
    env_hi = table.max(axis=0)

    speeds = []
    fallback = False
    trace = []
    for vals, label in ((env_lo, "lower-envelope"), (env_hi, "upper-envelope")):
        fixed = _restore_zeros(ugrid, vals)
        if not _is_bistable(ugrid, fixed):
            fixed = _mollify(ugrid, fixed)
        if fixed is None or not _is_bistable(ugrid, fixed):
            fallback = True
            break
        view = _tabulated_view(ugrid, fixed, label)
        try:
            prof = solve_frozen_wave(view, opts)
        except (ValidationError, NoHeteroclinicError, PrecisionError):
            fallback = True
            break
        speeds.append(prof.speed)

    if fallback:
        sup_slope = max(float(np.max(np.abs(v.dfun(np.linspace(0, 1, 401)))))
                        for v in views)
        cbar = 2.0 * math.sqrt(2.0 * sup_slope)
        return SpeedBracket(lo=-cbar, hi=cbar, fallback=True)

    lo, hi = min(speeds), max(speeds)
    width = hi - lo
    pad = max(0.1 * width, 0.05)
    return SpeedBracket(lo=lo - pad, hi=hi + pad,
                        classification_trace=tuple(trace))


def _restore_zeros(ugrid, vals):
    """Subtract the linear interpolant of the endpoint residuals on [0,1]."""
    vals = vals.copy()
    i0 = int(np.argmin(np.abs(ugrid)))
    i1 = int(np.argmin(np.abs(ugrid - 1.0)))
    r0, r1 = vals[i0], vals[i1]
    vals -= r0 + (r1 - r0) * (ugrid - ugrid[i0]) / (ugrid[i1] - ugrid[i0])
    return vals


def _mollify(ugrid, vals, sigma=0.04):
    """Gaussian smoothing in u, endpoint zeros restored; may fix kinks."""
    du = ugrid[1] - ugrid[0]
    half = int(3 * sigma / du)
    if half < 1:
        return None
    kernel = np.exp(-0.5 * (np.arange(-half, half + 1) * du / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.concatenate([np.full(half, vals[0]), vals,
                             np.full(half, vals[-1])])
    smooth = np.convolve(padded, kernel, mode="valid")
    return _restore_zeros(ugrid, smooth)


# ---------------------------------------------------------------------------
# speed-sign classifier
# ---------------------------------------------------------------------------

def speed_sign_classifier(fbar: FrozenView, n_grid=4001, tol=1e-10):
    """Sign of the wave speed of the averaged equation, via G(u) = int_0^u fbar.

    negative: G(1) < 0 and fbar < 0 wherever G(u) > G(1);
    positive: G(1) > 0 and fbar > 0 wherever G(u) > G(0) = 0;
    zero:     G(1) = 0 and G < 0 on (0,1); otherwise inconclusive.
    """
    from scipy.integrate import cumulative_trapezoid, quad
    u = np.linspace(0.0, 1.0, n_grid)
    vals = np.asarray(fbar.fun(u), dtype=float)
    if abs(vals[0]) > 1e-10 or abs(vals[-1]) > 1e-10:
        raise ValidationError("classifier needs fbar(0) = fbar(1) = 0")
    G = np.concatenate([[0.0], cumulative_trapezoid(vals, u)])
    G1, err = quad(lambda x: float(fbar.fun(x)), 0.0, 1.0,
                   limit=200, epsabs=1e-13, epsrel=1e-12)
    if not np.isfinite(G1) or err > 1e-8:
        raise NumericError("quadrature of G(1) failed to converge")
    interior = (u > tol) & (u < 1.0 - tol)

    if G1 < -tol:
        mask = interior & (G > G1 + tol)
        if np.all(vals[mask] < tol):
            return "negative"
    if G1 > tol:
        mask = interior & (G > tol)
        if np.all(vals[mask] > -tol):
            return "positive"
    if abs(G1) <= tol and np.all(G[interior] < 0.0):
        return "zero"
    return "inconclusive"
