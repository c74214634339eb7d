"""Time stepping of u_t = u_xx + f(t/T, u) on a co-moving truncated line.

Diffusion is advanced by Crank-Nicolson (tridiagonal solve, Dirichlet data
1 on the left and 0 on the right); the reaction is explicit, evaluated at a
midpoint predictor so the step is second order in dt for frozen f.  The
grid re-centers on the tracked level set by integer multiples of dx, which
keeps the front away from the walls without breaking translation
equivariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ConfigurationError, DomainError, FrontShapeError,
                     InstabilityError, InsufficientDataError, TrackingError)
from . import _kernels
from .reaction import CubicNonlinearity, Nonlinearity

_CORRIDOR_TOL = 10.0 * np.finfo(float).eps


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [-L, L] plus the cumulative co-moving shift."""

    half_width: float
    dx: float
    n: int
    center_offset: float = 0.0

    def __post_init__(self):
        if self.half_width <= 0 or self.dx <= 0:
            raise DomainError("grid needs half_width > 0 and dx > 0")
        if self.n % 2 == 0 or self.n < 5:
            raise DomainError("node count must be odd and >= 5")
        if abs((self.n - 1) * self.dx - 2.0 * self.half_width) > 1e-9:
            raise DomainError("(n - 1) * dx must equal 2 * half_width")
        k = self.center_offset / self.dx
        if abs(k - round(k)) > 1e-9:
            raise DomainError("center_offset must be an integer multiple of dx")

    @staticmethod
    def make(half_width, dx):
        n = int(round(2.0 * half_width / dx)) + 1
        if n % 2 == 0:
            n += 1
        dx = 2.0 * half_width / (n - 1)
        return Grid1D(half_width=float(half_width), dx=dx, n=n)

    def nodes(self):
        """Lab-frame node positions."""
        return self.center_offset + np.linspace(-self.half_width,
                                                self.half_width, self.n)

    def shifted(self, k):
        return replace(self, center_offset=self.center_offset + k * self.dx)


@dataclass
class State:
    time: float
    values: np.ndarray
    grid: Grid1D

    def check_corridor(self, delta=0.25):
        if not np.all(np.isfinite(self.values)):
            raise InstabilityError(
                f"solution is not finite at t = {self.time:g}; reduce dt")
        lo = float(np.min(self.values))
        hi = float(np.max(self.values))
        if lo < -delta - _CORRIDOR_TOL or hi > 1.0 + delta + _CORRIDOR_TOL:
            raise InstabilityError(
                f"solution left [{-delta:g}, {1 + delta:g}] "
                f"(range [{lo:g}, {hi:g}]); reduce dt")


@dataclass
class FrontTrace:
    """Level-set positions over time with the fitted average speed."""

    times: np.ndarray
    positions: np.ndarray
    level: float
    burn_in: float
    speed_estimate: float = 0.0
    speed_uncertainty: float = 0.0
    states: list = field(default_factory=list)

    @property
    def samples(self):
        return list(zip(self.times, self.positions))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("time,level,position\n")
            for t, x in zip(self.times, self.positions):
                fh.write(f"{t:.12g},{self.level:.12g},{x:.12g}\n")


@dataclass(frozen=True)
class EvolveOptions:
    half_width: float = 60.0
    dx: float = 0.05
    dt: float | None = None       # default min(2e-3, T/50)
    sample_interval: float = 0.1
    burn_in_fraction: float = 0.25
    level: float = 0.5
    corridor_delta: float = 0.25
    record_states: bool = False
    record_interval: float | None = None   # defaults to sample_interval


def reaction_slope_bound(nl: Nonlinearity, u_lo=-0.3, u_hi=1.3):
    """Sampled sup |f_u| over a representative time grid (explicit-step cap)."""
    u = np.linspace(u_lo, u_hi, 321)
    best = 0.0
    for t in nl.time_grid(64):
        best = max(best, float(np.max(np.abs(nl.fu(float(t), u)))))
    return best


def _make_stepper(grid: Grid1D, dt, nl: Nonlinearity, T):
    """Closure advancing interior values one IMEX Crank-Nicolson step."""
    from scipy.linalg import solve_banded

    n = grid.n
    dx = grid.dx
    r = dt / (dx * dx)
    m = n - 2
    # banded (I - r/2 L) for the interior block, Dirichlet neighbors folded
    ab = np.zeros((3, m))
    ab[0, 1:] = -0.5 * r
    ab[1, :] = 1.0 + r
    ab[2, :-1] = -0.5 * r

    def step(values, t):
        u = values
        ui = u[1:-1]
        lap = (u[:-2] - 2.0 * ui + u[2:]) / (dx * dx)
        u_half = ui + 0.5 * dt * (lap + nl.f(t / T, ui))
        rhs = (1.0 - r) * ui + 0.5 * r * (u[:-2] + u[2:]) \
            + dt * nl.f((t + 0.5 * dt) / T, u_half)
        rhs[0] += 0.5 * r * u[0]
        rhs[-1] += 0.5 * r * u[-1]
        out = np.empty_like(u)
        out[0] = u[0]
        out[-1] = u[-1]
        out[1:-1] = solve_banded((1, 1), ab, rhs, overwrite_b=True)
        return out

    return step


def _make_block_stepper(grid: Grid1D, dt, nl: CubicNonlinearity, T):
    """Compiled variant of the stepper advancing whole sample blocks."""
    n = grid.n
    dx2 = grid.dx * grid.dx
    r = dt / dx2
    m = n - 2
    dp = np.empty(m)
    dp[0] = 1.0 + r
    for i in range(1, m):
        dp[i] = 1.0 + r - 0.25 * r * r / dp[i - 1]
    cp = 0.5 * r / dp
    rhs = np.empty(m)

    def block(values, t, nsteps):
        sub = t + dt * np.arange(nsteps)
        a_pred = np.asarray(nl.a(sub / T), dtype=float)
        b_pred = np.asarray(nl.b(sub / T), dtype=float)
        a_mid = np.asarray(nl.a((sub + 0.5 * dt) / T), dtype=float)
        b_mid = np.asarray(nl.b((sub + 0.5 * dt) / T), dtype=float)
        _kernels.imex_cubic_block(values, a_pred, b_pred, a_mid, b_mid,
                                  r, dt, dx2, cp, dp, rhs)
        return values

    return block


def _check_dt(dt, T, k1):
    if dt <= 0:
        raise DomainError("dt must be positive")
    if dt * k1 > 0.5 + 1e-12:
        raise ConfigurationError(
            f"dt * sup|f_u| = {dt * k1:.3g} > 0.5: reaction step unstable")
    if T < 1.0 and dt > T / 50.0 + 1e-12:
        raise ConfigurationError(
            f"dt = {dt:g} does not resolve the forcing (need dt <= T/50)")


def step_imex(state: State, nl: Nonlinearity, T, dt) -> State:
    """One IMEX step; second-order local consistency in dt for frozen f."""
    _check_dt(dt, T, reaction_slope_bound(nl))
    step = _make_stepper(state.grid, dt, nl, T)
    new = State(time=state.time + dt, values=step(state.values, state.time),
                grid=state.grid)
    new.check_corridor()
    return new


def level_position(state: State, alpha=0.5):
    """Lab-frame position of the unique alpha-crossing, linearly interpolated."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("level must be in (0, 1)")
    v = state.values - alpha
    sign = np.sign(v)
    crossings = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(sign == 0)[0]
    count = len(crossings) + len(exact)
    if count != 1:
        raise FrontShapeError(
            f"expected one crossing of level {alpha:g}, found {count}")
    x = state.grid.nodes()
    if len(exact):
        return float(x[exact[0]])
    i = crossings[0]
    frac = v[i] / (v[i] - v[i + 1])
    return float(x[i] + frac * (x[i + 1] - x[i]))


def _slope_fit(t, x):
    """(slope, standard error of slope) by least squares."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tc = t - t.mean()
    denom = float(tc @ tc)
    slope = float(tc @ x) / denom
    resid = x - x.mean() - slope * tc
    dof = max(len(t) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / denom)
    return slope, stderr


def average_speed(trace: FrontTrace, min_samples=100):
    """Least-squares speed over post-burn-in samples with a split-halves bar."""
    mask = trace.times >= trace.burn_in
    t = trace.times[mask]
    x = trace.positions[mask]
    if len(t) < min_samples:
        raise InsufficientDataError(
            f"need >= {min_samples} post-burn-in samples, have {len(t)}")
    slope, stderr = _slope_fit(t, x)
    half = len(t) // 2
    s1, _ = _slope_fit(t[:half], x[:half])
    s2, _ = _slope_fit(t[half:], x[half:])
    return slope, 0.5 * abs(s1 - s2) + stderr


def _initial_values(initial, grid: Grid1D):
    if callable(initial):
        vals = np.asarray(initial(grid.nodes()), dtype=float)
    else:
        vals = np.asarray(initial, dtype=float)
        if vals.shape != (grid.n,):
            raise ConfigurationError(
                f"sampled initial data must have {grid.n} nodes")
    if abs(vals[0] - 1.0) > 1e-6 or abs(vals[-1]) > 1e-6:
        raise ConfigurationError("initial data must be ~1 on the left wall "
                                 "and ~0 on the right wall")
    vals = vals.copy()
    vals[0] = 1.0
    vals[-1] = 0.0
    return vals


def _recenter(values, grid: Grid1D, k):
    """Shift the window by k nodes, padding with the limit states."""
    out = np.empty_like(values)
    if k > 0:
        out[:-k] = values[k:]
        out[-k:] = 0.0
    elif k < 0:
        out[-k:] = values[:k]
        out[:-k] = 1.0
    else:
        out[:] = values
    return out, grid.shifted(k)


def run_cauchy(nl: Nonlinearity, T, initial, horizon,
               opts: EvolveOptions = EvolveOptions()) -> FrontTrace:
    """Evolve front-like data to the horizon and fit the average speed.

    Parameters
    ----------
    nl : Nonlinearity
        Reaction term f(s, u); evaluated at s = t/T.
    T : float
        Temporal scaling of the forcing.
    initial : callable or ndarray
        Front-like initial data (a WaveProfile works directly).
    horizon : float
        Final time; the speed is fitted on [burn_in, horizon].
    opts : EvolveOptions

    Returns
    -------
    FrontTrace
        Level positions each sample interval, with the least-squares speed
        and a split-halves uncertainty; full states are kept when
        opts.record_states is set.
    """
    if horizon <= 0 or T <= 0:
        raise DomainError("horizon and T must be positive")
    grid = Grid1D.make(opts.half_width, opts.dx)
    dt = opts.dt if opts.dt is not None else min(2.0e-3, T / 50.0)
    k1 = reaction_slope_bound(nl)
    _check_dt(dt, T, k1)

    # land exactly on sample times
    per_sample = max(1, int(round(opts.sample_interval / dt)))
    dt = opts.sample_interval / per_sample
    n_samples = int(round(horizon / opts.sample_interval))

    record_every = 1
    if opts.record_states:
        rec = opts.record_interval or opts.sample_interval
        record_every = max(1, int(round(rec / opts.sample_interval)))

    values = _initial_values(initial, grid)
    use_fast = isinstance(nl, CubicNonlinearity)
    if use_fast:
        block = _make_block_stepper(grid, dt, nl, T)
    else:
        step = _make_stepper(grid, dt, nl, T)
    burn_in = opts.burn_in_fraction * horizon

    times = np.empty(n_samples + 1)
    positions = np.empty(n_samples + 1)
    states = []

    t = 0.0
    state = State(time=t, values=values, grid=grid)
    times[0] = t
    positions[0] = level_position(state, opts.level)
    if opts.record_states:
        states.append(State(time=t, values=values.copy(), grid=grid))

    for j in range(1, n_samples + 1):
        if use_fast:
            block(values, t, per_sample)
        else:
            for _ in range(per_sample):
                values = step(values, t)
                t += dt
        t = j * opts.sample_interval   # avoid drift
        state = State(time=t, values=values, grid=grid)
        state.check_corridor(opts.corridor_delta)
        try:
            pos = level_position(state, opts.level)
        except FrontShapeError as exc:
            raise TrackingError(
                f"lost the front at t = {t:g}: {exc}") from exc
        times[j] = t
        positions[j] = pos
        if opts.record_states and j % record_every == 0:
            states.append(State(time=t, values=values.copy(), grid=grid))

        drift = pos - grid.center_offset
        if abs(drift) > opts.half_width / 4.0:
            if abs(drift) > 0.75 * opts.half_width:
                raise TrackingError(
                    f"front drifted {drift:g} beyond the re-centering band")
            k = int(round(drift / grid.dx))
            values, grid = _recenter(values, grid, k)
            if not use_fast:
                step = _make_stepper(grid, dt, nl, T)

    trace = FrontTrace(times=times, positions=positions, level=opts.level,
                       burn_in=burn_in, states=states)
    trace.speed_estimate, trace.speed_uncertainty = average_speed(trace)
    return trace
