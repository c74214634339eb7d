"""Config-driven experiment harness.

Reads a TOML config declaring the cubic coefficients and an experiment
kind, runs the corresponding pipeline (T-sweep, rate fit, sign-reversal
reproduction, lemma verification, or frozen-speed curve), and emits CSV
tables, SVG plots, and a manifest with content hashes so re-runs are
byte-for-byte comparable.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:          # python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import (ConfigurationError, InsufficientDataError,
                     ValidationError, WavespeedError)
from .evolve import EvolveOptions, run_cauchy
from .limits import (cubic_d0, cubic_dstar, fit_rate as _loglog_fit,
                     frozen_speed_curve, homogenized_speed, slow_limit_speed,
                     SpeedReport)
from .reaction import (CubicNonlinearity, TemporalCoefficient,
                       stability_margins)
from .supersub import (cubic_profile_family, rapid_aggregates, rapid_schedule,
                       rapid_supersub_eval, residual_check, sandwich_check,
                       slow_aggregates, slow_schedule, slow_supersub_eval)

EXPERIMENT_KINDS = ("sweep", "rapid-rate", "slow-rate", "sign-reversal",
                    "lemma-check", "frozen-curve")

_DEFAULT_T_GRIDS = {
    "rapid-rate": (0.05, 0.1, 0.2, 0.4),
    "slow-rate": (10.0, 20.0, 40.0, 80.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated contents of one experiment config file."""

    kind: str
    nl: CubicNonlinearity
    t_grid: tuple
    overrides: dict
    out_dir: str
    seed: int
    digest: str
    label: str = "experiment"


@dataclass
class RunRecord:
    """Everything one run produced, hashable and re-emittable."""

    config: ExperimentConfig
    version: str = __version__
    wall_times: dict = field(default_factory=dict)
    report: SpeedReport | None = None
    checks: dict = field(default_factory=dict)
    signs: dict = field(default_factory=dict)
    curve_table: list = field(default_factory=list)
    traces: list = field(default_factory=list)      # (T, FrontTrace)
    dropped_points: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    files: dict = field(default_factory=dict)       # name -> sha256


def _coefficient(table) -> TemporalCoefficient:
    if isinstance(table, (int, float)):
        return TemporalCoefficient.constant(float(table))
    kind = table.get("kind", "trig-polynomial")
    if kind == "constant":
        return TemporalCoefficient.constant(float(table["mean"]))
    if kind == "trig-polynomial":
        return TemporalCoefficient.trig(float(table["mean"]),
                                        [tuple(m) for m in table["modes"]])
    if kind == "smoothed-step":
        return TemporalCoefficient.smoothed_step(
            [tuple(s) for s in table["intervals"]],
            width=float(table.get("width", 0.02)))
    if kind == "quasi-periodic":
        return TemporalCoefficient.quasi_periodic(
            float(table["mean"]), [tuple(m) for m in table["modes"]],
            horizon=float(table.get("horizon", 1.0e4)))
    raise ConfigurationError(f"unknown coefficient kind {kind!r}")


def load_config(path, out_dir=None) -> ExperimentConfig:
    """Parse and validate a TOML experiment config."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)

    kind = raw.get("kind", "sweep")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(
            f"kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    for name in ("a", "b"):
        if name not in raw:
            raise ConfigurationError(f"config must declare coefficient {name!r}")
    nl = CubicNonlinearity(_coefficient(raw["a"]), _coefficient(raw["b"]))

    t_grid = tuple(float(t) for t in
                   raw.get("T_grid", _DEFAULT_T_GRIDS.get(kind, (0.1, 1.0, 10.0))))
    if any(t <= 0 for t in t_grid):
        raise ValidationError("T_grid entries must be positive")
    if list(t_grid) != sorted(t_grid):
        raise ValidationError("T_grid must be sorted ascending")

    overrides = dict(raw.get("solver", {}))
    allowed = {"dx", "dt", "half_width", "horizon", "burn_in_fraction",
               "sample_interval", "eps1", "eps2", "resolution"}
    bad = set(overrides) - allowed
    if bad:
        raise ConfigurationError(f"unknown solver overrides: {sorted(bad)}")
    if overrides.get("dx", 1.0) <= 0:
        raise ValidationError("dx override must be positive")

    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, default=str).encode()).hexdigest()
    return ExperimentConfig(
        kind=kind, nl=nl, t_grid=t_grid, overrides=overrides,
        out_dir=out_dir or raw.get("out_dir", "out"),
        seed=int(raw.get("seed", 0)), digest=digest,
        label=str(raw.get("label", "experiment")))


def _evolve_options(config: ExperimentConfig) -> EvolveOptions:
    ov = config.overrides
    return EvolveOptions(
        half_width=float(ov.get("half_width", 60.0)),
        dx=float(ov.get("dx", 0.05)),
        dt=float(ov["dt"]) if "dt" in ov else None,
        sample_interval=float(ov.get("sample_interval", 0.1)),
        burn_in_fraction=float(ov.get("burn_in_fraction", 0.25)))


def _default_horizon(kind, T):
    if kind in ("slow-rate",) or T >= 1.0:
        return 20.0 * T
    return 200.0


def _sweep_one(args):
    nl, T, initial, horizon, opts = args
    trace = run_cauchy(nl, T, initial, horizon, opts)
    return T, trace


def resolve_jobs(jobs=None):
    if jobs is None:
        jobs = os.environ.get("WAVESPEED_LAB_JOBS")
    if jobs is None:
        return os.cpu_count() or 1
    return max(1, int(jobs))


def _run_sweep(config: ExperimentConfig, record: RunRecord, jobs):
    nl = config.nl
    opts = _evolve_options(config)
    t0 = time.perf_counter()
    c0, phi0 = homogenized_speed(nl)
    curve = frozen_speed_curve(nl, int(config.overrides.get("resolution", 256)))
    c_star = slow_limit_speed(curve)
    record.wall_times["limits"] = time.perf_counter() - t0

    tasks = []
    for T in config.t_grid:
        horizon = float(config.overrides.get("horizon",
                                             _default_horizon(config.kind, T)))
        tasks.append((nl, T, phi0, horizon, opts))

    t0 = time.perf_counter()
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = dict(pool.map(_sweep_one, tasks))
    else:
        results = dict(_sweep_one(task) for task in tasks)
    record.wall_times["sweep"] = time.perf_counter() - t0

    report = SpeedReport(c0=c0, c_star=c_star)
    try:
        report.d0 = cubic_d0(nl.a, nl.b)
        report.d_star = cubic_dstar(nl.a, nl.b)
    except WavespeedError:
        pass
    m_bar = float(nl.fbar_du(0.0))
    if m_bar > 0:
        from .limits import kpp_spreading_speed
        report.kpp = kpp_spreading_speed(m_bar)
    for T in sorted(results):
        trace = results[T]
        report.per_T.append((T, trace.speed_estimate, trace.speed_uncertainty))
        record.traces.append((T, trace))
    record.report = report
    return report


def fit_rate(points, uncertainties=None):
    """Log-log rate fit with a noise floor: (exponent, intercept, r2).

    points are (scale, deviation) pairs; a point whose deviation does not
    exceed its combined uncertainty is dropped (and reported on the record
    by the caller).  Fewer than 3 surviving points is an error.
    """
    pts = [(float(s), float(d)) for s, d in points]
    if uncertainties is None:
        uncertainties = [0.0] * len(pts)
    keep, dropped = [], []
    for (s, d), u in zip(pts, uncertainties):
        (keep if d > u else dropped).append((s, d))
    if len(keep) < 3:
        raise InsufficientDataError(
            f"rate fit needs >= 3 points above the noise floor, have "
            f"{len(keep)}; widen the T range or refine the solver")
    scales = np.array([s for s, _ in keep])
    devs = np.array([d for _, d in keep])
    slope, r2 = _loglog_fit(scales, devs)
    intercept = float(np.mean(np.log(devs) - slope * np.log(scales)))
    return (slope, intercept, r2), dropped


def _run_rate(config: ExperimentConfig, record: RunRecord, jobs):
    report = _run_sweep(config, record, jobs)
    limit = report.c0 if config.kind == "rapid-rate" else report.c_star
    scale = (lambda T: T) if config.kind == "rapid-rate" else (lambda T: 1.0 / T)
    points = [(scale(T), abs(est - limit)) for T, est, _ in report.per_T]
    uncs = [unc for _, _, unc in report.per_T]
    t0 = time.perf_counter()
    (exponent, _, r2), dropped = fit_rate(points, uncs)
    record.wall_times["rate-fit"] = time.perf_counter() - t0
    record.dropped_points = dropped
    if config.kind == "rapid-rate":
        report.rate_rapid = exponent
    else:
        report.rate_slow = exponent
    record.checks["rate_r2"] = r2
    return report


def _run_sign_reversal(config: ExperimentConfig, record: RunRecord, jobs):
    report = _run_sweep(config, record, jobs)
    (t_small, est_small, unc_small) = report.per_T[0]
    (t_large, est_large, unc_large) = report.per_T[-1]
    record.signs = {
        "d0": math.copysign(1.0, report.d0),
        "d_star": math.copysign(1.0, report.d_star),
        "cbar_small_T": math.copysign(1.0, est_small),
        "cbar_large_T": math.copysign(1.0, est_large),
        "small_T_significant": abs(est_small) > 3.0 * unc_small,
        "large_T_significant": abs(est_large) > 3.0 * unc_large,
    }
    record.checks["sign_reversal"] = (
        record.signs["d0"] == record.signs["cbar_small_T"]
        and record.signs["d_star"] == record.signs["cbar_large_T"]
        and record.signs["d0"] != record.signs["d_star"]
        and record.signs["small_T_significant"]
        and record.signs["large_T_significant"])
    return report


def _residual_grids(rng, t_span, x_span, nt=40, nx=160):
    """Uniform grids with a deterministic sub-cell jitter."""
    t = np.linspace(*t_span, nt)
    x = np.linspace(*x_span, nx)
    t[1:-1] += rng.uniform(-0.4, 0.4, nt - 2) * (t[1] - t[0])
    x[1:-1] += rng.uniform(-0.4, 0.4, nx - 2) * (x[1] - x[0])
    return t, x


def verify_rapid_lemmas(nl, rng, eps1=None, horizon=20.0,
                        evolve_opts=EvolveOptions(half_width=40.0,
                                                  record_states=True,
                                                  record_interval=0.5)):
    """Residual and sandwich checks of the rapid-regime construction."""
    margins = stability_margins(nl)
    c0, phi0 = homogenized_speed(nl)
    if eps1 is None:
        eps1 = margins.delta1 / 4.0
    agg = rapid_aggregates(nl, phi0, margins, eps1)
    T1 = eps1 * margins.gamma1 / agg.K0
    sched = rapid_schedule(eps1, 0.25 * T1, margins, agg)
    T = sched.T

    span = agg.C1 + abs(c0) * 20.0 + 10.0
    t_grid, x_grid = _residual_grids(rng, (0.0, 20.0), (-span, span))
    out = {"T1": T1, "T": T, "eps1": eps1}
    for side in ("+", "-"):
        cand = lambda t, x, s=side: rapid_supersub_eval(sched, phi0, nl.F,
                                                        t, x, s)
        out[f"residual_min_{side}"] = residual_check(
            cand, nl, T, t_grid, x_grid, side)[0]

    trace = run_cauchy(nl, T, phi0, horizon, evolve_opts)
    holds, worst = sandwich_check(
        trace,
        lambda t, x: rapid_supersub_eval(sched, phi0, nl.F, t, x, "+"),
        lambda t, x: rapid_supersub_eval(sched, phi0, nl.F, t, x, "-"))
    out["sandwich_holds"] = holds
    out["sandwich_worst"] = worst
    return out, trace


def verify_slow_lemmas(nl, rng, eps2=None, horizon_periods=2.0):
    """Residual and sandwich checks of the slow-regime construction."""
    margins = stability_margins(nl)
    if eps2 is None:
        eps2 = margins.delta1 / 4.0
    family = cubic_profile_family(nl)
    agg = slow_aggregates(nl, margins, eps2)
    curve = frozen_speed_curve(nl, 64)
    T2 = agg.C2 / (eps2 * margins.gamma1)
    T = 4.0 * T2
    sched = slow_schedule(eps2, T, margins, agg, curve, nl.period)

    sup_c = float(np.max(np.abs(curve.speeds)))
    span = agg.C1 + sup_c * 2.0 * T + 10.0
    t_grid, x_grid = _residual_grids(rng, (0.0, 2.0 * T), (-span, span))
    out = {"T2": T2, "T": T, "eps2": eps2, "zone_ok": agg.zone_ok}
    for side in ("+", "-"):
        cand = lambda t, x, s=side: slow_supersub_eval(sched, family, t, x, s)
        out[f"residual_min_{side}"] = residual_check(
            cand, nl, T, t_grid, x_grid, side)[0]

    horizon = horizon_periods * T
    opts = EvolveOptions(record_states=True, record_interval=0.02 * horizon)
    trace = run_cauchy(nl, T, family(0.0), horizon, opts)
    holds, worst = sandwich_check(
        trace,
        lambda t, x: slow_supersub_eval(sched, family, t, x, "+"),
        lambda t, x: slow_supersub_eval(sched, family, t, x, "-"))
    out["sandwich_holds"] = holds
    out["sandwich_worst"] = worst
    return out, trace


def _run_lemma_check(config: ExperimentConfig, record: RunRecord):
    rng = np.random.default_rng(config.seed)
    eps1 = config.overrides.get("eps1")
    eps2 = config.overrides.get("eps2")
    t0 = time.perf_counter()
    rapid, _ = verify_rapid_lemmas(config.nl, rng, eps1)
    record.wall_times["rapid-lemmas"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    slow, _ = verify_slow_lemmas(config.nl, rng, eps2)
    record.wall_times["slow-lemmas"] = time.perf_counter() - t0
    record.checks["rapid"] = rapid
    record.checks["slow"] = slow
    record.checks["all_hold"] = (
        rapid["sandwich_holds"] and slow["sandwich_holds"]
        and min(rapid["residual_min_+"], rapid["residual_min_-"],
                slow["residual_min_+"], slow["residual_min_-"]) >= -1e-8)


def _run_frozen_curve(config: ExperimentConfig, record: RunRecord):
    t0 = time.perf_counter()
    curve = frozen_speed_curve(config.nl,
                               int(config.overrides.get("resolution", 256)))
    record.wall_times["curve"] = time.perf_counter() - t0
    record.curve_table = list(zip(curve.s_grid, curve.speeds))
    record.report = SpeedReport(c0=homogenized_speed(config.nl)[0],
                                c_star=slow_limit_speed(curve))
    record.checks["lipschitz"] = curve.lipschitz_estimate


def run_experiment(config: ExperimentConfig, jobs=None) -> RunRecord:
    """Execute the configured experiment; failures are recorded per stage."""
    jobs = resolve_jobs(jobs)
    record = RunRecord(config=config)
    t0 = time.perf_counter()
    try:
        if config.kind == "sweep":
            _run_sweep(config, record, jobs)
        elif config.kind in ("rapid-rate", "slow-rate"):
            _run_rate(config, record, jobs)
        elif config.kind == "sign-reversal":
            _run_sign_reversal(config, record, jobs)
        elif config.kind == "lemma-check":
            _run_lemma_check(config, record)
        elif config.kind == "frozen-curve":
            _run_frozen_curve(config, record)
    except WavespeedError as exc:
        record.failures.append(f"{type(exc).__name__}: {exc}")
    record.wall_times["total"] = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _csv_block(header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join("" if v is None else
                              (f"{v:.12g}" if isinstance(v, float) else str(v))
                              for v in row))
    return "\n".join(lines) + "\n"


def _plot_speeds(record: RunRecord, path):
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "wavespeed-lab"
    rep = record.report
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ts = [T for T, _, _ in rep.per_T]
    cs = [c for _, c, _ in rep.per_T]
    us = [u for _, _, u in rep.per_T]
    ax.errorbar(ts, cs, yerr=us, fmt="o-", label="PDE estimate")
    ax.axhline(rep.c0, color="tab:green", ls="--", label="rapid limit")
    ax.axhline(rep.c_star, color="tab:red", ls=":", label="slow limit")
    ax.set_xscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("average speed")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _plot_rate(record: RunRecord, path):
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "wavespeed-lab"
    rep = record.report
    rapid = record.config.kind == "rapid-rate"
    limit = rep.c0 if rapid else rep.c_star
    xs = np.array([T if rapid else 1.0 / T for T, _, _ in rep.per_T])
    ys = np.array([abs(c - limit) for _, c, _ in rep.per_T])
    rate = rep.rate_rapid if rapid else rep.rate_slow
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.loglog(xs, ys, "o", label="deviation")
    if rate is not None and np.all(ys > 0):
        ref = ys[-1] * (xs / xs[-1]) ** rate
        ax.loglog(xs, ref, "--", label=f"slope {rate:.2f}")
    ax.set_xlabel("T" if rapid else "1/T")
    ax.set_ylabel("|speed - limit|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def emit_outputs(record: RunRecord, out_dir=None, plots=True):
    """Write CSV/SVG/manifest files; returns the file inventory."""
    out_dir = out_dir or record.config.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write-probe")
        with open(probe, "w", encoding="utf-8") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise OSError(f"output directory {out_dir!r} is not writable") from exc

    files = {}
    rep = record.report
    if rep is not None and rep.per_T:
        files["speeds.csv"] = _write_text(
            os.path.join(out_dir, "speeds.csv"),
            _csv_block("T,cbar,uncertainty",
                       [(float(T), float(c), float(u))
                        for T, c, u in rep.per_T]))
    if rep is not None:
        files["limits.csv"] = _write_text(
            os.path.join(out_dir, "limits.csv"),
            _csv_block("c0,cstar,d0,dstar,kpp,rate_rapid,rate_slow",
                       [(rep.c0, rep.c_star, rep.d0, rep.d_star, rep.kpp,
                         rep.rate_rapid, rep.rate_slow)]))
    if record.curve_table:
        files["curve.csv"] = _write_text(
            os.path.join(out_dir, "curve.csv"),
            _csv_block("s,speed", [(float(s), float(c))
                                   for s, c in record.curve_table]))
    for T, trace in record.traces:
        name = f"front_trace_T{T:g}.csv"
        trace.to_csv(os.path.join(out_dir, name))
        with open(os.path.join(out_dir, name), "rb") as fh:
            files[name] = hashlib.sha256(fh.read()).hexdigest()

    if plots and rep is not None and rep.per_T:
        path = os.path.join(out_dir, "speeds.svg")
        _plot_speeds(record, path)
        with open(path, "rb") as fh:
            files["speeds.svg"] = hashlib.sha256(fh.read()).hexdigest()
        if record.config.kind in ("rapid-rate", "slow-rate"):
            path = os.path.join(out_dir, "rate.svg")
            _plot_rate(record, path)
            with open(path, "rb") as fh:
                files["rate.svg"] = hashlib.sha256(fh.read()).hexdigest()

    manifest = {
        "config_digest": record.config.digest,
        "label": record.config.label,
        "kind": record.config.kind,
        "version": record.version,
        "wall_times": {k: round(v, 3) for k, v in record.wall_times.items()},
        "checks": _jsonable(record.checks),
        "signs": _jsonable(record.signs),
        "dropped_points": record.dropped_points,
        "failures": record.failures,
        "files": dict(sorted(files.items())),
    }
    if rep is not None:
        manifest["report"] = _jsonable({
            "c0": rep.c0, "c_star": rep.c_star, "d0": rep.d0,
            "d_star": rep.d_star, "kpp": rep.kpp,
            "rate_rapid": rep.rate_rapid, "rate_slow": rep.rate_slow,
            "per_T": [list(map(float, row)) for row in rep.per_T]})
    name = "manifest.json"
    files[name] = _write_text(os.path.join(out_dir, name),
                              json.dumps(manifest, indent=2, sort_keys=True)
                              + "\n")
    record.files = files
    return files


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
