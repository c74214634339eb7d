"""Numerical laboratory for average wave speeds under oscillating forcing.

Computes traveling-wave speeds of u_t = u_xx + f(t/T, u) for bistable
reactions with time-periodic (or quasi-periodic) coefficients, compares the
PDE estimates against the rapid- and slow-oscillation limits, and verifies
the explicit super/sub-solution constructions behind both limits.
"""

from .errors import (BracketError, ConfigurationError, DomainError,
                     FrontShapeError, InstabilityError, InsufficientDataError,
                     NoHeteroclinicError, NumericError, PrecisionError,
                     RegimeError, TrackingError, ValidationError,
                     WavespeedError)
from .evolve import (EvolveOptions, FrontTrace, Grid1D, State, average_speed,
                     level_position, run_cauchy, step_imex)
from .frontwave import (SolveOptions, WaveProfile, cubic_closed_form,
                        decay_rates, solve_frozen_wave, speed_bracket,
                        speed_sign_classifier)
from .limits import (FrozenSpeedCurve, SpeedReport, cubic_d0, cubic_dstar,
                     fit_rate, frozen_speed_curve, homogenized_speed,
                     kpp_spreading_speed, slow_limit_speed)
from .reaction import (CubicNonlinearity, GeneralNonlinearity,
                       StabilityMargins, TemporalCoefficient,
                       coefficient_product_mean, stability_margins)
from .supersub import (RapidSchedule, SlowSchedule, cubic_profile_family,
                       rapid_aggregates, rapid_schedule, rapid_supersub_eval,
                       residual_check, sandwich_check, slow_aggregates,
                       slow_schedule, slow_supersub_eval)

__version__ = "0.1.0"
