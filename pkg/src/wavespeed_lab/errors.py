"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration/validation problems -> 1,
numerical failures -> 2, I/O trouble -> 3.
"""


class WavespeedError(Exception):
    """Base class for all package errors."""


class DomainError(WavespeedError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ConfigurationError(WavespeedError, ValueError):
    """Invalid or inconsistent configuration."""


class ValidationError(WavespeedError, ValueError):
    """A checked precondition failed on sampled data (e.g. bistability scan)."""


class NumericError(WavespeedError, RuntimeError):
    """Quadrature / root finding / finite differences failed to converge."""


class RegimeError(WavespeedError, ValueError):
    """A schedule was requested outside its validity regime (T vs T1/T2)."""


class BracketError(NumericError):
    """No valid speed bracket could be constructed."""


class NoHeteroclinicError(NumericError):
    """Shooting found no sign change: no single connecting wave exists."""


class PrecisionError(NumericError):
    """Classification became ambiguous at the tolerance floor."""


class InstabilityError(NumericError):
    """Time stepping left the maximum-principle corridor."""


class TrackingError(NumericError):
    """The front left the computational domain between re-centerings."""


class FrontShapeError(NumericError):
    """Level-set crossing count is not exactly one."""


class InsufficientDataError(WavespeedError, ValueError):
    """Not enough samples/points for the requested fit."""
