"""Exception types raised by the solver library."""


class TfbmError(Exception):
    """Base class for all library errors."""


class DomainError(TfbmError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(TfbmError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SolverDivergenceError(TfbmError, RuntimeError):
    """The linear solver did not converge.

    For the symmetric positive definite step systems this signals an
    assembly bug rather than a hard problem.
    """


class MassError(TfbmError, ValueError):
    """A field cannot be turned into a probability distribution."""


class ConfigError(TfbmError, ValueError):
    """An experiment configuration failed validation."""
