"""Exception hierarchy shared by the frackpp modules."""


class FrackppError(Exception):
    """Base class for all errors raised by frackpp."""


class DomainError(FrackppError, ValueError):
    """An argument lies outside the domain of the operation (t <= 0, dt < 0, ...)."""


class KernelStateError(FrackppError, RuntimeError):
    """A kernel was used in a state that does not support the request."""


class UnsupportedError(FrackppError, NotImplementedError):
    """The requested combination of parameters is not supported."""


class TabulationError(FrackppError, RuntimeError):
    """Numerical inversion of the stable characteristic function failed."""


class GridError(FrackppError, ValueError):
    """Grid mismatch or an invalid grid specification."""


class ConfigError(FrackppError, ValueError):
    """Invalid or inconsistent simulation configuration."""


class FitError(FrackppError, ValueError):
    """A rate fit cannot be performed on the supplied samples."""


class EvaluationError(FrackppError, ArithmeticError):
    """Non-finite values were produced while applying an operator."""
