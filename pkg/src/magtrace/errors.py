"""Exception hierarchy shared by all magtrace modules."""


class MagtraceError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MagtraceError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(MagtraceError, ValueError):
    """A discretization or truncation parameter violates its precondition."""


class GapConditionError(DomainError):
    """The energy is not in a spectral gap between deformed Landau bands."""


class NumericError(MagtraceError, ArithmeticError):
    """Numerical non-convergence. ``diagnostics`` holds whatever was measured."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConvergenceError(NumericError):
    """A series or iterative solver hit its cap before meeting tolerance."""


class CutoffError(NumericError):
    """The spectral cutoff is too low for the requested trace tolerance."""


class ConfigError(MagtraceError):
    """One or more configuration problems; ``errors`` lists all of them."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
