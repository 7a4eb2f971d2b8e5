"""Exception hierarchy shared by every module of the toolkit."""


class BlockRipError(Exception):
    """Base class; ``exit_code`` is used by the command-line front end."""

    exit_code = 1


class ParameterDomainError(BlockRipError, ValueError):
    exit_code = 2


class ValidationError(BlockRipError, ValueError):
    exit_code = 2


class CapacityError(BlockRipError):
    """Raised when an exact enumeration would exceed its configured guard."""

    exit_code = 3


class ConvergenceError(BlockRipError):
    """Iterative routine hit its iteration cap.

    ``best`` carries the last iterate (value, vector) so callers may decide to
    use it anyway.
    """

    exit_code = 4

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DivergenceError(ConvergenceError):
    """Solver residual increased for too many consecutive iterations."""

    def __init__(self, message, history=None):
        super().__init__(message, best=None)
        self.history = history


class FitDomainError(BlockRipError, ValueError):
    exit_code = 2
