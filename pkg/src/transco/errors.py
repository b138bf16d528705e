"""Exception hierarchy shared by the solvers, generators and CLI."""


class TranscoError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(TranscoError, ValueError):
    pass


class DimensionError(TranscoError, ValueError):
    pass


class ConfigError(InvalidParameterError):
    pass


class SingularDesignError(TranscoError, ArithmeticError):
    """Design matrix is rank deficient; ``rank`` holds the numerical rank."""

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class EnsembleDegeneracyError(TranscoError, ArithmeticError):
    pass


class TransferDegeneracyError(TranscoError, ArithmeticError):
    pass


class NumericalFailureError(TranscoError, ArithmeticError):
    pass


class UndefinedMetricError(TranscoError, ValueError):
    pass
