"""Exception hierarchy.

Input errors map to CLI exit code 2, infeasible constraints to 3 and
numerical failures to 4.
"""


class NetoedError(Exception):
    exit_code = 4


class InputError(NetoedError, ValueError):
    exit_code = 2


class NumericalError(NetoedError, ArithmeticError):
    exit_code = 4


class EmptySetError(InputError):
    pass


class InvalidRegionError(InputError):
    pass


class UnsupportedSampleError(InputError):
    pass


class OutOfModelError(InputError):
    pass


class OutOfDomainError(InputError):
    pass


class DegenerateGridError(InputError):
    pass


class DimensionError(InputError):
    pass


class UndefinedCorrelationError(NumericalError):
    pass


class SeparableDataError(NumericalError):
    """Raised when logistic fitting diverges; ``coefficients`` holds the clamped fit."""

    def __init__(self, message, coefficients=None):
        super().__init__(message)
        self.coefficients = coefficients


class SingularCovarianceError(NumericalError):
    pass


class ZeroPosteriorMassError(NumericalError):
    pass


class AbsoluteContinuityError(NumericalError):
    pass


class InfeasibleRegionError(NetoedError):
    exit_code = 3
