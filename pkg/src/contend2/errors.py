"""
Exception hierarchy shared by the library and the CLI

ValidationError subclasses map to exit status 1, NumericalError subclasses to 2
"""

from typing import Any


class Contend2Error(Exception):
    """Base class for every error raised by contend2"""

    exit_code: int = 1


class ValidationError(Contend2Error, ValueError):
    """Input rejected before any numerical work"""

    exit_code = 1


class InvalidPolicy(ValidationError):
    """Transmit-probability vector violates the recurrent policy rules"""


class InvalidMasses(ValidationError):
    """Idle-mass vector is wrongly anchored, out of range or not decreasing"""


class NonMonotone(InvalidMasses):
    """Parametric family member whose masses fail strict decrease"""


class NoSignChange(ValidationError):
    """Polynomial does not change sign over the requested bracket"""


class NumericalError(Contend2Error, ArithmeticError):
    """Numerical failure after validation succeeded"""

    exit_code = 2

    def __init__(self, message: str, result: Any = None) -> None:
        super().__init__(message)
        # best partial result, kept so callers can still report it
        self.result = result


class DegenerateDenominator(NumericalError):
    """Renewal denominator 1 - sum((m[k-1]-m[k])^2) vanished: infinite expected cost"""


class NonAbsorbing(NumericalError):
    """Both devices can never leave the contention states (certain collision forever)"""


class NotConverged(NumericalError):
    """Optimizer exhausted its iteration budget without meeting the tolerance"""


class HorizonExhausted(NumericalError):
    """At least one Monte Carlo trial left a device unfinished at the horizon"""


class UnreachableState(Contend2Error, RuntimeError):
    """A recurrent policy clock ran past its terminal certain-transmit slot"""

    exit_code = 2
