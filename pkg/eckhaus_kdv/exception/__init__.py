import os
import sys


def error_message_detail(error, error_detail: sys):
    _, _, exc_tb = error_detail.exc_info()
    if exc_tb is None:
        file_name, line_number = "<unknown>", "<unknown>"
    else:
        while exc_tb.tb_next is not None:
            exc_tb = exc_tb.tb_next
        file_name = os.path.basename(exc_tb.tb_frame.f_code.co_filename)
        line_number = exc_tb.tb_lineno
    error_message = "Error occurred python script name [{0}] line number [{1}] error message [{2}]".format(
        file_name, line_number, str(error)
    )

    return error_message


class EckhausKdVException(Exception):
    """Base error of the package.

    Wrapping another ``EckhausKdVException`` keeps its exit code, so the
    category survives the ``raise EckhausKdVException(e, sys) from e`` chain
    used throughout the components.
    """

    exit_code: int = 3

    def __init__(self, error_message, error_detail=sys):
        super().__init__(error_message)
        if isinstance(error_message, EckhausKdVException):
            self.exit_code = error_message.exit_code
            self.category = error_message.category
            self.time = getattr(error_message, "time", None)
            self.error_message = error_message.error_message
            return
        self.category = type(self).__name__
        self.time = None
        self.error_message = error_message_detail(
            error_message, error_detail=error_detail
        )

    def __str__(self):
        return self.error_message


class ConfigValidationError(EckhausKdVException):
    exit_code = 2


class ParameterDomainError(EckhausKdVException):
    exit_code = 2


class DegenerateCaseError(EckhausKdVException):
    exit_code = 2


class RegionRejectedError(EckhausKdVException):
    exit_code = 2


class MissingCoefficientTableError(EckhausKdVException):
    exit_code = 2


class GridMismatchError(EckhausKdVException):
    exit_code = 3


class ZeroModePolicyError(EckhausKdVException):
    exit_code = 3


class NumericalInstabilityError(EckhausKdVException):
    """NaN/Inf, blow-up guard, overflow or an unusable step size.

    ``time`` is the simulation time at which the problem was detected, when
    there is one.
    """

    exit_code = 3

    def __init__(self, error_message, error_detail=sys, time: float = None):
        super().__init__(error_message, error_detail)
        if time is not None:
            self.time = time
