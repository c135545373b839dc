"""Exception types raised by calweight.

Every error carries a short machine-readable ``code``. Errors raised from a
specific estimator also record the ``origin`` (the function that detected the
problem), and :attr:`SurveyError.tag` renders both as ``code[origin]`` for the
command line.
"""

from __future__ import annotations


class SurveyError(Exception):
    """Base class for all calweight errors."""

    code = "survey-error"

    def __init__(self, message: str, *, origin: str | None = None) -> None:
        super().__init__(message)
        self.origin = origin

    @property
    def tag(self) -> str:
        if self.origin:
            return f"{self.code}[{self.origin}]"
        return self.code


class PreconditionError(SurveyError, ValueError):
    code = "precondition"


class InvalidSampleError(SurveyError, ValueError):
    code = "invalid-sample"


class DegenerateDesignError(SurveyError, ValueError):
    code = "degenerate-design"


class IncompleteDesignError(SurveyError, ValueError):
    code = "incomplete-design"


class EnumerationTooLargeError(SurveyError, OverflowError):
    code = "enumeration-too-large"


class SingularCalibrationError(SurveyError, ArithmeticError):
    code = "singular-calibration"


class SingularSubstitutionError(SurveyError, ArithmeticError):
    code = "singular-substitution"


class ZeroAuxiliaryError(SurveyError, ZeroDivisionError):
    code = "division-by-zero"


class InvalidDistanceError(SurveyError, ValueError):
    code = "invalid-distance"


class WrongResidualError(SurveyError, TypeError):
    code = "wrong-residual"


class SingularPairCalibrationError(SurveyError, ArithmeticError):
    code = "singular-pair-calibration"


class PairDegeneracyError(SurveyError, ArithmeticError):
    code = "pair-degeneracy"


class SingularMomentError(SurveyError, ArithmeticError):
    code = "singular-moment"


class InsufficientStratumError(SurveyError, ValueError):
    code = "insufficient-stratum"


class DomainError(SurveyError, ValueError):
    code = "domain"


class ConfigError(SurveyError, ValueError):
    code = "config"


class ParseError(SurveyError, ValueError):
    """Malformed delimited input. ``line`` and ``column`` are 1-based."""

    code = "parse"

    def __init__(self, message: str, *, line: int, column: int | None = None,
                 path: str | None = None) -> None:
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        if path:
            where = f"{path}: {where}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column
        self.path = path


def check_denominator(value: float, scale: float, origin: str,
                      error: type[SurveyError] = SingularCalibrationError,
                      what: str = "denominator") -> None:
    """Raise ``error`` when ``value`` is zero relative to ``scale``.

    ``scale`` is the sum of absolute values of the additive terms that make up
    ``value``; a denominator counts as zero when ``|value| < 1e-12 * scale``.
    """
    if not (scale > 0.0) or abs(value) < 1e-12 * scale:
        raise error(f"{what} is numerically zero ({value!r} at scale {scale!r})",
                    origin=origin)
