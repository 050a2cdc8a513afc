from typing import Optional, TYPE_CHECKING

from pywex.model.problem import ProblemCode, Problem, ProblemSeverity

if TYPE_CHECKING:
    from pywex.model.problem import ProblemSet

# =============================================================================
# errors.py: Exceptions raised by the model and the numerical routes
# =============================================================================
# Every exception knows its ProblemCode, so the command line can report a failing run
# with the same format as configuration problems (see Problem.__str__).


class PywexError(Exception):
    """
    Base class of all errors raised by pywex.
    """
    code = ProblemCode.OTHER

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.message = message
        "What went wrong."
        self.path = path
        "The configuration field that caused the error, when known."

    def to_problem(self) -> Problem:
        return Problem(self.message, ProblemSeverity.ERROR, self.path, self.code)


class InvalidKernelError(PywexError):
    code = ProblemCode.INVALID_KERNEL


class UnderflowError(PywexError):
    code = ProblemCode.UNDERFLOW


class StateError(PywexError):
    code = ProblemCode.INVALID_STATE


class StateSpaceTooLargeError(PywexError):
    code = ProblemCode.STATE_SPACE_TOO_LARGE


class CflError(PywexError):
    code = ProblemCode.CFL_VIOLATION


class GridError(PywexError):
    code = ProblemCode.OFF_GRID


class UnsupportedDimensionError(PywexError):
    code = ProblemCode.UNSUPPORTED_DIMENSION


class DegenerateTimeError(PywexError):
    code = ProblemCode.DEGENERATE_TIME


class NonviableFormError(PywexError):
    code = ProblemCode.NONVIABLE_FORM


class DomainError(PywexError):
    code = ProblemCode.OUT_OF_DOMAIN


class TimeMatchError(PywexError):
    code = ProblemCode.TIME_MISMATCH


class EmptyEnsembleError(PywexError):
    code = ProblemCode.EMPTY_ENSEMBLE


class ConfigError(PywexError):
    """
    Raised when a configuration has at least one ERROR problem. The whole set is attached.
    """
    code = ProblemCode.INVALID_VALUE

    def __init__(self, problems: "ProblemSet"):
        super().__init__(f"{len(problems)} problème(s) dans la configuration")
        self.problems = problems
        "All problems found during validation."
