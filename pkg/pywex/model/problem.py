from enum import Enum
from typing import Optional


class ProblemSeverity(Enum):
    """
    The importance and relevance of a problem.
    Ordered from least to most severe: Notice, Warning, Error.
    """
    NOTICE = "notice"
    "A message to the user that doesn't pinpoint any issue in the configuration, but might require their attention."

    WARNING = "warning"
    "An issue that might make results questionable (e.g. a very noisy ensemble), but doesn't prevent running."

    ERROR = "error"
    "A critical issue that prevents the run from starting."


class ProblemCode(Enum):
    """
    A code associated with a particular type of problem.

    Exceptions raised by the numerical routes carry one of these codes, so the command line
    can turn any failure into a Problem and report it the same way as configuration errors.
    """

    INVALID_KERNEL = "invalid_kernel"
    "A rate kernel gives a probability outside [0, 1], or more than 1 in total for some state."

    UNDERFLOW = "underflow"
    "A jump would take more wealth from an agent than it has."

    INVALID_STATE = "invalid_state"
    "A wealth vector is negative, off the lattice, or doesn't conserve the total wealth."

    STATE_SPACE_TOO_LARGE = "state_space_too_large"
    "The enumerated state space would exceed the size guard."

    CFL_VIOLATION = "cfl_violation"
    "The time step of an explicit solver is too large for its spacing and diffusion."

    OFF_GRID = "off_grid"
    "A point can't be placed on a grid (ambiguous node, wrong domain, incompatible grids)."

    UNSUPPORTED_DIMENSION = "unsupported_dimension"
    "The operation only exists for two or three agents."

    DEGENERATE_TIME = "degenerate_time"
    "A kernel was asked for its value at its own initial time."

    NONVIABLE_FORM = "nonviable_form"
    "A formula, taken as printed, isn't a probability density."

    OUT_OF_DOMAIN = "out_of_domain"
    "An argument lies outside the range the operation is defined on."

    TIME_MISMATCH = "time_mismatch"
    "A comparison time doesn't land on the step grid of a chain."

    EMPTY_ENSEMBLE = "empty_ensemble"
    "An ensemble has no trajectories, or lacks the requested snapshot."

    INVALID_VALUE = "invalid_value"
    "A configuration value has the wrong type or range."

    MISSING_VALUE = "missing_value"
    "A required configuration value is missing."

    TOLERANCE_FAILED = "tolerance_failed"
    "Two routes disagree by more than the allowed tolerance."

    OTHER = "other"
    "A generic error code, used when no other code fits the problem."


class Problem:
    """
    Represents a problem found while validating or running a configuration.
    Consists of a message, a severity, an error code, and an optional field path: where the problem occurred
    in the configuration, like ``model.x0[1]``.
    """

    __slots__ = ("message", "severity", "path", "code")

    def __init__(self, message: str,
                 severity: ProblemSeverity,
                 path: Optional[str] = None,
                 code: ProblemCode = ProblemCode.OTHER):
        self.message = message
        "The message of the problem."
        self.severity = severity
        "The severity of the problem."
        self.path = path
        "The configuration field the problem is about, can be None for problems found during a run."
        self.code = code
        "The code associated with the problem."

    def __repr__(self):
        return f"Problem({self.message!r}, {self.severity!r}, {self.path!r}, {self.code!r})"

    def __str__(self):
        where = f" ({self.path})" if self.path is not None else ""
        return f"{self.severity.value.capitalize()}{where}: {self.message}"


class ProblemSet:
    """
    Basically a list of problems, which can grow while a configuration gets validated.

    The configuration loader passes the same set to every validation step, and only looks at
    ``has_errors`` once all of them ran.

    Contains lists of problems for each severity (``ProblemSeverity``) in the ``grouped`` attribute.

    Can be used as if it was a list of problems: ::

        ps = ProblemSet()
        validate_model(config, ps)
        for problem in ps:
            print(problem)
    """

    __slots__ = ("problems", "grouped")

    def __init__(self):
        self.problems: list[Problem] = []
        "The list of problems. (Don't append to it directly, use the append function!)"

        self.grouped = {e: [] for e in ProblemSeverity}
        "All problems grouped by their severity. (Don't edit it directly, use the append function!)"

    def append(self,
               problem: Problem | str,
               severity: ProblemSeverity = ProblemSeverity.ERROR,
               path: Optional[str] = None,
               code: ProblemCode = ProblemCode.OTHER):
        """
        Adds a problem to the list.

        This function can be called in two ways:

        - append(Problem(...)): adds the problem directly.
        - append("message", severity, path, code): builds the problem (severity is ERROR by default).
        """
        if isinstance(problem, str):
            problem = Problem(problem, severity, path, code)

        self.problems.append(problem)
        self.grouped[problem.severity].append(problem)

    @property
    def has_errors(self) -> bool:
        return len(self.grouped[ProblemSeverity.ERROR]) > 0

    def __iter__(self):
        return iter(self.problems)

    def __len__(self):
        return len(self.problems)

    def __contains__(self, item):
        return item in self.problems

    def __str__(self):
        return "\n".join([str(x) for x in self.problems])

    def __repr__(self):
        return repr(self.problems)
