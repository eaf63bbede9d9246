"""Exception hierarchy shared by the whole package.

Every error carries the process exit code the command-line tools map it
to: 1 for configuration problems, 2 for unreadable or inconsistent input
data, 3 for numerical failures detected mid-computation.
"""


class RomkitError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(RomkitError):
    """Invalid request: bad dimensions, out-of-range options, missing files."""

    exit_code = 1


class SampleBudgetError(ConfigurationError):
    """Not enough impulse samples for the requested Hankel dimensions."""


class SizeGuardError(ConfigurationError):
    """Problem size exceeds a documented dense-solver guard."""


class MemoryGuardError(ConfigurationError):
    """Requested allocation exceeds the configured memory cap."""


class DataError(RomkitError):
    """Input data unreadable or semantically inconsistent."""

    exit_code = 2


class ParseError(DataError):
    """Malformed binary or text matrix file.

    Parameters
    ----------
    message : str
    offset : int, optional
        Byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = "%s (byte offset %d)" % (message, offset)
        super().__init__(message)
        self.offset = offset


class DegenerateBlockError(DataError):
    """A variable block is identically zero and cannot be scaled."""


class NumericalError(RomkitError):
    """A computation failed or produced results outside tolerance."""

    exit_code = 3


class StabilityError(NumericalError):
    """An operation required an asymptotically stable system and got none."""


class RankError(NumericalError):
    """Requested order exceeds the numerical rank of the data.

    Carries the numerical rank so callers can retry with a feasible order.
    """

    def __init__(self, message, numerical_rank=None):
        super().__init__(message)
        self.numerical_rank = numerical_rank


class DivergenceError(NumericalError):
    """A time integration blew up; ``step_index`` records where."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class ConditioningError(NumericalError):
    """A linear solve was too ill-conditioned to trust."""
