"""Exception classes raised by hillgate.

Each class carries a distinct CLI exit code so that scripted runs can tell
failure modes apart.
"""


class HillgateError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class UsageError(HillgateError, ValueError):
    """Invalid arguments (dimension mismatch, point off the surface, ...)."""

    exit_code = 2


class ConfigError(UsageError):
    exit_code = 2


class UnsupportedOperationError(HillgateError):
    """Operation not defined for this kind of field or geometry."""

    exit_code = 3


class GeometryError(HillgateError):
    """Degenerate boundary, failed bisection or diverging projection."""

    exit_code = 4


class NumericalBlowupError(HillgateError):
    """The integrator produced a non-finite state."""

    exit_code = 5

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SimulationTimeout(HillgateError):
    """``max_steps`` exceeded before the requested event."""

    exit_code = 6

    def __init__(self, message, elapsed=0.0, steps=0):
        super().__init__(message)
        self.elapsed = elapsed
        self.steps = steps


class InsufficientDataError(HillgateError):
    exit_code = 7


class InfiniteEstimateError(HillgateError):
    """No excursion reached B; the Hill ratio is infinite."""

    exit_code = 8


class InvalidInputError(HillgateError, ValueError):
    exit_code = 9


class DegenerateAMSError(HillgateError):
    """All replicas share the same level; the splitting cannot proceed."""

    exit_code = 10

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level
