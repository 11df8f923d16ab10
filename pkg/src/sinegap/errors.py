"""Exception types shared across the package.

Each maps to one CLI exit code: usage 2, accuracy 3, domain 4.
"""


class SineGapError(Exception):
    exit_code = 1


class UsageError(SineGapError, ValueError):
    """Bad argument: unknown name, out-of-range parameter, malformed request."""

    exit_code = 2


class AccuracyError(SineGapError, ArithmeticError):
    """A refinement loop did not reach its tolerance.

    ``previous`` and ``last`` hold the final two iterates so callers can
    inspect how far apart they were.
    """

    exit_code = 3

    def __init__(self, message, previous=None, last=None):
        super().__init__(message)
        self.previous = previous
        self.last = last


class DomainError(SineGapError, ValueError):
    """Input outside the mathematical domain (vanishing symbol, singular operator)."""

    exit_code = 4
