class WrongWayError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(WrongWayError, ValueError):
    pass


class ParseError(ValidationError):
    pass


class SolverError(WrongWayError, RuntimeError):
    """Raised when an LP solve ends without an optimal basis."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
