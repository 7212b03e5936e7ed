"""Exception hierarchy. The CLI maps each family to its own exit code."""


class ValidationError(ValueError):
    """Bad argument or malformed input."""


class RangeError(ValidationError):
    """Index outside the range allowed by the measurement family."""


class SizeError(ValidationError):
    """Requested size exceeds a documented cap."""


class SchemaError(ValidationError):
    """Unknown variable, mismatched alphabets, or a malformed document."""


class PreconditionError(ValueError):
    """Input object lacks a structural property the operation requires."""


class UnreachableTargetError(PreconditionError):
    pass


class ConvergenceError(RuntimeError):
    pass


class ConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


class SampleSizeError(ValueError):
    """Too few qualifying samples for an empirical estimate."""

    def __init__(self, message, count=None, deficient=None):
        super().__init__(message)
        self.count = count
        self.deficient = list(deficient or [])
