"""Exception types shared across the toolkit."""


class QoctlError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(QoctlError, ValueError):
    """Operands have incompatible shapes."""


class ValidationError(QoctlError, ValueError):
    """An input violates a structural or physical invariant."""


class DegenerateInputError(ValidationError):
    """An input is structurally fine but degenerate, e.g. zero norm."""


class ApplicabilityError(QoctlError):
    """A method's mathematical precondition does not hold for this input."""


class CapabilityError(QoctlError):
    """The requested problem/algorithm combination is unsupported."""


class CacheMissError(QoctlError, KeyError):
    """A frozen propagator cache was queried for a value it was not built with."""


class IntegrationFailureError(QoctlError):
    """The ODE integrator failed before reaching the requested time."""


class MonotonicityError(QoctlError):
    """A monotone-convergence contract was violated during iteration."""


class NonFiniteObjectiveError(QoctlError):
    """An objective function returned NaN or infinity."""


class ProblemFileError(QoctlError, ValueError):
    """Problem-file parsing or schema validation failed.

    ``key`` names the offending entry, dotted from the file root.
    """

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)
