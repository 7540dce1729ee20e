"""Exception types shared across the package."""


class SuperformError(Exception):
    """Base class for all package errors."""


class DomainError(SuperformError, ValueError):
    """An argument lies outside the set where an operation is defined."""


class CapabilityError(SuperformError, TypeError):
    """An operation needs a capability (e.g. differentiability) the operand lacks."""


class ParseError(SuperformError, ValueError):
    """Malformed literal. ``position`` is the 0-based column of the offending token."""

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        if text:
            caret = " " * position + "^"
            message = f"{message} at column {position + 1}\n  {text}\n  {caret}"
        super().__init__(message)


class QuadratureError(SuperformError, RuntimeError):
    """Adaptive quadrature ran out of panels before reaching its tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (error bound {error:.3e})")
        self.estimate = estimate
        self.error = error


class SingularMatrixError(SuperformError, ArithmeticError):
    """A group chart produced a singular matrix."""

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} at {tuple(float(c) for c in location)}"
        super().__init__(message)
        self.location = location


class StepSizeError(SuperformError, RuntimeError):
    """ODE step refinement failed to meet the requested tolerance."""
