"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so each class carries the
code it should produce.
"""


class JkoFlowError(Exception):
    exit_code = 1


class DomainError(JkoFlowError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(JkoFlowError, ValueError):
    """Invalid parameters or configuration file content."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(JkoFlowError, ArithmeticError):
    """A numerical kernel produced or met an unusable value."""

    exit_code = 3

    def __init__(self, message, **context):
        if context:
            detail = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({detail})"
        super().__init__(message)
        self.context = context


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""


class StepError(NumericalError):
    """A JKO step failed; ``step`` is the outer index when known."""

    def __init__(self, message, step=None, **context):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message, **context)
        self.step = step


class CflError(DomainError):
    """An explicit step was requested with a time step above the stability bound."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvariantViolation(JkoFlowError, AssertionError):
    """A structural property (energy decrease, mass) failed beyond slack."""

    exit_code = 4
