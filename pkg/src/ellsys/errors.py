"""Exception hierarchy shared by all modules.

The CLI maps these classes onto distinct exit codes, so solver code
should raise the most specific class that applies.
"""


class EllsysError(Exception):
    """Base class for all package errors."""


class ParseError(EllsysError):
    """Expression text could not be parsed.

    Attributes:
        offset: byte offset into the source where parsing failed.
        expected: short hint about what token class was expected.
    """

    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.offset = offset
        self.expected = expected
        hint = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")


class EvalError(EllsysError):
    """Expression evaluation hit an unbound variable or a domain error."""

    def __init__(self, message: str, subexpr: str | None = None):
        self.subexpr = subexpr
        if subexpr is not None:
            message = f"{message} in subexpression '{subexpr}'"
        super().__init__(message)


class ConfigError(EllsysError):
    """Run configuration is unreadable, malformed, or inconsistent."""


class ConstructionError(EllsysError):
    """A sub/supersolution construction step failed."""


class ThresholdError(ConstructionError):
    """The coupling parameter is at or below the admissible threshold."""

    def __init__(self, lam: float, threshold: float):
        self.lam = lam
        self.threshold = threshold
        super().__init__(
            f"coupling parameter lambda = {lam:.6g} does not exceed the "
            f"required threshold {threshold:.6g}; no sub/supersolution "
            f"bracket can be built from the eigenpair construction"
        )


class ConvergenceError(EllsysError):
    """An iterative solver ran out of iterations."""


class InvariantViolation(EllsysError):
    """A structural property the algorithms rely on was violated at runtime."""


class SingularSystemError(ConstructionError):
    """Robin system has no positive shift and a coefficient with zero mass.

    Solvability needs either kappa > 0 or a nonnegative coefficient c with
    strictly positive integral over the domain.
    """


class NotSPDError(InvariantViolation):
    """Matrix handed to an SPD-only kernel is not positive definite."""
