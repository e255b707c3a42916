"""Exception hierarchy shared by all modules."""


class JbdError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(JbdError, ValueError):
    """Malformed arguments: wrong dimensions, non-finite entries, bad options."""


class DegenerateStart(JbdError):
    """The starting vector is (numerically) in the null space of C."""


class NotRegular(JbdError):
    """The stacked matrix [A; L] is rank deficient."""


class DenseCapExceeded(JbdError):
    """A dense reference computation was requested beyond the size cap."""


class DiagnosticsUnavailable(JbdError):
    """A diagnostic needs data the run did not retain."""


class ParseError(JbdError):
    """Malformed Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Unsupported(JbdError):
    """Valid input that this package deliberately does not handle."""


class ConvergenceFailure(JbdError):
    """An internal dense iteration did not converge."""


class LuckyBreakdown(JbdError):
    """One of alpha, beta, hat_alpha fell below the breakdown threshold.

    ``state`` holds everything computed before the breakdown, ``quantity``
    names the offending scalar and ``step`` is the 1-based step index.
    """

    def __init__(self, quantity: str, step: int, value: float, state=None):
        self.quantity = quantity
        self.step = step
        self.value = value
        self.state = state
        super().__init__(f"{quantity} = {value:.3e} at step {step}")


class InnerSolverStalled(JbdError):
    """The inner least-squares solve hit its iteration limit."""

    def __init__(self, step: int, result, state=None):
        self.step = step
        self.result = result
        self.state = state
        super().__init__(
            f"inner LSQR did not converge at step {step} "
            f"({result.iterations} iterations, criterion {result.criterion:.3e})"
        )


class NumericalInconsistency(UserWarning):
    """A computed quantity left its admissible range by more than the error model allows."""
