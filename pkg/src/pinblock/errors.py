class PinblockError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(PinblockError, ValueError):
    """Bad input: malformed matrices, graphs, pin sets or configuration."""

    exit_code = 2


class NumericalError(PinblockError, ArithmeticError):
    """A numerical procedure failed (blow-up, leakage above tolerance, ...)."""

    exit_code = 3


class BlowUpError(NumericalError):
    pass


class DecompositionError(NumericalError):
    """Off-block leakage above tolerance after a block decomposition."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InvariantViolation(PinblockError, AssertionError):
    """A structural identity that must hold did not (e.g. driven size vs Kalman rank)."""

    exit_code = 4
