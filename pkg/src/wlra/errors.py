"""Exception types shared across the package."""


class WlraError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(WlraError, ValueError):
    """An argument is out of range or shapes do not match."""


class NumericalError(WlraError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class DegenerateInputError(ParameterError):
    """The input admits no meaningful answer (e.g. an all-zero weight matrix)."""


class RecoveryError(WlraError):
    """A planted secret could not be read back from an approximation."""


class ParseError(WlraError, ValueError):
    """A matrix or results file is malformed."""
