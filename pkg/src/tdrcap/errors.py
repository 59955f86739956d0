"""Exception hierarchy shared by every tdrcap module."""


class TDRError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(TDRError, ValueError):
    """Shapes, ranges or preconditions of an argument are violated."""


class UnsupportedOrderError(TDRError, ValueError):
    """A derivative or moment above the supported order was requested."""


class DomainError(TDRError, ArithmeticError):
    """A kernel was evaluated outside its domain (e.g. a Mackey-Glass pole)."""


class InstabilityError(TDRError, ArithmeticError):
    """A linearization is not stable (spectral radius or slope >= 1).

    ``index`` identifies the offending reservoir inside a parallel pool
    when that information is available.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalError(TDRError, ArithmeticError):
    """An iterative routine failed to converge or two routes disagree."""


class DivergenceError(NumericalError):
    """A simulated trajectory became non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SingularityError(NumericalError):
    """A linear system could not be solved, even after jitter."""
