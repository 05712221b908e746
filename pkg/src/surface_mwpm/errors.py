"""Exception types raised across the package."""


class SurfaceMatchingError(Exception):
    """Base class for all errors raised by this package."""


class NonEmptySyndrome(SurfaceMatchingError):
    """Logical readout was requested while a residual syndrome remains."""


class GraphInfeasible(SurfaceMatchingError):
    """No perfect matching exists (some component has no boundary and odd size)."""


class NoProgress(SurfaceMatchingError):
    """A dual adjustment of zero was requested; a tight edge was missed."""


class ExpandNonzeroY(SurfaceMatchingError):
    pass


class ExpandOuter(SurfaceMatchingError):
    pass


class NotSameTree(SurfaceMatchingError):
    pass


class InvalidMark(SurfaceMatchingError):
    pass


class FutureDataNeeded(SurfaceMatchingError):
    """Exploration or dual growth would reach a round that has not been measured."""


class OutOfOrderRound(SurfaceMatchingError):
    pass


class TooLarge(SurfaceMatchingError):
    pass


class NoCrossing(SurfaceMatchingError):
    """Logical error rate curves do not intersect in the sampled range."""


class SyndromeParseError(SurfaceMatchingError, ValueError):
    """Malformed syndrome text; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
