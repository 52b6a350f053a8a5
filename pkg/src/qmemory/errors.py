"""Exception types raised across the package.

Every error carries enough context in its message to be printed directly by
the command-line front end.
"""


class QMemoryError(Exception):
    """Base class for all package errors."""


class NonHermitian(QMemoryError, ValueError):
    pass


class NotPSD(QMemoryError, ValueError):
    pass


class BadDim(QMemoryError, ValueError):
    pass


class NoConvergence(QMemoryError, RuntimeError):
    """An iterative routine hit its iteration cap.

    ``bracket`` is set by the robustness solver to the last certified
    ``(lower, upper)`` interval, when one exists.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class IncompleteKraus(QMemoryError, ValueError):
    pass


class BadState(QMemoryError, ValueError):
    pass


class NonzeroA(QMemoryError, ValueError):
    """The input-side Bloch vector of a Choi matrix is not zero."""


class BadParam(QMemoryError, ValueError):
    pass


class BadInput(QMemoryError, ValueError):
    pass


class FitError(QMemoryError, ValueError):
    """Common base for ellipsoid fitting failures."""


class TooFewPoints(FitError):
    pass


class DegenerateData(FitError):
    pass


class NotAnEllipsoid(FitError):
    pass


class NoValidCandidate(QMemoryError, ValueError):
    """No chirality choice turns the geometric data into a CPTP map."""


class BadResolution(QMemoryError, ValueError):
    pass


class BadTargets(QMemoryError, ValueError):
    pass


class BadShots(QMemoryError, ValueError):
    pass
