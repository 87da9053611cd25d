"""Exception hierarchy.

Input problems derive from :class:`ModelError` (CLI exit code 2); failures of
a numerical procedure derive from :class:`NumericalError` (exit code 3).
"""


class OULabError(Exception):
    """Base class for all package errors."""


class ModelError(OULabError, ValueError):
    """Malformed or inconsistent input."""


class NumericalError(OULabError, ArithmeticError):
    """A numerical procedure could not deliver its contract."""


class UnrepresentableError(NumericalError):
    """Result overflows double precision (e.g. expm for huge t*|A|)."""


class NotStableError(NumericalError):
    """Drift is not Hurwitz-stable, so the Lyapunov solver refuses."""


class QuadratureError(NumericalError):
    """Panel doubling did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class MissingCovarianceError(NumericalError):
    """The invariant covariance is not available for this model."""


class NotInSpaceError(OULabError, ValueError):
    """A vector was required to lie in a Hilbert subspace but does not."""


class NotNormalError(OULabError, ValueError):
    """The restricted generator is not normal."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class UnsupportedFunctionError(OULabError, ValueError):
    """Cylindrical function outside what the closed-form engine handles."""
