"""Exception hierarchy shared by all modules."""


class Vn1Error(Exception):
    """Base class for every error raised by this package."""


class ValidationError(Vn1Error, ValueError):
    """An input object violates one of its invariants."""


class OrthogonalityError(Vn1Error):
    """Preparation and postselection are (numerically) orthogonal.

    The overlap is kept on the exception so callers can still report it.
    """

    def __init__(self, message, omega):
        super().__init__(message)
        self.omega = omega


class ConsistencyError(Vn1Error):
    """An internal cross-check failed (e.g. a negative probability)."""


class LinearRegimeError(ValidationError):
    """The first-order weak expansion is used outside its range of validity."""

    def __init__(self, message, margin):
        super().__init__(message)
        self.margin = margin
