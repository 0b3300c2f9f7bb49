"""Exception types shared across the package."""


class CSDError(Exception):
    """Base class for all errors raised by csdlab."""

    category = "internal"


class RepresentationError(CSDError, ValueError):
    """A field was given in the wrong (position/frequency) representation."""

    category = "representation"


class DomainError(CSDError, ValueError):
    """An argument lies outside the domain of a symbol or operator."""

    category = "domain"


class GridMismatchError(CSDError, ValueError):
    category = "grid"


class ConfigError(CSDError, ValueError):
    """Invalid experiment configuration.

    ``errors`` holds every problem found, not just the first one.
    """

    category = "config"

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(CSDError, FloatingPointError):
    category = "numerical"


class QuadratureError(NumericalError):
    category = "quadrature"
