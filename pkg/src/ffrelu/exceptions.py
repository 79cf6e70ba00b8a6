"""Exception types raised across the package."""


class FFReluError(Exception):
    """Base class for package errors."""


class DomainError(FFReluError, ValueError):
    """A point lies outside the network domain."""


class ShapeError(FFReluError, ValueError):
    """Array or network shapes are inconsistent."""


class CompositionDomainError(FFReluError, ValueError):
    """A network's range does not fit inside the next network's domain."""


class CertificationError(FFReluError, RuntimeError):
    """A construction could not be certified to the requested tolerance."""


class ConversionError(FFReluError, RuntimeError):
    """A special network could not be converted to standard form."""


class FittingError(FFReluError, RuntimeError):
    """The least-squares fitter could not produce a network."""


class DocumentError(FFReluError, ValueError):
    """A serialized document is malformed.

    ``location`` names the offending position: a character offset for JSON
    syntax errors, or a field path such as ``layers[2].bias``.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class DataError(FFReluError, ValueError):
    """Required data (norms, samples) is missing or inconsistent."""
