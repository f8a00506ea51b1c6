"""Exception types shared across the package."""


class RoesserError(Exception):
    """Base class for all errors raised by roesserconv."""


class ShapeError(RoesserError, ValueError):
    """Dimension, channel or extent mismatch between objects."""


class UnsupportedError(RoesserError, NotImplementedError):
    """Requested combination is outside what the builders cover."""


class FormatError(RoesserError, ValueError):
    """A JSON document does not describe a valid object."""
