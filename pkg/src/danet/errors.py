"""Exception hierarchy shared by all danet modules."""


class DanetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(DanetError):
    """Operands have incompatible or invalid dimensions."""


class NonFiniteError(DanetError):
    """An operation produced NaN or infinite values."""


class ConfigError(DanetError):
    """A configuration or argument value is out of its valid range."""


class DataError(DanetError):
    """Input data is malformed (bad CSV row, out-of-range label, empty set)."""


class DegenerateBandwidthError(DanetError):
    """The median-heuristic bandwidth is undefined (too few or identical samples)."""
