"""Exception hierarchy shared by all coopcache modules."""


class CoopCacheError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(CoopCacheError, ValueError):
    """An argument is outside its allowed domain."""


class ParseError(CoopCacheError, ValueError):
    """A text document could not be parsed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ValidationError(CoopCacheError, ValueError):
    """A structure violates one of its invariants."""


class ConfigurationError(CoopCacheError, ValueError):
    """A run or topology configuration cannot be satisfied."""


class MetricError(CoopCacheError, ValueError):
    """A metric is undefined for the given input."""


class InstanceTooLarge(CoopCacheError):
    """The brute-force oracle refuses instances beyond its enumeration limit."""
