"""Exception hierarchy shared by every module."""


class CacheSchedError(Exception):
    """Base class; the CLI maps any subclass to exit status 1."""


class SchemaError(CacheSchedError, ValueError):
    """A persisted artifact does not match its declared layout."""


class ValidationError(CacheSchedError, ValueError):
    """A value violates a type invariant (lengths, signs, finiteness)."""


class DimensionError(CacheSchedError, ValueError):
    pass


class DegenerateError(CacheSchedError, ArithmeticError):
    """Denominator or norm too close to zero for the requested ratio."""


class DomainError(CacheSchedError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ConfigurationError(CacheSchedError, ValueError):
    pass


class NumericalError(CacheSchedError, ArithmeticError):
    pass
