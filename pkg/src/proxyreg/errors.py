"""Exception hierarchy shared by every subpackage."""


class ProxyRegError(Exception):
    """Base class for all errors raised by proxyreg."""


class DimensionError(ProxyRegError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(ProxyRegError, ValueError):
    """Input lies outside the domain where an operation is defined."""


class ContractError(ProxyRegError, ValueError):
    """A caller broke a documented precondition (e.g. non-scalar loss)."""


class ConfigError(ProxyRegError, ValueError):
    """Invalid configuration value or missing configuration input."""


class DataError(ProxyRegError, ValueError):
    """Malformed, inconsistent or insufficient data."""


class NumericalError(ProxyRegError, ArithmeticError):
    """A computation produced NaN or Inf."""
