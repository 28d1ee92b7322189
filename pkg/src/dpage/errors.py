"""Exception types shared across the package."""


class DPageError(Exception):
    """Base class for all package errors."""


class DimensionError(DPageError, ValueError):
    """Tensor shapes are incompatible for the requested operation."""


class DomainError(DPageError, ValueError):
    """An input lies outside an operation's numeric domain (e.g. log of <= 0)."""


class ContractError(DPageError, ValueError):
    """A caller violated an API precondition."""


class ConfigError(DPageError, ValueError):
    """Inconsistent or out-of-range configuration."""


class DataFormatError(DPageError, ValueError):
    """A data file does not match its expected format."""
