"""Exception types shared across the package."""


class CascadeError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(CascadeError):
    """Invalid model parameters, malformed config input, or incompatible arguments."""


class NumericError(CascadeError):
    """Non-finite values or a numeric procedure leaving its valid domain."""


class IntegrationError(NumericError):
    """Time stepping could not proceed (step underflow, blowup)."""
