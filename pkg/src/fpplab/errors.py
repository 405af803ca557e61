class FPPError(Exception):
    """Base class for errors raised by fpplab."""


class ConfigurationError(FPPError, ValueError):
    """Malformed or unsupported configuration (distribution literal, config file, ...)."""


class DomainError(FPPError, ValueError):
    """An operation was called outside its precondition."""


class AssumptionViolation(FPPError):
    """A model assumption (A1, A2, B1/B2, ...) fails for the requested law."""


class ResourceRefusal(FPPError):
    """An exact computation would exceed its state-space budget."""


class FormatError(FPPError):
    """A results file lacks the columns a consumer needs."""
