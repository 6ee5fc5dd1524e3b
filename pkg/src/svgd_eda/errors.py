"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument violates an operation's documented precondition."""


class BandwidthUndefinedError(ContractViolationError):
    """Median-trick bandwidth requested for fewer than two particles."""


class ConfigurationError(ValueError):
    """An optimizer or experiment configuration is invalid."""


class DivergedError(RuntimeError):
    """Particle parameters became non-finite or unreasonably large."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class InstanceParseError(ValueError):
    """A landscape instance file is malformed.

    Carries a human-readable location (line number or field name).
    """

    def __init__(self, message: str, location: str | None = None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class SearchSpaceTooLargeError(ValueError):
    """Exhaustive enumeration refused because D**n exceeds the guard."""


class AggregationError(ValueError):
    """Trace files passed to the aggregator disagree on schema."""

    def __init__(self, message: str, path: str | None = None):
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
        self.path = path
