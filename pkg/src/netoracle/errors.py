"""Exception types shared across the package."""


class OracleError(Exception):
    """Base class for every error raised by this package."""


class UnknownPointError(OracleError, LookupError):
    """A point id that was never created."""


class EndpointError(OracleError, LookupError):
    """A query endpoint that is deleted or otherwise not live."""


class DuplicatePointError(OracleError, ValueError):
    """A point that coincides with an existing point or is inserted twice."""


class DatasetFormatError(OracleError, ValueError):
    """A dataset stream that does not parse; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParameterError(OracleError, ValueError):
    """A configuration value outside its admissible range."""


class LevelError(OracleError, ValueError):
    """A hierarchy level outside the structure's current range."""


class EpochError(OracleError, RuntimeError):
    """A handle used against a structure that has been mutated or rebuilt."""


class InvariantError(OracleError, AssertionError):
    """An internal consistency check failed."""
