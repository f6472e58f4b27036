"""Exception hierarchy shared by all palmlab modules."""


class PalmLabError(Exception):
    """Base class for every error raised by palmlab."""


class PreconditionError(PalmLabError, ValueError):
    """An operation was called on inputs violating its precondition.

    ``witness`` carries the offending item (an outcome, a pair, an orbit...)
    when one can be named.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CapExceeded(PreconditionError):
    """The exact-mode size cap would be exceeded."""


class InternalDefect(PalmLabError, AssertionError):
    """A self-verification step failed. This indicates a bug, not bad input."""


class ConfigError(PalmLabError, ValueError):
    """A document or command-line configuration is malformed."""
