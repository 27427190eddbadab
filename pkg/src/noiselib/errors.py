"""Exception hierarchy.

Everything raised on purpose by this package derives from NoiselibError so
the CLI can map "your data/arguments are bad" to a single exit status.
"""


class NoiselibError(Exception):
    """Base class for all errors raised by noiselib."""


class InvalidParameterError(NoiselibError):
    """A parameter value is outside its documented domain."""


class ShapeMismatchError(NoiselibError):
    """Arrays that must agree in shape or arity do not."""


class FormatError(NoiselibError):
    """A persisted file is malformed, truncated, or version-incompatible."""


class IngestError(NoiselibError):
    """An external record cannot be merged into a library."""


class QueryError(NoiselibError):
    """A goal cannot be evaluated against the library."""
