"""Exception taxonomy for the execution engine.

Everything raised on purpose derives from EngineError so callers can catch
one base type; ValueError/TypeError style misuse is mapped to
InvalidArgumentError at the public boundaries.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidArgumentError(EngineError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class InvalidStateError(EngineError, RuntimeError):
    """An operation was invoked in a state that cannot honor it, e.g.
    stepping a finished episode or using a feed view before reset."""


class ParseError(EngineError, ValueError):
    """Malformed input data: bad CSV row, header, filename, or config."""


class DataIntegrityError(EngineError, ValueError):
    """Structurally parseable data that violates a book or feed invariant
    (crossed book, unsorted levels, non-monotonic timestamps, gaps)."""


class OutOfRangeError(EngineError, ValueError):
    """A timestamp or index falls outside the loaded history."""


class EmptyTradesError(EngineError, ValueError):
    """A volume-weighted average was requested over zero executed volume."""
