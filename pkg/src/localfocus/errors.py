"""Exception types shared across the package.

All of these derive from ValueError (except StateError) so callers that
just want "reject bad input" can catch one base class, while the CLI can
map each to a specific exit code.
"""


class ShapeError(ValueError):
    """An array has the wrong rank or an axis with an unusable extent."""


class ConfigError(ValueError):
    """A configuration value is out of its documented range."""


class DomainError(ValueError):
    """A runtime value is outside the mathematical domain of an operation."""


class ParseError(ValueError):
    """A file or byte stream is malformed.

    ``offset`` is the byte offset (or line number for line-oriented
    formats, see the message) where parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class StateError(RuntimeError):
    """An operation was called in an order its contract forbids."""
