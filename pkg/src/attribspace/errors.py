"""Exception types shared across the package."""


class AttribspaceError(Exception):
    """Base class for every error this package raises deliberately."""


class ShapeError(AttribspaceError):
    """Array dimensions do not line up."""


class ArgumentError(AttribspaceError):
    """A parameter value is outside its allowed range."""


class EmptyInputError(AttribspaceError):
    """An operation that needs at least one sample received none."""


class EmptySubsetError(EmptyInputError):
    """A subset selection matched no records."""


class UndefinedMetricError(AttribspaceError):
    """The requested metric has no defined value on this input."""


class FormatError(AttribspaceError):
    """A file does not carry the expected magic bytes or version."""


class CorruptionError(AttribspaceError):
    """A file is structurally damaged (truncated or inconsistent).

    ``byte_offset`` is the position at which the damage was detected.
    """

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


class ValidationError(AttribspaceError):
    """Data violates a declared invariant (bad label, non-finite value, ...)."""
