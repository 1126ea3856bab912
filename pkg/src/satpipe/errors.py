"""Exception types shared across the package."""


class SatpipeError(Exception):
    """Base class for all satpipe errors."""


class DataError(SatpipeError):
    """Input data is malformed, inconsistent, or unusable."""


class FormatError(DataError):
    """A container file violates its declared format."""


class TruncationError(DataError):
    """A container file ends before its declared payload."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


class LabelError(DataError):
    """A label index falls outside its class scheme."""


class GeometryError(DataError):
    """A spatial offset does not fit inside the patch."""


class DegenerateLabelsError(DataError):
    """Training data contains fewer than two distinct classes."""


class NumericError(SatpipeError):
    """A numeric invariant failed (NaN or overflow during a run)."""
