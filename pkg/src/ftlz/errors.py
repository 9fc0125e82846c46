"""Exception hierarchy shared by all ftlz modules."""


class FtlzError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometry(FtlzError):
    """Bad field dimensions or block edge."""


class DegenerateBound(FtlzError):
    """Error bound resolves to zero or a non-finite value."""


class ShapeMismatch(FtlzError):
    """Two fields that must share dimensions do not."""


class BlockTooLarge(FtlzError):
    """Block exceeds the checksum localization cap."""


class CorruptStream(FtlzError):
    """Compressed container is malformed, truncated, or undecodable."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedCodec(FtlzError):
    """Backend codec id is not registered."""


class InternalInvariantViolation(FtlzError):
    """A state the pipeline promises can never occur was observed."""


class UncorrectableCorruption(FtlzError):
    """Checksum verification failed and no single-word correction exists."""


class InvalidRegion(FtlzError):
    """Extraction region falls outside the field."""


class InvalidInjection(FtlzError):
    """Fault-injection coordinates are out of range for the target."""


class InvalidArgument(FtlzError):
    """Operation argument outside its documented domain."""


class IoError(FtlzError):
    """File could not be read or written."""
