"""Exception types shared across the library."""


class BevPoolError(Exception):
    """Base class for all library errors."""


class ValidationError(BevPoolError, ValueError):
    """An input violates a documented shape, dtype, or finiteness contract."""


class ConfigurationError(BevPoolError, ValueError):
    """A spec or option is inconsistent (empty rig, unknown backend, ...)."""


class BehindCameraError(BevPoolError, ValueError):
    """Projection was requested for a point with non-positive camera depth."""


class StaleCacheError(BevPoolError):
    """An association cache does not match the rig/grid it is used with."""


class UnsupportedReducerError(BevPoolError, ValueError):
    """The requested reducer cannot be expressed by this backend."""


class FileFormatError(BevPoolError, ValueError):
    """A calibration, tensor, or cache file failed to parse.

    `field` names the offending JSON field (dotted path) when known;
    `offset` is the byte offset for binary formats.
    """

    def __init__(self, message, field=None, offset=None):
        if field is not None:
            message = f"{field}: {message}"
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.field = field
        self.offset = offset
