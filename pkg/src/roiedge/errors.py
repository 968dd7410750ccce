"""Exception types shared across the package."""


class RoiEdgeError(Exception):
    """Base class for all package errors."""


class FormatError(RoiEdgeError, ValueError):
    """Malformed tensor, image, or record file."""


class InputError(RoiEdgeError, ValueError):
    pass


class ParameterError(RoiEdgeError, ValueError):
    pass


class ShapeError(RoiEdgeError, ValueError):
    pass


class RangeError(RoiEdgeError, IndexError):
    pass


class SizeError(RoiEdgeError, ValueError):
    pass


class ConfigError(RoiEdgeError, ValueError):
    pass


class ProtocolError(RoiEdgeError, ValueError):
    """Malformed wire message. ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset
