"""Exception types shared by every module.

The CLI maps these onto its exit-code contract, so each class carries the
code it should produce.
"""


class BnnEcgError(Exception):
    exit_code = 1


class InvalidArgumentError(BnnEcgError, ValueError):
    exit_code = 2


class ShapeError(BnnEcgError, ValueError):
    exit_code = 2


class StateError(BnnEcgError, RuntimeError):
    exit_code = 1


class FormatError(BnnEcgError, ValueError):
    """Malformed file content. ``offset`` is a byte offset or a 1-based line."""

    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)
        self.offset = offset


class ParseError(FormatError):
    pass


class NumericError(BnnEcgError, FloatingPointError):
    exit_code = 4
