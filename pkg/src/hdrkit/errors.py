"""Error and warning types shared across the toolkit.

File-format errors carry the byte offset at which parsing failed so that CLI
diagnostics can point into the file.
"""


class HdrkitError(Exception):
    """Base class for all library errors."""


class NonFiniteSample(HdrkitError):
    pass


class BadColorSpace(HdrkitError):
    pass


class ShapeMismatch(HdrkitError):
    pass


class NegativeInRgbe(HdrkitError):
    pass


class Overflow(HdrkitError):
    pass


class CodeOutOfRange(HdrkitError):
    pass


class NegativeLuminance(HdrkitError):
    pass


class InsufficientSamples(HdrkitError):
    pass


class BadParameter(HdrkitError):
    pass


class CurveNotInvertible(HdrkitError):
    pass


class NeedsAbsoluteCalibration(HdrkitError):
    pass


class FormatError(HdrkitError):
    """Base for file-format errors; remembers where in the byte stream it happened."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NotRadiance(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class CorruptRle(FormatError):
    pass


class NotPfm(FormatError):
    pass


class BadScale(FormatError):
    pass


class UnsupportedMaxval(FormatError):
    pass


class UnsupportedVariant(FormatError):
    pass


class MissingExtension(FormatError):
    pass


class CorruptStream(FormatError):
    pass


class AlignmentUnreliable(UserWarning):
    """Alignment fell back to a safe shift; the result may contain ghosting."""
