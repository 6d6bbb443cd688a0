"""hdrkit: high dynamic range image assembly, coding, display, and assessment.

The pipeline runs HdrImage/SdrImage rasters through five stages: acquisition
(`merge`), pixel/file coding (`encodings`, `formats`, `layered`), transfer
curves (`transfer`), display mapping in both directions (`tonemap`, `expand`),
and fidelity assessment (`quality`).  The `hdrkit` console script exposes the
same stages as subcommands.
"""

from . import encodings, expand, formats, layered, merge, quality, tonemap, transfer
from ._kernels import backend_name, bilateral_filter
from .core import (
    COLOR_SPACES,
    REC601,
    REC709,
    Calibration,
    ColorSpace,
    HdrImage,
    SdrImage,
    luminance,
    rgb_to_xyz,
    xyz_to_rgb,
)
from .errors import (
    AlignmentUnreliable,
    BadColorSpace,
    BadParameter,
    CodeOutOfRange,
    CorruptRle,
    CorruptStream,
    CurveNotInvertible,
    FormatError,
    HdrkitError,
    InsufficientSamples,
    MissingExtension,
    NeedsAbsoluteCalibration,
    NegativeInRgbe,
    NegativeLuminance,
    NonFiniteSample,
    NotPfm,
    NotRadiance,
    Overflow,
    ShapeMismatch,
    TruncatedFile,
    UnsupportedMaxval,
    UnsupportedVariant,
)
from .transfer import TransferFunction, pu_decode, pu_encode

__version__ = "1.0.0"

__all__ = [
    "AlignmentUnreliable",
    "BadColorSpace",
    "BadParameter",
    "COLOR_SPACES",
    "Calibration",
    "CodeOutOfRange",
    "ColorSpace",
    "CorruptRle",
    "CorruptStream",
    "CurveNotInvertible",
    "FormatError",
    "HdrImage",
    "HdrkitError",
    "InsufficientSamples",
    "MissingExtension",
    "NeedsAbsoluteCalibration",
    "NegativeInRgbe",
    "NegativeLuminance",
    "NonFiniteSample",
    "NotPfm",
    "NotRadiance",
    "Overflow",
    "REC601",
    "REC709",
    "SdrImage",
    "ShapeMismatch",
    "TransferFunction",
    "TruncatedFile",
    "UnsupportedMaxval",
    "UnsupportedVariant",
    "backend_name",
    "bilateral_filter",
    "encodings",
    "expand",
    "formats",
    "layered",
    "luminance",
    "merge",
    "pu_decode",
    "pu_encode",
    "quality",
    "rgb_to_xyz",
    "tonemap",
    "transfer",
    "xyz_to_rgb",
]
