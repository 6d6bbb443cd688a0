"""Image model, color spaces, and luminance extraction.

All pipeline stages exchange ``HdrImage`` (linear float64 RGB, relative or
nit-calibrated) and ``SdrImage`` (8-bit display-encoded RGB) rasters.  Rasters
are row-major, top-left origin, interleaved RGB.  Images are immutable after
construction; every operation returns a new image.
"""

import enum

import numpy as np

from .errors import BadColorSpace, NonFiniteSample, ShapeMismatch


class Calibration(enum.Enum):
    """Whether sample values carry physical units.

    ``ABSOLUTE`` means luminance() yields nits; ``RELATIVE`` means values are
    exposure-relative and only ratios are meaningful.  Carried as metadata,
    never inferred from pixel statistics.
    """

    RELATIVE = "relative"
    ABSOLUTE = "absolute"


class ColorSpace:
    """An RGB color space given by its primaries matrix.

    The matrix is derived from chromaticity coordinates so that the luminance
    row sums to 1 to machine precision (required for the luminance-preserving
    color-correction identity).  Published 4-decimal matrices miss that by ~1e-7.
    """

    def __init__(self, name, rgb_to_xyz_matrix):
        m = np.asarray(rgb_to_xyz_matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise BadColorSpace(f"primaries matrix must be 3x3, got {m.shape}")
        det = np.linalg.det(m)
        if abs(det) < 1e-12:
            raise BadColorSpace(f"singular primaries matrix (det={det:g})")
        weights = m[1]
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise BadColorSpace(
                f"luminance weights must sum to 1 within 1e-9, got {weights.sum()!r}"
            )
        self.name = name
        self.matrix = m
        self.matrix.setflags(write=False)
        self.inverse = np.linalg.inv(m)
        self.inverse.setflags(write=False)
        self.weights = weights  # (w_R, w_G, w_B), second matrix row

    @classmethod
    def from_primaries(cls, name, xy_red, xy_green, xy_blue, xy_white):
        """Build the RGB->XYZ matrix from chromaticities plus white point."""
        def xyz(xy):
            x, y = xy
            return np.array([x / y, 1.0, (1.0 - x - y) / y])

        cols = np.stack([xyz(xy_red), xyz(xy_green), xyz(xy_blue)], axis=1)
        white = xyz(xy_white)
        scale = np.linalg.solve(cols, white)
        return cls(name, cols * scale)

    def __repr__(self):
        return f"ColorSpace({self.name!r})"


# D65 white shared by both spaces; 601 here means the EBU/BT.601-625 primaries
# (the classic SDR base-layer space), 709 the modern default.
_D65 = (0.3127, 0.3290)
REC709 = ColorSpace.from_primaries(
    "rec709", (0.640, 0.330), (0.300, 0.600), (0.150, 0.060), _D65
)
REC601 = ColorSpace.from_primaries(
    "rec601", (0.640, 0.330), (0.290, 0.600), (0.150, 0.060), _D65
)

COLOR_SPACES = {"rec709": REC709, "rec601": REC601}


class HdrImage:
    """Linear floating-point RGB raster.

    data is float64 (h, w, 3), read-only.  All samples must be finite;
    negative samples are rejected unless ``allow_negative`` is set (wide-gamut
    RGB after a matrix transform can legitimately go negative).
    """

    def __init__(self, data, calibration=Calibration.RELATIVE, allow_negative=False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeMismatch(f"expected (h, w, 3) raster, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteSample("HdrImage samples must be finite")
        if not allow_negative and (arr < 0).any():
            raise NonFiniteSample(
                "negative samples present; pass allow_negative=True for wide-gamut data"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        self.data = arr
        self.calibration = calibration
        self.allow_negative = allow_negative

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return 3

    def with_data(self, data, calibration=None, allow_negative=None):
        """New image with replaced samples, metadata carried over by default."""
        return HdrImage(
            data,
            self.calibration if calibration is None else calibration,
            self.allow_negative if allow_negative is None else allow_negative,
        )

    def __repr__(self):
        return (
            f"HdrImage({self.width}x{self.height}, {self.calibration.value},"
            f" range [{self.data.min():g}, {self.data.max():g}])"
        )


class SdrImage:
    """8-bit display-referred RGB raster plus the OETF that produced it."""

    VALID_TRANSFERS = ("gamma22", "srgb", "pq_normalized", "log_normalized", "pu_normalized")

    def __init__(self, data, transfer_tag="srgb"):
        arr = np.ascontiguousarray(data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeMismatch(f"expected (h, w, 3) raster, got {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise NonFiniteSample("SDR samples must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        if transfer_tag not in self.VALID_TRANSFERS:
            raise NonFiniteSample(f"unknown transfer_tag {transfer_tag!r}")
        arr = arr.copy()
        arr.setflags(write=False)
        self.data = arr
        self.transfer_tag = transfer_tag

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def __repr__(self):
        return f"SdrImage({self.width}x{self.height}, {self.transfer_tag})"


def luminance(img, cs=REC709):
    """Per-pixel luminance w_R*R + w_G*G + w_B*B.

    Returns an (h, w) float64 raster; values are nits when the image is
    Absolute-calibrated.
    """
    data = img.data if isinstance(img, HdrImage) else np.asarray(img, dtype=np.float64)
    if not np.isfinite(data).all():
        raise NonFiniteSample("luminance input contains non-finite samples")
    w = cs.weights
    # Explicit sum keeps the weight order obvious; einsum would hide it.
    return data[..., 0] * w[0] + data[..., 1] * w[1] + data[..., 2] * w[2]


def rgb_to_xyz(img, cs=REC709):
    out = img.data @ cs.matrix.T
    return img.with_data(out, allow_negative=True)


def xyz_to_rgb(img, cs=REC709):
    out = img.data @ cs.inverse.T
    return img.with_data(out, allow_negative=True)
