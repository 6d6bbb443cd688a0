"""Tone mapping: HDR luminance to a displayable range, then color back in.

Two operators are provided.  The global one is a photographic-style curve with
an explicit white point; the local one splits log luminance into a bilateral
base layer and a detail layer and compresses only the base.  Both report the
per-pixel slope dL_t/dL of the luminance mapping, which downstream saturation
control uses.
"""

import numpy as np

from .core import HdrImage, SdrImage, luminance
from .errors import BadParameter, ShapeMismatch
from ._kernels import bilateral_filter
from .transfer import TransferFunction


class ToneMapResult:
    """Bundle of tone mapping outputs before and after color re-attachment."""

    def __init__(self, l_t, l_o, curve_slope, source):
        self.l_t = l_t              # tone-mapped luminance in [0,1]
        self.l_o = l_o              # original luminance
        self.curve_slope = curve_slope
        self.source = source        # HdrImage the luminance came from
        self.sdr = None             # filled by finish()
        self.clip_fraction = 0.0

    def finish(self, saturation="auto", formula="ratio", transfer=None):
        rgb = color_correct(self.source, self.l_t, self.l_o,
                            saturation=saturation, formula=formula,
                            slope=self.curve_slope)
        self.sdr, self.clip_fraction = to_sdr(rgb, transfer or TransferFunction.srgb())
        return self


def tonemap_global(image, key=0.18, white=None):
    """Photographic curve x(1 + x/w^2)/(1 + x) on scaled luminance.

    x = s L with s = key / exp(mean ln L) over positive pixels; w is the
    scaled white point, which maps exactly to display 1.0.  `white` defaults
    to the scaled luminance maximum so nothing burns out.
    """
    l_in = luminance(image)
    pos = l_in > 0
    if not pos.any():
        zeros = np.zeros_like(l_in)
        return ToneMapResult(zeros, l_in, np.zeros_like(l_in), image)
    log_avg = np.exp(np.mean(np.log(l_in[pos])))
    s = key / log_avg
    x = s * l_in
    if white is None:
        w = x.max()
    else:
        if white <= 0:
            raise BadParameter("white point must be positive")
        w = s * white
    if w <= 0:
        raise BadParameter("white point must be positive")
    w2 = w * w
    l_t = x * (1.0 + x / w2) / (1.0 + x)
    l_t = np.clip(l_t, 0.0, 1.0)
    # d/dx of x(1+x/w2)/(1+x), times dx/dL = s
    slope = s * (1.0 + 2.0 * x / w2 + x * x / w2) / ((1.0 + x) * (1.0 + x))
    return ToneMapResult(l_t, l_in, slope, image)


def tonemap_local(image, sigma_spatial=8.0, sigma_range=0.4,
                  base_contrast=1.6, threads=1):
    """Bilateral base/detail split in log10 luminance; base range compressed.

    Detail (the small-scale residual the filter leaves behind) passes through
    at unit gain; only the base layer is scaled so its range becomes
    `base_contrast` decades.  The slope raster equals the base compression
    factor everywhere, which is what the chroma path needs to know.
    """
    if sigma_spatial <= 0 or sigma_range <= 0:
        raise BadParameter("bilateral sigmas must be positive")
    if base_contrast <= 0:
        raise BadParameter("base_contrast must be positive")
    l_in = luminance(image)
    floor = max(l_in.max() * 1e-9, 1e-30)
    log_l = np.log10(np.maximum(l_in, floor))
    base = bilateral_filter(log_l, sigma_spatial, sigma_range, threads=threads)
    detail = log_l - base
    b_min, b_max = base.min(), base.max()
    b_range = b_max - b_min
    if b_range > base_contrast:
        gamma = base_contrast / b_range
    else:
        gamma = 1.0  # never expand an already-flat base
    out_log = gamma * (base - b_max) + detail
    l_t = np.clip(np.power(10.0, out_log), 0.0, 1.0)
    slope = np.full_like(l_in, gamma)
    return ToneMapResult(l_t, l_in, slope, image)


def auto_saturation(slope):
    """Chroma exponent from local curve slope, clamped to [0,1]."""
    return np.clip(slope, 0.0, 1.0)


def color_correct(image, l_t, l_o, saturation="auto", formula="ratio", slope=None):
    """Re-attach color to tone-mapped luminance.

    ratio:  C_out = (C/L)^p * L_t
    linear: C_out = ((C/L - 1) p + 1) * L_t
    p
      below 1 desaturates.  "auto" derives p per pixel from the curve slope.
    Both formulas keep luminance exact for the linear one (channel weights sum
    to one) and near-exact for the ratio one at p = 1.
    """
    if formula not in ("ratio", "linear"):
        raise BadParameter(f"unknown chroma formula {formula!r}")
    if l_t.shape != image.data.shape[:2] or l_o.shape != l_t.shape:
        raise ShapeMismatch("luminance rasters must match the image")
    if isinstance(saturation, str):
        if saturation != "auto":
            raise BadParameter(f"saturation must be numeric or 'auto', got {saturation!r}")
        if slope is None:
            raise BadParameter("auto saturation needs the curve slope")
        p = auto_saturation(slope)
    else:
        p = np.asarray(saturation, dtype=np.float64)
        if p.ndim not in (0, 2):
            raise BadParameter("saturation must be a scalar or a per-pixel raster")
        if (p < 0).any() or (p > 4).any():
            raise BadParameter("saturation exponent out of range")
    if np.ndim(p) == 2 and p.shape != l_t.shape:
        raise ShapeMismatch("saturation raster must match the image")

    lum = l_o[..., None]
    lt = l_t[..., None]
    pp = p[..., None] if np.ndim(p) == 2 else p
    safe = lum > 0
    ratio = np.divide(image.data, lum, out=np.ones_like(image.data), where=safe)
    if formula == "ratio":
        out = np.power(np.maximum(ratio, 0.0), pp) * lt
    else:
        # p*ratio + (1-p) rather than (ratio-1)*p + 1: avoids cancellation for
        # extreme ratios and makes p=1 collapse to ratio exactly
        out = (ratio * pp + (1.0 - pp)) * lt
    out = np.where(safe, out, 0.0)
    return image.with_data(out, allow_negative=True)


def to_sdr(display_linear, transfer=None):
    """Encode display-linear RGB in [0,1] to 8-bit; clipping happens here only.

    Returns (SdrImage, fraction of samples that had to be clipped).
    """
    transfer = transfer or TransferFunction.srgb()
    data = display_linear.data if isinstance(display_linear, HdrImage) else np.asarray(display_linear)
    clipped = (data < 0.0) | (data > 1.0)
    frac = float(np.count_nonzero(clipped)) / data.size
    lin = np.clip(data, 0.0, 1.0)
    code = transfer.oetf(lin * transfer.peak_nits)
    codes = np.rint(code * 255.0).astype(np.uint8)
    tag = {"srgb": "srgb", "gamma": "gamma22", "pq": "pq_normalized",
           "log": "log_normalized", "pu": "pu_normalized"}[transfer.kind]
    return SdrImage(codes, transfer_tag=tag), frac
