"""Inverse tone mapping: 8-bit content back to scene-referred radiance.

The SDR frame is linearized (display transfer or a recovered camera response),
optionally denoised with an edge-preserving prefilter so quantization bands do
not get amplified, and luminance is stretched with a power curve to the target
peak.  Codes near the rails are reported in a reliability mask: whatever was
clipped at capture cannot be recovered, only extrapolated.
"""

import numpy as np

from .core import REC709, Calibration, HdrImage, SdrImage
from .errors import BadParameter, CurveNotInvertible
from ._kernels import bilateral_filter
from .merge import ResponseCurve
from .transfer import TransferFunction


class ExpansionParams:
    """Settings for expand(); validates once so the hot path stays clean."""

    def __init__(self, peak=1000.0, alpha=1.0, linearizer=None,
                 prefilter=True, low_code=5, high_code=250,
                 sigma_spatial=2.0, sigma_range=0.02):
        if peak <= 0:
            raise BadParameter("peak luminance must be positive")
        if alpha < 1.0:
            raise BadParameter("expansion exponent must be >= 1")
        if not (0 <= low_code < high_code <= 255):
            raise BadParameter("need 0 <= low_code < high_code <= 255")
        if prefilter and (sigma_spatial <= 0 or sigma_range <= 0):
            raise BadParameter("prefilter sigmas must be positive")
        self.peak = float(peak)
        self.alpha = float(alpha)
        self.linearizer = linearizer or TransferFunction.srgb()
        self.prefilter = bool(prefilter)
        self.low_code = int(low_code)
        self.high_code = int(high_code)
        self.sigma_spatial = float(sigma_spatial)
        self.sigma_range = float(sigma_range)


def _linearize(codes01, linearizer):
    """codes01 in [0,1] -> linear in [0,1]."""
    if isinstance(linearizer, TransferFunction):
        return linearizer.eotf(codes01) / linearizer.peak_nits
    if isinstance(linearizer, ResponseCurve):
        if not linearizer.strictly_monotone:
            raise CurveNotInvertible("response curve has flat spans, cannot invert")
        g = linearizer.values
        rel = np.exp(g) / np.exp(g[255])  # linear output for each code, top = 1
        return np.interp(codes01 * 255.0, np.arange(256.0), rel)
    raise BadParameter(f"unsupported linearizer {type(linearizer).__name__}")


def expand(sdr, params=None, threads=1):
    """Expand an SdrImage to absolute radiance; returns (HdrImage, mask).

    mask is True where any channel code was at or beyond the reliability
    rails (>= high_code or <= low_code), i.e. where the inverse mapping is
    extrapolating rather than inverting.
    """
    params = params or ExpansionParams()
    if not isinstance(sdr, SdrImage):
        raise BadParameter("expand() takes an SdrImage")
    codes = sdr.data
    mask = ((codes >= params.high_code) | (codes <= params.low_code)).any(axis=2)

    c = codes.astype(np.float64) / 255.0
    if params.prefilter:
        filtered = np.empty_like(c)
        for ch in range(3):
            filtered[..., ch] = bilateral_filter(
                c[..., ch], params.sigma_spatial, params.sigma_range, threads=threads)
        # keep rail codes exact; filtering must not pull clipped pixels off the rail
        rail = (codes >= params.high_code) | (codes <= params.low_code)
        c = np.where(rail, c, filtered)

    lin = _linearize(c, params.linearizer)
    y = lin @ REC709.weights
    y_out = params.peak * np.power(np.maximum(y, 0.0), params.alpha)
    # chroma carried as ratios around luminance, exponent 1 (no resaturation)
    safe = y > 0
    ratio = np.divide(lin, y[..., None], out=np.ones_like(lin), where=safe[..., None])
    out = np.where(safe[..., None], ratio * y_out[..., None], 0.0)
    img = HdrImage(np.maximum(out, 0.0), Calibration.ABSOLUTE)
    return img, mask
