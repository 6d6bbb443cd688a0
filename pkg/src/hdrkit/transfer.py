"""Transfer functions (OETF/EOTF pairs) and the perceptually-uniform encoding.

Five kinds: pure power law (gamma), the sRGB piecewise curve, the absolute
ST 2084 perceptual quantizer (PQ, code 1.0 = 10000 nits), a logarithmic code
over a configurable decade span, and a normalized perceptually-uniform (PU)
curve.  ``pu_encode`` exposes PU in its metric form: 0 at 0.1 nits, 255 at
80 nits, monotone beyond both anchors.
"""

import numpy as np

from .errors import BadParameter, CodeOutOfRange, NegativeLuminance

# ST 2084 constants (exact rationals of the standard).
_PQ_M1 = 2610.0 / 16384.0
_PQ_M2 = 2523.0 / 4096.0 * 128.0
_PQ_C1 = 3424.0 / 4096.0
_PQ_C2 = 2413.0 / 4096.0 * 32.0
_PQ_C3 = 2392.0 / 4096.0 * 32.0
PQ_PEAK_NITS = 10000.0

# Luminance-sensitivity fit used to build the PU curve: S(L) gives relative
# contrast sensitivity at adaptation luminance L (cd/m^2).  PU is the integral
# of S over log10 L, i.e. equal PU steps are equal multiples of the local
# detection threshold.  The same fit feeds the band-visibility thresholds in
# the quality module.
_SENS = (30.162, 4.0627, 1.6596, 0.2712)


def contrast_sensitivity(luminance_nits):
    """Relative luminance contrast sensitivity S(L) of the fit above."""
    la = np.maximum(np.asarray(luminance_nits, dtype=np.float64), 1e-20)
    s0, s1, s2, s3 = _SENS
    return s0 * np.power(np.power(s1 / la, s2) + 1.0, -s3)


# Piecewise-linear PU table over log10 L in [-8, 10].  Forward and inverse
# both interpolate the same nodes, so they are exact inverses of each other.
_PU_LGRID = np.linspace(-8.0, 10.0, 4609)
_PU_SENS = contrast_sensitivity(np.power(10.0, _PU_LGRID))
_PU_RAW = np.concatenate(
    [[0.0], np.cumsum((_PU_SENS[1:] + _PU_SENS[:-1]) * 0.5 * np.diff(_PU_LGRID))]
)
_PU_EDGE_SLOPES = (_PU_SENS[0], _PU_SENS[-1])


def _pu_raw(lum):
    l10 = np.log10(np.maximum(np.asarray(lum, dtype=np.float64), 1e-20))
    out = np.interp(l10, _PU_LGRID, _PU_RAW)
    lo = l10 < _PU_LGRID[0]
    hi = l10 > _PU_LGRID[-1]
    if np.any(lo):
        out = np.where(lo, _PU_RAW[0] + _PU_EDGE_SLOPES[0] * (l10 - _PU_LGRID[0]), out)
    if np.any(hi):
        out = np.where(hi, _PU_RAW[-1] + _PU_EDGE_SLOPES[1] * (l10 - _PU_LGRID[-1]), out)
    return out


def _pu_raw_inverse(p):
    p = np.asarray(p, dtype=np.float64)
    l10 = np.interp(p, _PU_RAW, _PU_LGRID)
    lo = p < _PU_RAW[0]
    hi = p > _PU_RAW[-1]
    if np.any(lo):
        l10 = np.where(lo, _PU_LGRID[0] + (p - _PU_RAW[0]) / _PU_EDGE_SLOPES[0], l10)
    if np.any(hi):
        l10 = np.where(hi, _PU_LGRID[-1] + (p - _PU_RAW[-1]) / _PU_EDGE_SLOPES[1], l10)
    return np.power(10.0, l10)


_PU_ANCHOR_LO = float(_pu_raw(0.1))
_PU_ANCHOR_SPAN = float(_pu_raw(80.0)) - _PU_ANCHOR_LO


def pu_encode(luminance_nits):
    """Luminance (nits) -> PU units: PU(0.1) = 0, PU(80) = 255, monotone.

    Values below 0.1 nits map below zero; that is intentional.
    """
    return 255.0 * (_pu_raw(luminance_nits) - _PU_ANCHOR_LO) / _PU_ANCHOR_SPAN


def pu_decode(pu_units):
    return _pu_raw_inverse(
        np.asarray(pu_units, dtype=np.float64) * (_PU_ANCHOR_SPAN / 255.0) + _PU_ANCHOR_LO
    )


class TransferFunction:
    """One OETF/EOTF pair; eotf maps code [0,1] to luminance and back."""

    KINDS = ("gamma", "srgb", "pq", "log", "pu")

    def __init__(self, kind, peak_nits=1.0, gamma=2.2, decades=12.0):
        if kind not in self.KINDS:
            raise BadParameter(f"unknown transfer kind {kind!r}")
        if kind == "pq":
            peak_nits = PQ_PEAK_NITS  # pinned by the standard
        if peak_nits <= 0:
            raise BadParameter("peak_nits must be positive")
        if kind == "gamma" and gamma <= 0:
            raise BadParameter("gamma must be positive")
        if kind == "log" and decades <= 0:
            raise BadParameter("decades must be positive")
        self.kind = kind
        self.peak_nits = float(peak_nits)
        self.gamma = float(gamma)
        self.decades = float(decades)

    # -- constructors -------------------------------------------------------

    @classmethod
    def gamma22(cls, peak_nits=1.0):
        return cls("gamma", peak_nits=peak_nits, gamma=2.2)

    @classmethod
    def srgb(cls, peak_nits=1.0):
        return cls("srgb", peak_nits=peak_nits)

    @classmethod
    def pq(cls):
        return cls("pq")

    @classmethod
    def log(cls, decades=12.0, peak_nits=1.0):
        return cls("log", peak_nits=peak_nits, decades=decades)

    @classmethod
    def pu(cls, peak_nits=10000.0):
        return cls("pu", peak_nits=peak_nits)

    @classmethod
    def from_name(cls, name, peak_nits=None):
        """CLI names: gamma22 | srgb | pq | log | pu."""
        table = {
            "gamma22": lambda p: cls.gamma22(p if p else 1.0),
            "srgb": lambda p: cls.srgb(p if p else 1.0),
            "pq": lambda p: cls.pq(),
            "log": lambda p: cls.log(peak_nits=p if p else 1.0),
            "pu": lambda p: cls.pu(p if p else 10000.0),
        }
        if name not in table:
            raise BadParameter(f"unknown transfer name {name!r}")
        return table[name](peak_nits)

    def __repr__(self):
        return f"TransferFunction({self.kind!r}, peak_nits={self.peak_nits:g})"

    # -- the pair -----------------------------------------------------------

    def eotf(self, code):
        scalar = np.isscalar(code)
        c = np.asarray(code, dtype=np.float64)
        if (~np.isfinite(c)).any() or (c < 0).any() or (c > 1).any():
            raise CodeOutOfRange("codes must lie in [0, 1]")
        if self.kind == "gamma":
            out = self.peak_nits * np.power(c, self.gamma)
        elif self.kind == "srgb":
            lin = np.where(
                c <= 0.04045, c / 12.92, np.power((c + 0.055) / 1.055, 2.4)
            )
            out = self.peak_nits * lin
        elif self.kind == "pq":
            p = np.power(c, 1.0 / _PQ_M2)
            num = np.maximum(p - _PQ_C1, 0.0)
            out = PQ_PEAK_NITS * np.power(num / (_PQ_C2 - _PQ_C3 * p), 1.0 / _PQ_M1)
        elif self.kind == "log":
            out = self.peak_nits * np.power(10.0, self.decades * (c - 1.0))
        else:  # pu
            lo = _pu_raw(self.peak_nits * 1e-8)
            hi = _pu_raw(self.peak_nits)
            out = _pu_raw_inverse(lo + c * (hi - lo))
        return float(out) if scalar else out

    def oetf(self, lum):
        scalar = np.isscalar(lum)
        y = np.asarray(lum, dtype=np.float64)
        if (~np.isfinite(y)).any() or (y < 0).any():
            raise NegativeLuminance("luminance must be finite and >= 0")
        y = np.minimum(y, self.peak_nits)
        if self.kind == "gamma":
            out = np.power(y / self.peak_nits, 1.0 / self.gamma)
        elif self.kind == "srgb":
            lin = y / self.peak_nits
            out = np.where(
                lin <= 0.0031308,
                lin * 12.92,
                1.055 * np.power(lin, 1.0 / 2.4) - 0.055,
            )
        elif self.kind == "pq":
            ym = np.power(y / PQ_PEAK_NITS, _PQ_M1)
            out = np.power((_PQ_C1 + _PQ_C2 * ym) / (1.0 + _PQ_C3 * ym), _PQ_M2)
        elif self.kind == "log":
            with np.errstate(divide="ignore"):
                out = 1.0 + np.log10(y / self.peak_nits) / self.decades
            out = np.clip(out, 0.0, 1.0)
        else:  # pu
            lo = _pu_raw(self.peak_nits * 1e-8)
            hi = _pu_raw(self.peak_nits)
            out = np.clip((_pu_raw(y) - lo) / (hi - lo), 0.0, 1.0)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if scalar else out


def eotf(tf, code):
    return tf.eotf(code)


def oetf(tf, lum):
    return tf.oetf(lum)


class QuantizationReport:
    """Integer codes plus the worst-case luminance step of the code lattice."""

    def __init__(self, codes, bits, max_step_ratio, max_step_rel_error):
        self.codes = codes
        self.bits = bits
        self.max_step_ratio = max_step_ratio
        self.max_step_rel_error = max_step_rel_error


def quantize(tf, luminances, bits):
    """Uniform quantization of the code domain to 2^bits levels.

    Levels sit at code k/(2^bits - 1), so code 0 and code max reproduce
    eotf(0) and eotf(1) exactly.  The report carries the largest adjacent-
    level luminance ratio and relative step over the positive lattice.
    """
    if not 1 <= int(bits) <= 16:
        raise BadParameter("bits must lie in [1, 16]")
    bits = int(bits)
    nmax = (1 << bits) - 1
    codes = np.rint(tf.oetf(luminances) * nmax).astype(np.uint32)
    levels = tf.eotf(np.arange(nmax + 1, dtype=np.float64) / nmax)
    pos = levels > 0
    ratio = np.float64(1.0)
    if pos.sum() >= 2:
        lp = levels[pos]
        ratio = (lp[1:] / lp[:-1]).max()
    return QuantizationReport(codes, bits, float(ratio), float(ratio) - 1.0)


def dequantize(tf, codes, bits):
    if not 1 <= int(bits) <= 16:
        raise BadParameter("bits must lie in [1, 16]")
    nmax = (1 << int(bits)) - 1
    return tf.eotf(np.asarray(codes, dtype=np.float64) / nmax)
