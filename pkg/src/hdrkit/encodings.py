"""Compact per-pixel HDR encodings: RGBE/XYZE, LogLuv32, IEEE binary16.

Array codecs operate on numpy rasters; thin scalar wrappers mirror them for
single pixels.  Byte layouts: RGBE is 4 bytes in R,G,B,E order; LogLuv32 is a
big-endian 32-bit word with the sign in the MSB; half is standard binary16.
"""

from typing import NamedTuple

import numpy as np

from .errors import NegativeInRgbe, NonFiniteSample, Overflow


class RgbePixel(NamedTuple):
    r_e: int
    g_e: int
    b_e: int
    e: int


class LogLuvPixel(NamedTuple):
    sign: int
    le: int
    ue: int
    ve: int

    def to_word(self):
        return (self.sign << 31) | (self.le << 16) | (self.ue << 8) | self.ve

    @classmethod
    def from_word(cls, word):
        return cls((word >> 31) & 1, (word >> 16) & 0x7FFF, (word >> 8) & 0xFF, word & 0xFF)


# ---------------------------------------------------------------------------
# RGBE / XYZE shared-exponent encoding
#
# A pixel stores 8-bit mantissas for all three components against one shared
# exponent (bias 128), chosen so the largest component's mantissa lands in
# [128, 255].  Mantissas are rounded, not floored: rounding is what keeps the
# roundtrip error within max(component) * 2^-8 for every input.  A mantissa
# that rounds to 256 is clamped to 255; bumping the exponent instead would
# overshoot that bound near the boundary.
# ---------------------------------------------------------------------------

def rgbe_encode_array(data):
    """Encode an (..., 3) non-negative float raster to (..., 4) uint8 RGBE."""
    arr = np.asarray(data, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteSample("RGBE input must be finite")
    if (arr < 0).any():
        raise NegativeInRgbe("RGBE cannot represent negative samples")
    mx = arr.max(axis=-1)
    if (mx > 2.0**127).any():
        raise Overflow("component exceeds 2^127, not representable in RGBE")
    _, exp = np.frexp(mx)
    exp = np.minimum(exp, 127)  # max == 2^127 exactly still fits via the clamp below
    nonzero = mx > 0
    # values below the smallest representable scale collapse to canonical zero
    nonzero &= exp >= -127
    scale = np.power(2.0, (8 - exp) * nonzero)
    mant = np.floor(arr * scale[..., None] + 0.5)
    np.minimum(mant, 255.0, out=mant)
    out = np.empty(arr.shape[:-1] + (4,), dtype=np.uint8)
    out[..., :3] = np.where(nonzero[..., None], mant, 0.0).astype(np.uint8)
    out[..., 3] = np.where(nonzero, exp + 128, 0).astype(np.uint8)
    return out


def rgbe_decode_array(pixels):
    """Decode (..., 4) uint8 RGBE to (..., 3) float64: m/256 * 2^(E-128)."""
    p = np.asarray(pixels, dtype=np.uint8)
    e = p[..., 3].astype(np.int32)
    scale = np.where(e > 0, np.power(2.0, e - 128.0), 0.0)
    return p[..., :3].astype(np.float64) / 256.0 * scale[..., None]


def rgbe_encode(pixel):
    r, g, b, e = rgbe_encode_array(np.asarray(pixel, dtype=np.float64).reshape(1, 3))[0]
    return RgbePixel(int(r), int(g), int(b), int(e))


def rgbe_decode(pixel):
    arr = np.asarray(tuple(pixel), dtype=np.uint8).reshape(1, 4)
    return rgbe_decode_array(arr)[0]


# XYZE is the same codec applied to XYZ triples (which are non-negative by
# construction for physical colors, so wide-gamut RGB survives the detour).
xyze_encode_array = rgbe_encode_array
xyze_decode_array = rgbe_decode_array
xyze_encode = rgbe_encode
xyze_decode = rgbe_decode


# ---------------------------------------------------------------------------
# LogLuv32: log-coded luminance + quantized u'v' chroma
#
# Word layout: 1 sign bit, 15-bit log-luminance code le, then 8-bit ue, ve.
# le = floor(256*(log2 Y + 64)), covering ~5.4e-20 .. 1.8e19 in steps of
# 2^(1/256) (~0.27%); decode returns the step midpoint.  le = 0 is reserved
# for exact zero.  ue = floor(410*u'), decoded at (ue+0.5)/410.
# ---------------------------------------------------------------------------

_LOGLUV_MAX_LE = 0x7FFF


def logluv_encode_array(xyz):
    arr = np.asarray(xyz, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteSample("LogLuv input must be finite")
    x, y, z = arr[..., 0], arr[..., 1], arr[..., 2]
    nonzero = y > 0
    ysafe = np.where(nonzero, y, 1.0)
    le = np.floor(256.0 * (np.log2(ysafe) + 64.0))
    le = np.clip(le, 1, _LOGLUV_MAX_LE).astype(np.uint32)
    denom = x + 15.0 * y + 3.0 * z
    denom = np.where(denom > 0, denom, 1.0)
    up = 4.0 * x / denom
    vp = 9.0 * y / denom
    ue = np.clip(np.floor(410.0 * up), 0, 255).astype(np.uint32)
    ve = np.clip(np.floor(410.0 * vp), 0, 255).astype(np.uint32)
    word = (le << 16) | (ue << 8) | ve
    return np.where(nonzero, word, np.uint32(0))


def logluv_decode_array(words):
    w = np.asarray(words, dtype=np.uint32)
    sign = (w >> 31) & 0x1
    le = (w >> 16) & 0x7FFF
    ue = (w >> 8) & 0xFF
    ve = w & 0xFF
    y = np.where(le > 0, np.power(2.0, (le.astype(np.float64) + 0.5) / 256.0 - 64.0), 0.0)
    y = np.where(sign > 0, -y, y)
    up = (ue.astype(np.float64) + 0.5) / 410.0
    vp = (ve.astype(np.float64) + 0.5) / 410.0
    x = y * 9.0 * up / (4.0 * vp)
    z = y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp)
    out = np.stack([x, y, z], axis=-1)
    return np.where((le > 0)[..., None], out, 0.0)


def logluv_encode(xyz):
    word = int(logluv_encode_array(np.asarray(xyz, dtype=np.float64).reshape(1, 3))[0])
    return LogLuvPixel.from_word(word)


def logluv_decode(pixel):
    word = pixel.to_word() if isinstance(pixel, LogLuvPixel) else int(pixel)
    return logluv_decode_array(np.asarray([word], dtype=np.uint32))[0]


def logluv_to_bytes(words):
    """Serialize a word array big-endian (sign ends up in the first byte's MSB)."""
    return np.asarray(words, dtype=np.uint32).astype(">u4").tobytes()


def logluv_from_bytes(buf):
    return np.frombuffer(buf, dtype=">u4").astype(np.uint32)


# ---------------------------------------------------------------------------
# IEEE binary16 (half float): 1 sign, 5 exponent, 10 mantissa bits
#
# Finite values above 65504 clamp to +-65504.  Infinities and NaNs pass
# through bit-exactly: NaN lanes are moved via integer ops only, so signaling
# NaN payloads survive the f64 detour that would otherwise quieten them.
# ---------------------------------------------------------------------------

HALF_MAX = 65504.0


def half_encode_array(values):
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    bits64 = arr.view(np.uint64)
    exp64 = (bits64 >> 52) & 0x7FF
    is_nan = (exp64 == 0x7FF) & ((bits64 & 0xFFFFFFFFFFFFF) != 0)
    is_inf = (exp64 == 0x7FF) & ~is_nan
    finite = ~(is_nan | is_inf)
    clamped = np.where(finite, np.clip(arr, -HALF_MAX, HALF_MAX), 0.0)
    out = clamped.astype(np.float16).view(np.uint16).copy()
    sign16 = (bits64 >> 48).astype(np.uint16) & 0x8000
    out[is_inf] = sign16[is_inf] | 0x7C00
    nan_mant = ((bits64 >> 42) & 0x3FF).astype(np.uint16)
    out[is_nan] = sign16[is_nan] | 0x7C00 | np.maximum(nan_mant[is_nan], 1)
    return out


def half_decode_array(codes):
    c = np.atleast_1d(np.asarray(codes, dtype=np.uint16))
    is_nan = ((c & 0x7C00) == 0x7C00) & ((c & 0x3FF) != 0)
    safe = np.where(is_nan, np.uint16(0), c)
    out = safe.view(np.float16).astype(np.float64)
    if is_nan.any():
        bits = ((c.astype(np.uint64) & 0x8000) << 48) | (0x7FF << 52) \
            | ((c.astype(np.uint64) & 0x3FF) << 42)
        out64 = out.view(np.uint64)
        out64[is_nan] = bits[is_nan]
    return out


def half_encode(value):
    return int(half_encode_array(np.asarray([value], dtype=np.float64))[0])


def half_decode(code):
    return float(half_decode_array(np.asarray([code], dtype=np.uint16))[0])


def half_encode_image(data):
    """(h, w, 3) float -> (h, w, 3) uint16 codes, vectorized."""
    arr = np.asarray(data, dtype=np.float64)
    return half_encode_array(arr.ravel()).reshape(arr.shape)


def half_decode_image(codes):
    arr = np.asarray(codes, dtype=np.uint16)
    return half_decode_array(arr.ravel()).reshape(arr.shape)
