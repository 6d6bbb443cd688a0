"""Two-layer HDR coding: an 8-bit viewable base plus a residual extension.

A packed stream starts with a tone-mapped base image any PPM reader can show.
The extension stores what the base lost: either the exact original samples
(lossless) or quantized log-ratio planes (lossy).  A decoder without the
extension logic, or a stream whose extension got truncated, still yields the
base picture.

Stream layout:

    b"HDRL"  u16 version  u32 header_len  header_json  base_ppm  extension

header_json is ASCII JSON with sorted keys.  The two fixed-prefix integers
(version, header length) are little-endian.  The header states the base
layer's byte offset and length, so extracting the viewable image is a plain
byte slice.  Extension planes are PackBits run-length coded, then entropy
coded with a static-table range coder; each plane record in the header gives
the packed byte count so truncation is detectable before decode.
"""

import json
import struct

import numpy as np

from . import formats
from .core import REC709, Calibration, HdrImage, luminance
from .errors import BadParameter, CorruptStream, MissingExtension, ShapeMismatch
from .tonemap import tonemap_global
from .transfer import TransferFunction
from ._kernels import rc_pack, rc_unpack

_MAGIC = b"HDRL"
_VERSION = 1
_EPS = 2.0 ** -16
MODES = ("lossless", "lossy16", "lossy8")


# ---------------------------------------------------------------------------
# PackBits run-length layer
# ---------------------------------------------------------------------------

def _packbits_encode(data):
    """Apple PackBits: control 0..127 = literal run of c+1, 129..255 = repeat
    257-c times, 128 unused.  Repeats are only worth it from length 3 up."""
    arr = np.frombuffer(data, dtype=np.uint8)
    n = arr.size
    if n == 0:
        return b""
    change = np.flatnonzero(arr[1:] != arr[:-1]) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [n])))
    out = bytearray()
    lit_start = None

    def flush_literals(end):
        nonlocal lit_start
        if lit_start is None:
            return
        pos = lit_start
        while pos < end:
            take = min(128, end - pos)
            out.append(take - 1)
            out.extend(arr[pos:pos + take].tobytes())
            pos += take
        lit_start = None

    for s, ln in zip(starts, lengths):
        if ln >= 3:
            flush_literals(s)
            pos = s
            remaining = ln
            while remaining >= 2:
                take = min(128, remaining)
                out.append(257 - take)
                out.append(arr[pos])
                pos += take
                remaining -= take
            if remaining == 1:
                lit_start = pos
        else:
            if lit_start is None:
                lit_start = s
    flush_literals(n)
    return bytes(out)


def _packbits_decode(data, expected, base_offset=0):
    out = bytearray()
    i = 0
    n = len(data)
    while i < n and len(out) < expected:
        c = data[i]
        i += 1
        if c < 128:
            take = c + 1
            if i + take > n:
                raise CorruptStream("literal run past end of plane",
                                    offset=base_offset + i)
            out.extend(data[i:i + take])
            i += take
        elif c == 128:
            continue
        else:
            if i >= n:
                raise CorruptStream("repeat run missing its byte",
                                    offset=base_offset + i)
            out.extend(bytes([data[i]]) * (257 - c))
            i += 1
    if len(out) != expected:
        raise CorruptStream(
            f"plane decoded to {len(out)} bytes, expected {expected}",
            offset=base_offset + i)
    return bytes(out[:expected])


# ---------------------------------------------------------------------------
# plane packing
# ---------------------------------------------------------------------------

def _pack_plane(raw):
    rle = _packbits_encode(raw)
    table, payload = rc_pack(rle)
    return table + payload, len(rle)


def _unpack_plane(blob, rle_len, expected, base_offset):
    if len(blob) < 512:
        raise MissingExtension("extension truncated inside a frequency table",
                               offset=base_offset + len(blob))
    table, payload = blob[:512], blob[512:]
    try:
        rle = rc_unpack(table, payload, rle_len)
    except BadParameter as exc:
        raise CorruptStream(str(exc), offset=base_offset) from exc
    return _packbits_decode(rle, expected, base_offset)


def _shuffle_bytes(arr):
    """Group sample bytes by significance so the entropy coder sees runs."""
    raw = arr.astype("<f8").tobytes()
    return np.frombuffer(raw, dtype=np.uint8).reshape(-1, 8).T.tobytes()


def _unshuffle_bytes(raw, count):
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(8, count).T
    return np.frombuffer(np.ascontiguousarray(arr).tobytes(), dtype="<f8").copy()


def _quantize_plane(vals, bits):
    lo = float(vals.min())
    hi = float(vals.max())
    levels = (1 << bits) - 1
    if hi > lo:
        step = (hi - lo) / levels
        q = np.rint((vals - lo) / step)
    else:
        step = 0.0
        q = np.zeros_like(vals)
    dtype = np.uint8 if bits <= 8 else "<u2"
    return q.astype(dtype), lo, step


def _dequantize_plane(q, lo, step):
    return q.astype(np.float64) * step + lo


# ---------------------------------------------------------------------------
# container
# ---------------------------------------------------------------------------

def pack_bytes(image, mode="lossy16"):
    """Encode an HdrImage into the layered stream; returns bytes."""
    if mode not in MODES:
        raise BadParameter(f"unknown mode {mode!r}; pick one of {MODES}")
    if not isinstance(image, HdrImage):
        raise BadParameter("pack takes an HdrImage")
    sdr = tonemap_global(image).finish().sdr
    base = formats.write_ppm(sdr)
    h, w = image.height, image.width
    count = h * w

    planes = []
    blobs = []
    if mode == "lossless":
        raw = _shuffle_bytes(image.data)
        blob, rle_len = _pack_plane(raw)
        planes.append({"name": "samples", "kind": "f8-shuffled",
                       "raw_len": len(raw), "rle_len": rle_len,
                       "packed_len": len(blob)})
        blobs.append(blob)
    else:
        bits = 16 if mode == "lossy16" else 8
        tf = TransferFunction.srgb()
        base_lin = tf.eotf(sdr.data.astype(np.float64) / 255.0)
        yb = luminance(base_lin)
        y = luminance(image)
        r = np.log2((y + _EPS) / (yb + _EPS))
        cr = np.log2((image.data[..., 0] + _EPS) / (y + _EPS))
        cb = np.log2((image.data[..., 2] + _EPS) / (y + _EPS))
        for name, vals in (("log_ratio", r), ("chroma_r", cr), ("chroma_b", cb)):
            q, lo, step = _quantize_plane(vals, bits)
            blob, rle_len = _pack_plane(q.tobytes())
            planes.append({"name": name, "kind": "quantized",
                           "bits": bits, "min": lo, "step": step,
                           "bound_factor": float(2.0 ** (step / 2.0)),
                           "raw_len": count * (1 if bits <= 8 else 2),
                           "rle_len": rle_len, "packed_len": len(blob)})
            blobs.append(blob)

    header = {
        "calibration": image.calibration.value,
        "allow_negative": bool(image.allow_negative),
        "base_len": len(base),
        "base_offset": 0,
        "epsilon": _EPS,
        "height": h,
        "mode": mode,
        "planes": planes,
        "width": w,
    }
    # base_offset depends on the serialized header length; iterate to fixed point
    for _ in range(4):
        hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii")
        offset = 10 + len(hjson)
        if header["base_offset"] == offset:
            break
        header["base_offset"] = offset
    head = _MAGIC + struct.pack("<HI", _VERSION, len(hjson))
    return head + hjson + base + b"".join(blobs)


def pack(image, path, mode="lossy16"):
    data = pack_bytes(image, mode)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def _parse_container(data):
    if len(data) < 10 or data[:4] != _MAGIC:
        raise CorruptStream("not a layered stream (bad magic)", offset=0)
    version, hlen = struct.unpack("<HI", data[4:10])
    if version != _VERSION:
        raise CorruptStream(f"unsupported stream version {version}", offset=4)
    if len(data) < 10 + hlen:
        raise CorruptStream("header truncated", offset=len(data))
    try:
        header = json.loads(data[10:10 + hlen].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptStream(f"bad header: {exc}", offset=10) from exc
    base_start = 10 + hlen
    base_len = int(header["base_len"])
    if len(data) < base_start + base_len:
        raise CorruptStream("base image truncated", offset=len(data))
    base = data[base_start:base_start + base_len]
    return header, base, base_start + base_len


def read_base_bytes(data):
    """Decode only the viewable base layer; ignores the extension entirely."""
    header, base, _ = _parse_container(data)
    return formats.read_ppm(base)


def read_base(path):
    with open(path, "rb") as fh:
        return read_base_bytes(fh.read())


def unpack_bytes(data):
    """Full decode; raises MissingExtension (base still readable) on truncation."""
    header, base, ext_start = _parse_container(data)
    mode = header["mode"]
    h, w = int(header["height"]), int(header["width"])
    count = h * w
    calibration = Calibration(header["calibration"])
    allow_negative = bool(header.get("allow_negative", False))

    decoded = []
    pos = ext_start
    for plane in header["planes"]:
        packed_len = int(plane["packed_len"])
        if len(data) < pos + packed_len:
            raise MissingExtension(
                f"extension plane {plane['name']!r} truncated", offset=len(data))
        blob = data[pos:pos + packed_len]
        raw = _unpack_plane(blob, int(plane["rle_len"]), int(plane["raw_len"]), pos)
        decoded.append(raw)
        pos += packed_len

    if mode == "lossless":
        if len(decoded[0]) != count * 3 * 8:
            raise CorruptStream(
                f"extension holds {len(decoded[0])} sample bytes for a "
                f"{w}x{h} raster", offset=ext_start)
        samples = _unshuffle_bytes(decoded[0], count * 3)
        out = samples.reshape(h, w, 3)
        return HdrImage(out, calibration, allow_negative=allow_negative)

    bits = int(header["planes"][0]["bits"])
    dtype = np.uint8 if bits <= 8 else "<u2"
    vals = []
    for plane, raw in zip(header["planes"], decoded):
        q = np.frombuffer(raw, dtype=dtype).reshape(h, w)
        vals.append(_dequantize_plane(q, float(plane["min"]), float(plane["step"])))
    r, cr, cb = vals

    sdr = formats.read_ppm(base)
    if (sdr.height, sdr.width) != (h, w):
        raise CorruptStream(
            f"base layer is {sdr.width}x{sdr.height} but header says {w}x{h}",
            offset=10)
    tf = TransferFunction.srgb()
    base_lin = tf.eotf(sdr.data.astype(np.float64) / 255.0)
    yb = luminance(base_lin)
    y = np.exp2(r) * (yb + _EPS) - _EPS
    y = np.maximum(y, 0.0)
    red = np.exp2(cr) * (y + _EPS) - _EPS
    blue = np.exp2(cb) * (y + _EPS) - _EPS
    wr, wg, wb = REC709.weights
    green = (y - wr * red - wb * blue) / wg
    out = np.stack([red, green, blue], axis=-1)
    out = np.maximum(out, 0.0)
    return HdrImage(out, calibration)


def unpack(path):
    with open(path, "rb") as fh:
        return unpack_bytes(fh.read())


def stream_info(data):
    """Header dict plus derived facts; used by the info subcommand."""
    header, base, ext_start = _parse_container(data)
    ext_bytes = sum(int(p["packed_len"]) for p in header["planes"])
    complete = len(data) >= ext_start + ext_bytes
    return {
        "mode": header["mode"],
        "width": header["width"],
        "height": header["height"],
        "calibration": header["calibration"],
        "base_bytes": len(base),
        "extension_bytes": ext_bytes,
        "extension_complete": complete,
        "planes": [p["name"] for p in header["planes"]],
    }


# ---------------------------------------------------------------------------
# residual-transform entropy accounting
# ---------------------------------------------------------------------------

def _entropy_bits(q):
    _, counts = np.unique(q, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def decorrelation_gain(image, bits=12):
    """Entropy of direct log luminance versus the base-given residual.

    direct   = quantized log2 luminance of the input;
    residual = quantized log2 ratio against the linearized base layer the
    packer would produce.  Both use the same step, derived from the direct
    range, so the numbers are comparable.  The base predicts structured
    content well (residual entropy drops); it cannot predict independent
    noise (gain near zero).
    """
    if not isinstance(image, HdrImage):
        raise BadParameter("decorrelation_gain takes an HdrImage")
    if not 1 <= bits <= 16:
        raise BadParameter("bits must lie in [1, 16]")
    sdr = tonemap_global(image).finish().sdr
    tf = TransferFunction.srgb()
    yb = luminance(tf.eotf(sdr.data.astype(np.float64) / 255.0))
    y = luminance(image)
    direct = np.log2(y + _EPS)
    residual = np.log2((y + _EPS) / (yb + _EPS))
    lo, hi = float(direct.min()), float(direct.max())
    step = (hi - lo) / ((1 << bits) - 1) if hi > lo else 1.0

    def quant(v):
        return np.rint((v - v.min()) / step).astype(np.int64)

    h_direct = _entropy_bits(quant(direct))
    h_resid = _entropy_bits(quant(residual))
    return {
        "direct_bits": h_direct,
        "residual_bits": h_resid,
        "gain_bits": h_direct - h_resid,
    }
