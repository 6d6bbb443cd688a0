"""File codecs: Radiance HDR (.hdr/.pic), PFM, and binary PPM.

All codecs are pure bytes <-> image transforms; path-based helpers sit on
top.  Readers are defensive: every malformed input raises a typed
``FormatError`` carrying the byte offset, never an unchecked exception, and
declared dimensions are sanity-capped before any allocation.
"""

import numpy as np

from . import core
from .core import Calibration, HdrImage, SdrImage
from .encodings import rgbe_decode_array, rgbe_encode_array
from .errors import (
    BadScale,
    CorruptRle,
    NotPfm,
    NotRadiance,
    TruncatedFile,
    UnsupportedMaxval,
    UnsupportedVariant,
)

# Caps keep fuzzed headers from triggering giant allocations.
_MAX_DIM = 1 << 20
_MAX_PIXELS = 1 << 26


def _check_dims(w, h, exc, offset):
    if not (1 <= w <= _MAX_DIM and 1 <= h <= _MAX_DIM and w * h <= _MAX_PIXELS):
        raise exc(f"implausible dimensions {w}x{h}", offset=offset)


# ---------------------------------------------------------------------------
# Radiance HDR
# ---------------------------------------------------------------------------

def read_hdr(data, cs=core.REC709):
    """Parse a Radiance picture into an HdrImage.

    Flat and adaptive-RLE scanlines are both handled; XYZE files are converted
    to RGB through `cs`.  EXPOSURE lines multiply the decoded samples, and
    repeated lines accumulate multiplicatively.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise NotRadiance("expected a byte buffer")
    buf = bytes(data)
    if not buf.startswith(b"#?"):
        raise NotRadiance("missing #? signature", offset=0)

    pos = 0
    fmt = None
    exposure = 1.0
    resolution = None
    while True:
        end = buf.find(b"\n", pos)
        if end < 0:
            raise TruncatedFile("header never ends", offset=pos)
        line = buf[pos:end]
        linestart = pos
        pos = end + 1
        if linestart == 0:
            continue  # the signature line itself
        if line.strip() == b"":
            # blank line closes the variable section; resolution line follows
            rend = buf.find(b"\n", pos)
            if rend < 0:
                raise TruncatedFile("missing resolution line", offset=pos)
            resolution = buf[pos:rend]
            res_offset = pos
            pos = rend + 1
            break
        if line.startswith(b"#"):
            continue
        if b"=" in line:
            key, _, value = line.partition(b"=")
            key = key.strip().upper()
            if key == b"FORMAT":
                fmt = value.strip()
            elif key == b"EXPOSURE":
                try:
                    exposure *= float(value.strip())
                except ValueError:
                    raise NotRadiance(f"bad EXPOSURE value {value!r}", offset=linestart)
        # unknown variables are allowed and ignored

    if fmt not in (b"32-bit_rle_rgbe", b"32-bit_rle_xyze"):
        raise NotRadiance(f"unsupported or missing FORMAT {fmt!r}", offset=0)

    axes = _parse_resolution(resolution, res_offset)
    (sign1, letter1, n1), (sign2, letter2, n2) = axes
    _check_dims(n2, n1, NotRadiance, res_offset)

    raster = np.empty((n1, n2, 4), dtype=np.uint8)
    for row in range(n1):
        pos = _read_scanline(buf, pos, raster[row])

    arr = rgbe_decode_array(raster)

    # normalize orientation to row-major top-left
    if letter1 == "X":
        arr = arr.transpose(1, 0, 2)
        axes = [axes[1], axes[0]]
    if axes[0][0] == "+":  # +Y scanline order runs bottom-up
        arr = arr[::-1]
    if axes[1][0] == "-":
        arr = arr[:, ::-1]

    if exposure != 1.0:
        arr = arr * exposure

    if fmt == b"32-bit_rle_xyze":
        img = HdrImage(np.ascontiguousarray(arr), Calibration.RELATIVE, allow_negative=True)
        return core.xyz_to_rgb(img, cs)
    return HdrImage(np.ascontiguousarray(arr), Calibration.RELATIVE)


def _parse_resolution(line, offset):
    tokens = line.split()
    if len(tokens) != 4:
        raise NotRadiance(f"bad resolution line {line!r}", offset=offset)
    axes = []
    for spec, count in ((tokens[0], tokens[1]), (tokens[2], tokens[3])):
        spec = spec.decode("ascii", "replace")
        if len(spec) != 2 or spec[0] not in "+-" or spec[1] not in "XY":
            raise NotRadiance(f"bad axis spec {spec!r}", offset=offset)
        try:
            n = int(count)
        except ValueError:
            raise NotRadiance(f"bad axis length {count!r}", offset=offset)
        if n <= 0:
            raise NotRadiance(f"non-positive axis length {n}", offset=offset)
        axes.append((spec[0], spec[1], n))
    if {axes[0][1], axes[1][1]} != {"X", "Y"}:
        raise NotRadiance("resolution line must name both X and Y", offset=offset)
    return axes


def _read_scanline(buf, pos, out):
    """Decode one scanline (flat or adaptive RLE) into out (width, 4) uint8."""
    width = out.shape[0]
    header = buf[pos:pos + 4]
    if len(header) < 4:
        raise TruncatedFile("scanline header cut short", offset=pos)
    if header[0] == 2 and header[1] == 2 and header[2] & 0x80 == 0:
        declared = (header[2] << 8) | header[3]
        if declared != width:
            raise CorruptRle(
                f"adaptive scanline declares width {declared}, expected {width}", offset=pos
            )
        pos += 4
        for comp in range(4):
            filled = 0
            while filled < width:
                if pos >= len(buf):
                    raise TruncatedFile("RLE data cut short", offset=pos)
                count = buf[pos]
                pos += 1
                if count > 128:  # run of one repeated byte
                    run = count - 128
                    if filled + run > width:
                        raise CorruptRle("run overruns scanline", offset=pos - 1)
                    if pos >= len(buf):
                        raise TruncatedFile("run value missing", offset=pos)
                    out[filled:filled + run, comp] = buf[pos]
                    pos += 1
                    filled += run
                elif count > 0:  # literal block
                    if filled + count > width:
                        raise CorruptRle("literal overruns scanline", offset=pos - 1)
                    chunk = buf[pos:pos + count]
                    if len(chunk) < count:
                        raise TruncatedFile("literal block cut short", offset=pos)
                    out[filled:filled + count, comp] = np.frombuffer(chunk, dtype=np.uint8)
                    pos += count
                    filled += count
                else:
                    raise CorruptRle("zero-length RLE block", offset=pos - 1)
        return pos
    # flat scanline: width RGBE tuples verbatim
    need = width * 4
    chunk = buf[pos:pos + need]
    if len(chunk) < need:
        raise TruncatedFile("flat scanline cut short", offset=pos)
    out[:] = np.frombuffer(chunk, dtype=np.uint8).reshape(width, 4)
    return pos + need


def write_hdr(img, use_rle=True, fmt="rgbe", cs=core.REC709):
    """Serialize an HdrImage as a Radiance picture.

    Writer output is canonical: -Y h +X w orientation, no EXPOSURE line.
    ``fmt`` may be "rgbe" (requires non-negative samples) or "xyze".
    """
    if fmt not in ("rgbe", "xyze"):
        raise UnsupportedVariant(f"unknown Radiance sub-format {fmt!r}")
    data = img.data
    if fmt == "xyze":
        data = core.rgb_to_xyz(img, cs).data
        data = np.maximum(data, 0.0)  # physical colors only; tiny negatives clamp
    pixels = rgbe_encode_array(data)
    h, w = pixels.shape[:2]
    head = (
        b"#?RADIANCE\n"
        b"FORMAT=32-bit_rle_" + (b"rgbe" if fmt == "rgbe" else b"xyze") + b"\n"
        b"\n"
        + f"-Y {h} +X {w}\n".encode("ascii")
    )
    chunks = [head]
    rle_ok = use_rle and 8 <= w <= 0x7FFF
    for row in range(h):
        if rle_ok:
            chunks.append(_write_rle_scanline(pixels[row]))
        else:
            chunks.append(pixels[row].tobytes())
    return b"".join(chunks)


def _write_rle_scanline(row):
    width = row.shape[0]
    parts = [bytes((2, 2, width >> 8, width & 0xFF))]
    for comp in range(4):
        col = row[:, comp]
        parts.append(_rle_component(col))
    return b"".join(parts)


def _rle_component(col):
    """Radiance component RLE: runs >= 4 as (128+n, byte), literals <= 128."""
    out = bytearray()
    n = len(col)
    lit_start = 0
    i = 0
    col_b = col.tobytes()
    while i < n:
        run_end = i + 1
        while run_end < n and col_b[run_end] == col_b[i]:
            run_end += 1
        run = run_end - i
        if run >= 4:
            j = lit_start
            while j < i:  # flush pending literals
                take = min(128, i - j)
                out.append(take)
                out += col_b[j:j + take]
                j += take
            while run > 0:
                take = min(127, run)
                out.append(128 + take)
                out.append(col_b[i])
                run -= take
            i = run_end
            lit_start = i
        else:
            i = run_end
    j = lit_start
    while j < n:
        take = min(128, n - j)
        out.append(take)
        out += col_b[j:j + take]
        j += take
    return bytes(out)


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------

def _pfm_token(buf, pos):
    while pos < len(buf) and buf[pos:pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(buf) and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise TruncatedFile("PFM header cut short", offset=start)
    return buf[start:pos], pos


def read_pfm(data):
    """Parse a PFM buffer; grayscale Pf expands to R=G=B.

    The magnitude of the scale factor multiplies the samples (it carries the
    file's calibration), its sign selects endianness.  Rows are stored
    bottom-to-top and flipped to our top-left layout.
    """
    buf = bytes(data)
    magic, pos = _pfm_token(buf, 0) if len(buf) >= 2 else (b"", 0)
    if magic not in (b"PF", b"Pf"):
        raise NotPfm(f"bad magic {magic!r}", offset=0)
    color = magic == b"PF"
    try:
        wtok, pos = _pfm_token(buf, pos)
        htok, pos = _pfm_token(buf, pos)
        stok, pos = _pfm_token(buf, pos)
    except TruncatedFile:
        raise
    try:
        w, h = int(wtok), int(htok)
        scale = float(stok)
    except ValueError:
        raise NotPfm("malformed header numbers", offset=pos)
    _check_dims(w, h, NotPfm, pos)
    if scale == 0:
        raise BadScale("scale factor must be nonzero", offset=pos)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise NotPfm("missing whitespace before binary payload", offset=pos)
    pos += 1  # exactly one whitespace byte separates header and payload

    nchan = 3 if color else 1
    need = w * h * nchan * 4
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise TruncatedFile(
            f"payload needs {need} bytes, found {len(payload)}", offset=pos
        )
    dt = "<f4" if scale < 0 else ">f4"
    with np.errstate(invalid="ignore"):  # garbage payload bits surface as NonFiniteSample below
        arr = np.frombuffer(payload, dtype=dt).reshape(h, w, nchan).astype(np.float64)
    arr = arr[::-1]  # bottom-to-top storage
    if not color:
        arr = np.repeat(arr, 3, axis=2)
    if abs(scale) != 1.0:
        arr = arr * abs(scale)
    return HdrImage(np.ascontiguousarray(arr), Calibration.RELATIVE, allow_negative=True)


def write_pfm(img, little_endian=True):
    """Serialize as color PF, scale +-1.0; bit-exact for float32 samples."""
    h, w = img.height, img.width
    scale = -1.0 if little_endian else 1.0
    header = f"PF\n{w} {h}\n{scale:.1f}\n".encode("ascii")
    data = img.data[::-1].astype("<f4" if little_endian else ">f4")
    return header + data.tobytes()


# ---------------------------------------------------------------------------
# PPM (binary P6, maxval 255)
# ---------------------------------------------------------------------------

def _pnm_token(buf, pos):
    # whitespace and '#' comments may precede any token
    while pos < len(buf):
        c = buf[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = buf.find(b"\n", pos)
            if nl < 0:
                raise TruncatedFile("comment never ends", offset=pos)
            pos = nl + 1
        else:
            break
    start = pos
    while pos < len(buf) and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise TruncatedFile("PPM header cut short", offset=start)
    return buf[start:pos], pos


def read_ppm(data, transfer_tag="srgb"):
    buf = bytes(data)
    if buf[:2] == b"P3":
        raise UnsupportedVariant("ASCII PPM (P3) is not supported", offset=0)
    if buf[:2] != b"P6":
        raise UnsupportedVariant(f"not a binary PPM: {buf[:2]!r}", offset=0)
    pos = 2
    try:
        wtok, pos = _pnm_token(buf, pos)
        htok, pos = _pnm_token(buf, pos)
        mtok, pos = _pnm_token(buf, pos)
    except TruncatedFile:
        raise
    try:
        w, h, maxval = int(wtok), int(htok), int(mtok)
    except ValueError:
        raise UnsupportedVariant("malformed header numbers", offset=pos)
    _check_dims(w, h, UnsupportedVariant, pos)
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval}, only 255 supported", offset=pos)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise TruncatedFile("missing whitespace before binary payload", offset=pos)
    pos += 1
    need = w * h * 3
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise TruncatedFile(f"payload needs {need} bytes, found {len(payload)}", offset=pos)
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    return SdrImage(arr.copy(), transfer_tag)


def write_ppm(sdr):
    h, w = sdr.height, sdr.width
    return f"P6\n{w} {h}\n255\n".encode("ascii") + sdr.data.tobytes()


# ---------------------------------------------------------------------------
# path helpers
# ---------------------------------------------------------------------------

HDR_EXTENSIONS = (".hdr", ".pic")


def sniff_kind(path):
    p = str(path).lower()
    if p.endswith(HDR_EXTENSIONS):
        return "hdr"
    if p.endswith(".pfm"):
        return "pfm"
    if p.endswith(".ppm"):
        return "ppm"
    if p.endswith(".hdrl"):
        return "hdrl"
    return None


def load(path, kind=None):
    """Read a file into an HdrImage or SdrImage based on extension."""
    kind = kind or sniff_kind(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if kind == "hdr":
        return read_hdr(data)
    if kind == "pfm":
        return read_pfm(data)
    if kind == "ppm":
        return read_ppm(data)
    raise UnsupportedVariant(f"cannot infer format of {path!r}")


def dump(img, kind, **opts):
    """Serialize an image for the given format name."""
    if kind == "hdr":
        return write_hdr(img, **opts)
    if kind == "pfm":
        return write_pfm(img, **opts)
    if kind == "ppm":
        return write_ppm(img)
    raise UnsupportedVariant(f"unknown format {kind!r}")
