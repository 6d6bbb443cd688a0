"""Kernel backend selection and the shared setup around the hot loops.

The compiled extension is used when importable; setting HDRKIT_NO_EXT=1 in
the environment forces the numpy fallback.  Both backends are driven through
identical precomputed weight tables and integer state machines, so results
are bit-for-bit equal; `backend_name()` reports which one is live.

Threading note: each output pixel depends only on the read-only padded input,
so splitting rows across workers cannot change any value; results are
identical at every thread count.
"""

import concurrent.futures
import os

import numpy as np

from . import _kernels_py
from .errors import BadParameter

if os.environ.get("HDRKIT_NO_EXT", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _fastkernels as _impl
    except ImportError:
        _impl = _kernels_py


def backend_name():
    return _impl.BACKEND


_RANGE_BINS = 4096
_RANGE_REACH = 6.0  # weights treated as zero beyond 6 sigma


def _bilateral_tables(sigma_spatial, sigma_range, radius):
    span = np.arange(-radius, radius + 1, dtype=np.float64)
    dist2 = span[:, None] ** 2 + span[None, :] ** 2
    sw = np.exp(-0.5 * dist2 / (sigma_spatial * sigma_spatial))
    rscale = _RANGE_BINS / (_RANGE_REACH * sigma_range)
    centers = (np.arange(_RANGE_BINS, dtype=np.float64) + 0.5) / rscale
    rw = np.exp(-0.5 * (centers / sigma_range) ** 2)
    return sw, rw, rscale


def bilateral_filter(image, sigma_spatial, sigma_range, threads=1):
    """Edge-preserving smoothing of a 2-D float64 raster.

    Gaussian spatial window (radius 2.5 sigma, edge-replicated borders) and a
    binned Gaussian range kernel shared by both backends.
    """
    if sigma_spatial <= 0 or sigma_range <= 0:
        raise BadParameter("bilateral sigmas must be positive")
    img = np.ascontiguousarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise BadParameter("bilateral_filter expects a 2-D raster")
    radius = max(1, int(np.ceil(2.5 * sigma_spatial)))
    sw, rw, rscale = _bilateral_tables(sigma_spatial, sigma_range, radius)
    padded = np.pad(img, radius, mode="edge")
    out = np.empty_like(img)
    h = img.shape[0]
    threads = max(1, int(threads))
    if threads == 1 or h < 2 * threads:
        _impl.bilateral_rows(padded, sw, rw, rscale, radius, out, 0, h)
        return out
    bounds = np.linspace(0, h, threads + 1).astype(int)
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_impl.bilateral_rows, padded, sw, rw, rscale, radius, out, y0, y1)
            for y0, y1 in zip(bounds[:-1], bounds[1:])
            if y1 > y0
        ]
        for fut in futures:
            fut.result()
    return out


# ---------------------------------------------------------------------------
# static order-0 entropy coding
# ---------------------------------------------------------------------------

_FREQ_TOTAL_CAP = 0xFFFF


def build_freq_table(data):
    """Scaled byte histogram: every present symbol keeps freq >= 1, total < 2^16."""
    arr = np.frombuffer(bytes(data), dtype=np.uint8) if not isinstance(data, np.ndarray) \
        else data.astype(np.uint8, copy=False)
    counts = np.bincount(arr.ravel(), minlength=256).astype(np.uint64)
    while counts.sum() > _FREQ_TOTAL_CAP:
        counts = (counts + 1) >> 1  # halving keeps nonzero counts nonzero
    freqs = counts.astype(np.uint32)
    return freqs


def freq_to_cum(freqs):
    cum = np.zeros(257, dtype=np.uint32)
    cum[1:] = np.cumsum(freqs, dtype=np.uint64).astype(np.uint32)
    return cum


def rc_pack(data):
    """Entropy-pack a byte string; returns (freq_table_bytes, packed_bytes)."""
    payload = bytes(data) if not isinstance(data, np.ndarray) else data.tobytes()
    freqs = build_freq_table(payload)
    if len(payload) == 0:
        return freqs.astype("<u2").tobytes(), b""
    cum = freq_to_cum(freqs)
    packed = _impl.rc_encode(np.frombuffer(payload, dtype=np.uint8), cum)
    return freqs.astype("<u2").tobytes(), packed


def rc_unpack(freq_bytes, packed, n):
    if len(freq_bytes) != 512:
        raise BadParameter("frequency table must be 512 bytes")
    if n == 0:
        return b""
    freqs = np.frombuffer(freq_bytes, dtype="<u2").astype(np.uint32)
    if freqs.sum() == 0:
        raise BadParameter("empty frequency table for nonempty stream")
    cum = freq_to_cum(freqs)
    return _impl.rc_decode(packed, cum, n).tobytes()
