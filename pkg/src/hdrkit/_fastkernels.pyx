# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the `_kernels_py` reference kernels.

Bit parity contract: same weight tables, same offset walk order, same
multiply-then-add sequence (the build disables fused multiply-add), and an
integer-only range coder.  Keep in lockstep with _kernels_py.py.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

cdef unsigned long long RC_TOP = 1 << 24
cdef unsigned long long RC_BOT = 1 << 16
cdef unsigned long long RC_MASK = 0xFFFFFFFF


def bilateral_rows(double[:, ::1] padded, double[:, ::1] sw, double[::1] rw,
                   double rscale, int radius, double[:, ::1] out, int y0, int y1):
    cdef int r = radius
    cdef Py_ssize_t nbins = rw.shape[0]
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t y, x, dy, dx, q
    cdef double center, win, wt, acc, norm, diff
    with nogil:
        for y in range(y0, y1):
            for x in range(w):
                center = padded[y + r, x + r]
                acc = 0.0
                norm = 0.0
                for dy in range(2 * r + 1):
                    for dx in range(2 * r + 1):
                        win = padded[y + dy, x + dx]
                        diff = win - center
                        if diff < 0.0:
                            diff = -diff
                        q = <Py_ssize_t>(diff * rscale)
                        if q < nbins:
                            wt = sw[dy, dx] * rw[q]
                        else:
                            wt = sw[dy, dx] * 0.0
                        acc = acc + wt * win
                        norm = norm + wt
                out[y, x] = acc / norm


def rc_encode(data, cum):
    cdef const unsigned char[::1] src = np.ascontiguousarray(
        np.frombuffer(data.tobytes() if isinstance(data, np.ndarray) else bytes(data),
                      dtype=np.uint8))
    cdef unsigned int[::1] cb = np.ascontiguousarray(cum, dtype=np.uint32)
    cdef unsigned long long total = cb[256]
    cdef unsigned long long low = 0
    cdef unsigned long long rng = RC_MASK
    cdef unsigned long long r
    cdef Py_ssize_t i, n = src.shape[0]
    cdef int s
    out = bytearray()
    for i in range(n):
        s = src[i]
        r = rng // total
        low = (low + r * cb[s]) & RC_MASK
        rng = r * (cb[s + 1] - cb[s])
        while True:
            if (low ^ ((low + rng) & RC_MASK)) < RC_TOP:
                pass
            elif rng < RC_BOT:
                rng = (0 - low) & (RC_BOT - 1)
            else:
                break
            out.append(<unsigned char>((low >> 24) & 0xFF))
            low = (low << 8) & RC_MASK
            rng = (rng << 8) & RC_MASK
    for i in range(4):
        out.append(<unsigned char>((low >> 24) & 0xFF))
        low = (low << 8) & RC_MASK
    return bytes(out)


def rc_decode(blob, cum, Py_ssize_t n):
    cdef const unsigned char[::1] src = np.frombuffer(bytes(blob), dtype=np.uint8)
    cdef unsigned int[::1] cb = np.ascontiguousarray(cum, dtype=np.uint32)
    cdef unsigned long long total = cb[256]
    cdef unsigned long long low = 0
    cdef unsigned long long rng = RC_MASK
    cdef unsigned long long code = 0
    cdef unsigned long long r, val
    cdef Py_ssize_t pos = 0, blen = src.shape[0], i
    cdef int lo, hi, mid
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.empty(n, dtype=np.uint8)
    for i in range(4):
        code = ((code << 8) | (src[pos] if pos < blen else 0)) & RC_MASK
        pos += 1
    for i in range(n):
        r = rng // total
        val = ((code - low) & RC_MASK) // r
        if val >= total:
            val = total - 1
        # upper_bound(cum, val) - 1: largest s with cum[s] <= val
        lo = 0
        hi = 257
        while lo < hi:
            mid = (lo + hi) // 2
            if cb[mid] <= val:
                lo = mid + 1
            else:
                hi = mid
        lo = lo - 1
        out[i] = <unsigned char>lo
        low = (low + r * cb[lo]) & RC_MASK
        rng = r * (cb[lo + 1] - cb[lo])
        while True:
            if (low ^ ((low + rng) & RC_MASK)) < RC_TOP:
                pass
            elif rng < RC_BOT:
                rng = (0 - low) & (RC_BOT - 1)
            else:
                break
            code = ((code << 8) | (src[pos] if pos < blen else 0)) & RC_MASK
            pos += 1
            low = (low << 8) & RC_MASK
            rng = (rng << 8) & RC_MASK
    return out
