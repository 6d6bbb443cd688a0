"""Reference numpy implementations of the hot kernels.

The compiled extension (`_fastkernels`) mirrors these bit for bit: the
bilateral accumulation walks window offsets in the same order with the same
multiply-then-add sequence and shares the caller-built weight tables, and the
range coder is integer-only.  Any change here must be made in the .pyx twin.
"""

import numpy as np

BACKEND = "python"

_RC_TOP = 1 << 24
_RC_BOT = 1 << 16
_RC_MASK = 0xFFFFFFFF


def bilateral_rows(padded, sw, rw, rscale, radius, out, y0, y1):
    """Accumulate bilateral-filtered rows [y0, y1) of the unpadded image.

    padded is the edge-replicated input, sw the (2r+1)^2 spatial weights,
    rw the binned range weights indexed by int(|delta| * rscale).
    """
    r = radius
    nbins = rw.shape[0]
    w = out.shape[1]
    rows = y1 - y0
    center = padded[y0 + r:y0 + r + rows, r:r + w]
    acc = np.zeros((rows, w), dtype=np.float64)
    norm = np.zeros((rows, w), dtype=np.float64)
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            win = padded[y0 + dy:y0 + dy + rows, dx:dx + w]
            q = (np.abs(win - center) * rscale).astype(np.int64)
            wt = sw[dy, dx] * np.where(q < nbins, rw[np.minimum(q, nbins - 1)], 0.0)
            acc += wt * win
            norm += wt
    out[y0:y1] = acc / norm


def rc_encode(data, cum):
    """Static order-0 range coder, carryless 32-bit variant.

    cum is the 257-entry cumulative frequency table; cum[-1] (the total) must
    stay below 2^16 so the range never collapses.
    """
    total = int(cum[-1])
    cum_l = [int(x) for x in cum]
    low = 0
    rng = _RC_MASK
    out = bytearray()
    payload = data.tobytes() if isinstance(data, np.ndarray) else bytes(data)
    for s in payload:
        r = rng // total
        low = (low + r * cum_l[s]) & _RC_MASK
        rng = r * (cum_l[s + 1] - cum_l[s])
        while True:
            if (low ^ ((low + rng) & _RC_MASK)) < _RC_TOP:
                pass
            elif rng < _RC_BOT:
                rng = (-low) & (_RC_BOT - 1)
            else:
                break
            out.append((low >> 24) & 0xFF)
            low = (low << 8) & _RC_MASK
            rng = (rng << 8) & _RC_MASK
    for _ in range(4):
        out.append((low >> 24) & 0xFF)
        low = (low << 8) & _RC_MASK
    return bytes(out)


def rc_decode(blob, cum, n):
    total = int(cum[-1])
    cum_arr = np.asarray(cum, dtype=np.uint32)
    cum_l = [int(x) for x in cum]
    low = 0
    rng = _RC_MASK
    code = 0
    pos = 0
    blen = len(blob)
    for _ in range(4):
        code = ((code << 8) | (blob[pos] if pos < blen else 0)) & _RC_MASK
        pos += 1
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        r = rng // total
        val = ((code - low) & _RC_MASK) // r
        if val >= total:
            val = total - 1
        s = int(np.searchsorted(cum_arr, val, side="right")) - 1
        out[i] = s
        low = (low + r * cum_l[s]) & _RC_MASK
        rng = r * (cum_l[s + 1] - cum_l[s])
        while True:
            if (low ^ ((low + rng) & _RC_MASK)) < _RC_TOP:
                pass
            elif rng < _RC_BOT:
                rng = (-low) & (_RC_BOT - 1)
            else:
                break
            code = ((code << 8) | (blob[pos] if pos < blen else 0)) & _RC_MASK
            pos += 1
            low = (low << 8) & _RC_MASK
            rng = (rng << 8) & _RC_MASK
    return out
