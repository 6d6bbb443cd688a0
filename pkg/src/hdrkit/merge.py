"""Multi-exposure HDR assembly: alignment, response recovery, weighted merge.

The pipeline expects a stack of differently exposed 8-bit frames of a static
scene.  `align_global` removes integer camera translation, `estimate_response`
fits the log camera response g over the 256 code values, and `merge` averages
per-pixel log radiance with code-dependent weights.
"""

import warnings

import numpy as np

from .core import Calibration, HdrImage, SdrImage
from .errors import AlignmentUnreliable, BadParameter, InsufficientSamples, ShapeMismatch


class WeightFunction:
    """256-entry code weighting in [0,1]; w(0) = w(255) = 0 so clipped codes drop out."""

    def __init__(self, table):
        t = np.asarray(table, dtype=np.float64)
        if t.shape != (256,):
            raise BadParameter("weight table must have 256 entries")
        if t[0] != 0 or t[255] != 0:
            raise BadParameter("w(0) and w(255) must be zero")
        if (t < 0).any() or (t > 1).any():
            raise BadParameter("weights must lie in [0,1]")
        if (t[1:255] <= 0).any():
            raise BadParameter("interior weights must be positive")
        self.table = t
        self.table.setflags(write=False)

    @classmethod
    def hat(cls):
        z = np.arange(256, dtype=np.float64)
        mid = 127.5
        t = np.where(z <= 127, z / mid, (255.0 - z) / mid)
        return cls(t)


class ResponseCurve:
    """g(z): log radiance that produces code z at unit exposure; g(128) = 0."""

    def __init__(self, values, lam=20.0):
        g = np.asarray(values, dtype=np.float64)
        if g.shape != (256,):
            raise BadParameter("response curve must have 256 entries")
        if (np.diff(g) < 0).any():
            raise BadParameter("response curve must be monotone non-decreasing")
        if g[128] != 0.0:
            raise BadParameter("response curve must be pivoted at g(128) = 0")
        self.values = g
        self.values.setflags(write=False)
        self.lam = float(lam)

    @classmethod
    def linear(cls):
        """g(z) = ln(z/255); code 0 copies code 1 to stay finite (w(0)=0 hides it)."""
        z = np.arange(256, dtype=np.float64)
        g = np.empty(256)
        g[1:] = np.log(z[1:] / 255.0)
        g[0] = g[1]
        g -= g[128]
        g[128] = 0.0
        return cls(g)

    @property
    def strictly_monotone(self):
        return bool((np.diff(self.values) > 0).all())

    def to_text(self):
        """256 lines, one shortest-roundtrip float per line."""
        return "".join(f"{float(v)!r}\n" for v in self.values)

    def save(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="ascii") as fh:
                vals = [float(line) for line in fh if line.strip()]
        except (ValueError, UnicodeDecodeError) as exc:
            raise BadParameter(f"{path}: not a response curve file: {exc}")
        return cls(np.asarray(vals))


class ExposureStack:
    """Frames plus exposure times t_j; carries a per-frame validity mask.

    Frames may be SdrImage, uint8, or uint16 arrays (uint16 is right-shifted
    to 8 bits since the response tables are 256-entry).
    """

    def __init__(self, frames, exposure_times, valid=None):
        if len(frames) < 1:
            raise BadParameter("stack needs at least one frame")
        norm = []
        for f in frames:
            arr = f.data if isinstance(f, SdrImage) else np.asarray(f)
            if arr.ndim != 3 or arr.shape[2] != 3:
                raise ShapeMismatch(f"frame must be (h, w, 3), got {arr.shape}")
            if arr.dtype == np.uint16:
                arr = (arr >> 8).astype(np.uint8)
            elif arr.dtype != np.uint8:
                raise BadParameter(f"frames must be uint8 or uint16, got {arr.dtype}")
            norm.append(arr)
        shape = norm[0].shape
        if any(f.shape != shape for f in norm):
            raise ShapeMismatch("all frames must share dimensions")
        times = np.asarray(exposure_times, dtype=np.float64)
        if times.shape != (len(norm),):
            raise BadParameter("one exposure time per frame required")
        if (times <= 0).any():
            raise BadParameter("exposure times must be positive")
        if len(norm) >= 2 and np.unique(times).size != times.size:
            raise BadParameter("exposure times must be distinct")
        if valid is None:
            valid = [np.ones(shape[:2], dtype=bool) for _ in norm]
        self.frames = norm
        self.exposure_times = times
        self.valid = list(valid)

    @property
    def height(self):
        return self.frames[0].shape[0]

    @property
    def width(self):
        return self.frames[0].shape[1]

    def __len__(self):
        return len(self.frames)


# ---------------------------------------------------------------------------
# global alignment (median-threshold-bitmap pyramid)
# ---------------------------------------------------------------------------

_EXCLUDE_BAND = 4


def _mtb_luma(frame):
    f = frame.astype(np.uint32)
    return ((54 * f[..., 0] + 183 * f[..., 1] + 19 * f[..., 2]) >> 8).astype(np.uint8)


def _pyramid(luma, levels):
    levs = [luma.astype(np.float64)]
    for _ in range(levels - 1):
        prev = levs[-1]
        h, w = prev.shape
        if h < 4 or w < 4:
            break
        levs.append(0.25 * (prev[0:h - h % 2:2, 0:w - w % 2:2]
                            + prev[1::2, 0:w - w % 2:2]
                            + prev[0:h - h % 2:2, 1::2]
                            + prev[1::2, 1::2]))
    return levs


def _bitmaps(level):
    med = np.median(level)
    return level > med, np.abs(level - med) > _EXCLUDE_BAND


def _mtb_shift(ref_luma, tgt_luma, levels):
    """Shift (dx, dy) to apply to tgt so it lines up with ref."""
    # cap depth so the coarsest level keeps at least 8 px on a side
    size = min(ref_luma.shape)
    while levels > 1 and size >> (levels - 1) < 8:
        levels -= 1
    ref_pyr = _pyramid(ref_luma, levels)
    tgt_pyr = _pyramid(tgt_luma, levels)
    depth = min(len(ref_pyr), len(tgt_pyr))
    dx = dy = 0
    best_err = 1.0
    for lev in range(depth - 1, -1, -1):
        rbit, rmask = _bitmaps(ref_pyr[lev])
        tbit, tmask = _bitmaps(tgt_pyr[lev])
        dx *= 2
        dy *= 2
        best = (dx, dy)
        best_err = None
        # inherited shift first, so degenerate ties keep the coarse estimate
        for oy, ox in ((0, 0), (-1, -1), (-1, 0), (-1, 1),
                       (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)):
            cy, cx = dy + oy, dx + ox
            sbit = np.roll(tbit, (cy, cx), axis=(0, 1))
            smask = np.roll(tmask, (cy, cx), axis=(0, 1))
            counted = rmask & smask
            total = np.count_nonzero(counted)
            score = np.count_nonzero((rbit ^ sbit) & counted) / total if total else 1.0
            if best_err is None or score < best_err:
                best_err = score
                best = (cx, cy)
        dx, dy = best
    return dx, dy, best_err


def align_global(stack, levels=6):
    """Translate every frame onto the middle exposure; returns (stack, shifts).

    Shifts are the corrections applied: a frame displaced by (+3, -2) comes
    back as (-3, +2).  Pixels wrapped in from the opposite border are marked
    invalid in the output stack.  Frames that cannot be aligned reliably
    (constant content, or displacement beyond the pyramid reach of
    2^levels - 1) trigger an AlignmentUnreliable warning and keep zero shift.
    """
    if len(stack) < 2:
        raise BadParameter("alignment needs at least two frames")
    order = np.argsort(stack.exposure_times, kind="stable")
    ref_idx = int(order[len(order) // 2])
    ref_luma = _mtb_luma(stack.frames[ref_idx])
    limit = (1 << levels) - 1

    shifts = []
    new_frames = []
    new_valid = []
    for j, frame in enumerate(stack.frames):
        if j == ref_idx:
            shifts.append((0, 0))
            new_frames.append(frame)
            new_valid.append(stack.valid[j])
            continue
        luma = _mtb_luma(frame)
        degenerate = luma.min() == luma.max()
        if degenerate:
            warnings.warn("constant frame, falling back to zero shift", AlignmentUnreliable)
            dx = dy = 0
        else:
            dx, dy, err = _mtb_shift(ref_luma, luma, levels)
            if abs(dx) >= limit or abs(dy) >= limit or err > 0.25:
                warnings.warn(
                    f"alignment unreliable (shift ({dx},{dy}), residual {err:.2f}); "
                    "falling back to zero shift",
                    AlignmentUnreliable,
                )
                dx = dy = 0
        shifts.append((dx, dy))
        rolled = np.roll(frame, (dy, dx), axis=(0, 1))
        vmask = np.roll(stack.valid[j], (dy, dx), axis=(0, 1)).copy()
        h, w = vmask.shape
        if dy > 0:
            vmask[:dy] = False
        elif dy < 0:
            vmask[h + dy:] = False
        if dx > 0:
            vmask[:, :dx] = False
        elif dx < 0:
            vmask[:, w + dx:] = False
        new_frames.append(rolled)
        new_valid.append(vmask)
    out = ExposureStack(new_frames, stack.exposure_times, new_valid)
    return out, shifts


def misalignment_report(shifts):
    """Taxonomy note: only global (camera) translation is corrected here.

    Local object motion and mixed cases are detected upstream in principle but
    not removed; callers can gate on the reported magnitude.
    """
    mags = [abs(dx) + abs(dy) for dx, dy in shifts]
    return {
        "classification": "global" if max(mags, default=0) > 0 else "none",
        "max_shift_l1": max(mags, default=0),
        "corrected": True,
    }


# ---------------------------------------------------------------------------
# response recovery
# ---------------------------------------------------------------------------

def _isotonic_non_decreasing(y):
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    vals = []
    counts = []
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            total = counts[-1] + counts[-2]
            merged = (vals[-1] * counts[-1] + vals[-2] * counts[-2]) / total
            vals.pop(), counts.pop()
            vals[-1] = merged
            counts[-1] = total
    out = np.empty(len(y))
    pos = 0
    for v, c in zip(vals, counts):
        out[pos:pos + c] = v
        pos += c
    return out


def estimate_response(stack, weight=None, lam=20.0, sample_count=512, seed=0):
    """Least-squares fit of g over sampled sites, smoothed and monotonized.

    Sites are drawn deterministically (seeded), stratified over the code range
    of the middle exposure so the fit sees the whole curve.  The green channel
    is used as the reference channel.  Smoothness weight `lam` penalizes the
    second difference of g; the result is projected to be monotone and
    re-pivoted to g(128) = 0.
    """
    if len(stack) < 2:
        raise InsufficientSamples("response estimation needs at least two frames")
    weight = weight or WeightFunction.hat()
    if sample_count < 32:
        raise BadParameter("sample_count too small")
    rng = np.random.default_rng(seed)
    order = np.argsort(stack.exposure_times, kind="stable")
    mid_idx = int(order[len(order) // 2])
    mid_green = stack.frames[mid_idx][..., 1]

    h, w = mid_green.shape
    all_valid = np.ones((h, w), dtype=bool)
    for v in stack.valid:
        all_valid &= v
    flat_codes = mid_green.ravel()
    flat_ok = all_valid.ravel()

    # stratify over 32 code bins of the mid frame
    n_bins = 32
    per_bin = max(1, sample_count // n_bins)
    chosen = []
    for b in range(n_bins):
        lo, hi = b * 8, (b + 1) * 8
        pool = np.flatnonzero((flat_codes >= lo) & (flat_codes < hi) & flat_ok)
        if pool.size == 0:
            continue
        take = min(per_bin, pool.size)
        chosen.append(rng.choice(pool, size=take, replace=False))
    if not chosen:
        raise InsufficientSamples("no usable sample sites")
    sites = np.sort(np.concatenate(chosen))

    n_sites = sites.size
    n_frames = len(stack)
    z = np.stack([f[..., 1].ravel()[sites] for f in stack.frames])  # (frames, sites)
    wz = weight.table[z]
    obs = wz > 0
    n_obs = int(obs.sum())
    if n_obs < 2 * 256:
        raise InsufficientSamples(
            f"{n_obs} weighted observations for 256 + {n_sites} unknowns; need more sites"
        )

    n_unknowns = 256 + n_sites
    rows = n_obs + 254 + 1
    a = np.zeros((rows, n_unknowns))
    b = np.zeros(rows)
    log_t = np.log(stack.exposure_times)
    r = 0
    for j in range(n_frames):
        for i in np.flatnonzero(obs[j]):
            wv = wz[j, i]
            a[r, z[j, i]] = wv
            a[r, 256 + i] = -wv
            b[r] = wv * log_t[j]
            r += 1
    for code in range(1, 255):
        wv = lam * weight.table[code]
        a[r, code - 1] = wv
        a[r, code] = -2.0 * wv
        a[r, code + 1] = wv
        r += 1
    a[r, 128] = 1.0  # pivot
    solution = np.linalg.lstsq(a, b, rcond=None)[0]
    g = solution[:256]
    g = _isotonic_non_decreasing(g)
    g = g - g[128]
    g[128] = 0.0
    return ResponseCurve(g, lam=lam)


# ---------------------------------------------------------------------------
# radiance merge
# ---------------------------------------------------------------------------

def merge(stack, curve=None, weight=None):
    """Weighted log-radiance average; returns (HdrImage, saturation_mask).

    Per pixel and channel, ln E = sum_j w(z_j)(g(z_j) - ln t_j) / sum_j w(z_j).
    Pixels with zero total weight in some channel are flagged in the mask and
    filled from the shortest exposure (bright clip) or the longest (dark clip).
    Frames are processed in exposure-time order, so the result is bit-identical
    under any input frame ordering.
    """
    curve = curve or ResponseCurve.linear()
    weight = weight or WeightFunction.hat()
    order = np.argsort(stack.exposure_times, kind="stable")
    g = curve.values
    wtab = weight.table

    h, w = stack.height, stack.width
    num = np.zeros((h, w, 3))
    den = np.zeros((h, w, 3))
    for j in order:
        z = stack.frames[j]
        wz = wtab[z] * stack.valid[j][..., None]
        num += wz * (g[z] - np.log(stack.exposure_times[j]))
        den += wz
    mask = (den == 0).any(axis=2)

    ln_e = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    radiance = np.exp(ln_e)

    if mask.any():
        shortest = int(order[0])
        longest = int(order[-1])
        zc_short = np.clip(stack.frames[shortest], 1, 255)
        zc_long = np.clip(stack.frames[longest], 1, 255)
        fill_bright = np.exp(g[zc_short] - np.log(stack.exposure_times[shortest]))
        fill_dark = np.exp(g[zc_long] - np.log(stack.exposure_times[longest]))
        bright = stack.frames[shortest].mean(axis=2) >= 128
        fill = np.where(bright[..., None], fill_bright, fill_dark)
        bad = den == 0
        radiance = np.where(bad, fill, radiance)

    img = HdrImage(radiance, Calibration.RELATIVE)
    return img, mask


def load_stack_manifest(path, reader):
    """Parse `path exposure_time_seconds` lines; `reader` maps path -> frame."""
    frames = []
    times = []
    import os.path

    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.rsplit(None, 1)
            if len(parts) != 2:
                raise BadParameter(f"{path}:{lineno}: expected 'path exposure_time'")
            fpath, t = parts
            try:
                t = float(t)
            except ValueError:
                raise BadParameter(f"{path}:{lineno}: bad exposure time {t!r}")
            if not os.path.isabs(fpath):
                fpath = os.path.join(base, fpath)
            frames.append(reader(fpath))
            times.append(t)
    if not frames:
        raise BadParameter(f"{path}: empty stack manifest")
    return ExposureStack(frames, times)
