"""HDR fidelity indices and a per-band visible-difference classifier.

Scalar metrics: PSNR on perceptually uniform codes, PSNR on log10 luminance,
and SSIM on perceptually uniform codes.  The classifier decomposes both images
into oriented frequency bands and reports, per band and pixel, whether detail
visible in the reference was lost, invisible detail became visible, or
contrast polarity flipped.
"""

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import Calibration, HdrImage, luminance
from .errors import BadParameter, NeedsAbsoluteCalibration, ShapeMismatch
from .transfer import contrast_sensitivity, pu_encode

_LOG_FLOOR = 1e-30
_LOG_PSNR_PEAK = 12.0          # decades of usable simultaneous range
_PU_PEAK_NITS = 10000.0

# classifier constants
_SCALES_CPP = (0.25, 0.125, 0.0625, 0.03125)   # cycles / pixel
_ORIENTS_DEG = (0.0, 45.0, 90.0, 135.0)
_PIX_PER_DEG = 30.0            # assumed viewing geometry
_SIGMA_ON_F = 0.55             # radial log-bandwidth term
_SIGMA_THETA = 0.6             # angular spread, radians
_BASE_CONTRAST_THR = 0.005     # Michelson threshold at peak sensitivity
_ADAPT_REF_NITS = 100.0
_WEIBULL_SLOPE = 3.5


def _check_pair(ref, test):
    if not isinstance(ref, HdrImage) or not isinstance(test, HdrImage):
        raise BadParameter("metrics take HdrImage inputs")
    if ref.data.shape != test.data.shape:
        raise ShapeMismatch(
            f"image shapes differ: {ref.data.shape} vs {test.data.shape}")


def _require_absolute(*images):
    for img in images:
        if img.calibration is not Calibration.ABSOLUTE:
            raise NeedsAbsoluteCalibration(
                "metric is defined on absolute luminance; calibrate the input first")


def calibrate(image, nits):
    """Promote a relative image to absolute by scaling with `nits`."""
    if image.calibration is Calibration.ABSOLUTE:
        return image
    if nits is None or nits <= 0:
        raise BadParameter("a positive nits scale is required")
    return HdrImage(image.data * float(nits), Calibration.ABSOLUTE,
                    allow_negative=image.allow_negative)


def pu_psnr(ref, test):
    """PSNR over perceptually uniform luminance codes; peak is the 10k nit code."""
    _check_pair(ref, test)
    _require_absolute(ref, test)
    pr = pu_encode(luminance(ref))
    pt = pu_encode(luminance(test))
    mse = np.mean((pr - pt) ** 2)
    if mse == 0.0:
        return float("inf")
    peak = pu_encode(_PU_PEAK_NITS)
    return float(20.0 * np.log10(peak / np.sqrt(mse)))


def log_psnr(ref, test):
    """PSNR on log10 luminance with a fixed 12-decade peak.

    Invariant under common rescaling of both inputs, so it accepts relative
    images.
    """
    _check_pair(ref, test)
    lr = np.log10(np.maximum(luminance(ref), _LOG_FLOOR))
    lt = np.log10(np.maximum(luminance(test), _LOG_FLOOR))
    mse = np.mean((lr - lt) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(20.0 * np.log10(_LOG_PSNR_PEAK / np.sqrt(mse)))


def pu_ssim(ref, test, sigma=1.5):
    """SSIM with a Gaussian window on perceptually uniform luminance codes."""
    _check_pair(ref, test)
    _require_absolute(ref, test)
    pr = pu_encode(luminance(ref))
    pt = pu_encode(luminance(test))
    peak = pu_encode(_PU_PEAK_NITS)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_r = gaussian_filter(pr, sigma, mode="reflect")
    mu_t = gaussian_filter(pt, sigma, mode="reflect")
    var_r = gaussian_filter(pr * pr, sigma, mode="reflect") - mu_r * mu_r
    var_t = gaussian_filter(pt * pt, sigma, mode="reflect") - mu_t * mu_t
    cov = gaussian_filter(pr * pt, sigma, mode="reflect") - mu_r * mu_t
    var_r = np.maximum(var_r, 0.0)
    var_t = np.maximum(var_t, 0.0)
    num = (2.0 * mu_r * mu_t + c1) * (2.0 * cov + c2)
    den = (mu_r * mu_r + mu_t * mu_t + c1) * (var_r + var_t + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# oriented band decomposition
# ---------------------------------------------------------------------------

_BANK_CACHE = {}


def _filter_bank(shape):
    """Even-symmetric log-Gabor bank, unit gain at each band center."""
    key = shape
    if key in _BANK_CACHE:
        return _BANK_CACHE[key]
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    f = np.hypot(fy, fx)
    theta = np.arctan2(fy, fx)
    log_f = np.where(f > 0, np.log(np.maximum(f, 1e-12)), 0.0)
    denom_r = 2.0 * np.log(_SIGMA_ON_F) ** 2
    bank = []
    for f0 in _SCALES_CPP:
        radial = np.exp(-((log_f - np.log(f0)) ** 2) / denom_r)
        radial[f == 0] = 0.0
        row = []
        for ang in _ORIENTS_DEG:
            t0 = np.deg2rad(ang)
            # distance on the orientation circle (period pi keeps H(-k)=H(k))
            d = 0.5 * np.abs(np.arctan2(np.sin(2.0 * (theta - t0)),
                                        np.cos(2.0 * (theta - t0))))
            angular = np.exp(-(d * d) / (2.0 * _SIGMA_THETA ** 2))
            row.append(radial * angular)
        bank.append(row)
    if len(_BANK_CACHE) >= 8:
        _BANK_CACHE.pop(next(iter(_BANK_CACHE)))
    _BANK_CACHE[key] = bank
    return bank


def _log_lum(image):
    y = luminance(image)
    pos = y > 0
    if pos.any():
        geo = np.exp(np.mean(np.log(y[pos])))
    else:
        geo = 1.0
    eps = geo * 1e-8
    return np.log10(np.maximum(y, eps)), geo


def band_thresholds(adapt_nits):
    """Per-scale detection threshold in log10-contrast units."""
    f_cpd = np.asarray(_SCALES_CPP) * _PIX_PER_DEG
    a = 2.6 * (0.0192 + 0.114 * f_cpd) * np.exp(-np.power(0.114 * f_cpd, 1.1))
    s_la = contrast_sensitivity(adapt_nits) / contrast_sensitivity(_ADAPT_REF_NITS)
    s_la = max(float(s_la), 1e-6)
    return _BASE_CONTRAST_THR / (np.log(10.0) * a * s_la)


def _detection_probability(amp, thr):
    return 1.0 - np.exp2(-np.power(amp / thr, _WEIBULL_SLOPE))


class DriMap:
    """Per-band change labels: 0 none, 1 loss, 2 amplification, 3 reversal."""

    NONE, LOSS, AMPLIFICATION, REVERSAL = 0, 1, 2, 3
    _NAMES = ("none", "loss", "amplification", "reversal")

    def __init__(self, labels, probability, thresholds, adapt_nits):
        self.labels = labels            # (scales, orients, h, w) uint8
        self.probability = probability  # same shape, float64
        self.scales_cpp = _SCALES_CPP
        self.orientations_deg = _ORIENTS_DEG
        self.thresholds = thresholds
        self.adapt_nits = adapt_nits

    def counts(self):
        flat = self.labels.ravel()
        return {name: int(np.count_nonzero(flat == code))
                for code, name in enumerate(self._NAMES)}

    def fractions(self):
        total = self.labels.size
        return {name: cnt / total for name, cnt in self.counts().items()}


def dri_classify(ref, test):
    """Classify visibility changes per scale, orientation, and pixel.

    Both images are decomposed into oriented log10-luminance contrast bands.
    A band response is `visible` when it exceeds the detection threshold for
    that spatial frequency at the reference adaptation level (the geometric
    mean of the reference luminance).  Labels compare visibility in reference
    versus test; probabilities come from a Weibull psychometric function.
    """
    _check_pair(ref, test)
    _require_absolute(ref, test)
    log_r, geo_r = _log_lum(ref)
    log_t, _ = _log_lum(test)
    h, w = log_r.shape
    bank = _filter_bank((h, w))
    thr = band_thresholds(geo_r)

    fr = np.fft.fft2(log_r)
    ft = np.fft.fft2(log_t)
    n_s, n_o = len(_SCALES_CPP), len(_ORIENTS_DEG)
    labels = np.zeros((n_s, n_o, h, w), dtype=np.uint8)
    prob = np.zeros((n_s, n_o, h, w))
    for si in range(n_s):
        for oi in range(n_o):
            filt = bank[si][oi]
            cr = np.real(np.fft.ifft2(fr * filt))
            ct = np.real(np.fft.ifft2(ft * filt))
            p_r = _detection_probability(np.abs(cr), thr[si])
            p_t = _detection_probability(np.abs(ct), thr[si])
            vis_r = np.abs(cr) >= thr[si]
            vis_t = np.abs(ct) >= thr[si]
            flipped = np.sign(cr) * np.sign(ct) < 0

            lab = np.zeros((h, w), dtype=np.uint8)
            lab[vis_r & ~vis_t] = DriMap.LOSS
            lab[~vis_r & vis_t] = DriMap.AMPLIFICATION
            lab[vis_r & vis_t & flipped] = DriMap.REVERSAL

            p_loss = p_r * (1.0 - p_t)
            p_amp = (1.0 - p_r) * p_t
            p_rev = p_r * p_t * flipped
            p_none = np.clip(1.0 - p_loss - p_amp - p_rev, 0.0, 1.0)
            pm = np.choose(lab, (p_none, p_loss, p_amp, p_rev))
            labels[si, oi] = lab
            prob[si, oi] = pm
    return DriMap(labels, prob, thr, geo_r)


def compare(ref, test, metric, nits=None):
    """Scalar entry point used by the command line; returns a flat dict."""
    if nits is not None:
        ref = calibrate(ref, nits)
        test = calibrate(test, nits)
    if metric == "pu-psnr":
        return {"pu_psnr_db": pu_psnr(ref, test)}
    if metric == "log-psnr":
        return {"log_psnr_db": log_psnr(ref, test)}
    if metric == "pu-ssim":
        return {"pu_ssim": pu_ssim(ref, test)}
    if metric == "dri":
        dm = dri_classify(ref, test)
        out = {f"fraction_{k}": v for k, v in dm.fractions().items()}
        out["adapt_nits"] = dm.adapt_nits
        return out
    raise BadParameter(f"unknown metric {metric!r}")
