"""Shared synthetic scenes for the test suite.

Camera simulation throughout: exposure x = E * t clipped to [0, 1], encoded
with a power law, rounded to 8 bits.  Radiance fields are interpolated
low-resolution noise so they are smooth at pixel scale; the octave texture
adds structure at every scale for the alignment tests.
"""

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter, zoom

from hdrkit.core import Calibration, HdrImage


def shoot(radiance, t, gamma=2.2):
    """8-bit camera with a power-law response and hard clipping."""
    expo = np.clip(radiance * t, 0.0, 1.0)
    return np.clip(
        np.rint(255.0 * np.power(expo, 1.0 / gamma)), 0, 255
    ).astype(np.uint8)


def smooth_radiance(rng, size=256, span=500.0, floor=0.2):
    """Smooth positive radiance field covering floor .. floor*span."""
    base = rng.uniform(0.0, 1.0, (size // 8, size // 8, 3))
    scene = gaussian_filter(zoom(base, (8, 8, 1), order=1), (3, 3, 0))
    return floor * np.power(span, scene)


def octave_texture(rng, size=128):
    """Noise field with contrast at every octave from 8 px up.

    Pure low-frequency scenes defeat coarse-to-fine bitmap alignment (the
    decimated levels go featureless), so alignment tests need energy at the
    coarse levels too.
    """
    acc = np.zeros((size, size))
    amp, cell, total = 1.0, 8, 0.0
    while cell <= size:
        layer = zoom(rng.uniform(0.0, 1.0, (cell, cell)), size / cell, order=1)
        acc += amp * layer[:size, :size]
        total += amp
        amp *= 0.6
        cell *= 2
    return acc / total


@pytest.fixture(scope="session")
def merge_oracle():
    """The 256x256 three-exposure reference stack with known ground truth."""
    rng = np.random.default_rng(42)
    radiance = smooth_radiance(rng)
    times = np.array([0.01, 0.04, 0.16])
    frames = [shoot(radiance, t) for t in times]
    return {"radiance": radiance, "times": times, "frames": frames}


@pytest.fixture(scope="session")
def hdr_corpus():
    """Mixed image corpus: smooth scenes plus codec stress cases."""
    rng = np.random.default_rng(11)
    corpus = [
        HdrImage(smooth_radiance(np.random.default_rng(s), size=64),
                 Calibration.ABSOLUTE if s % 2 else Calibration.RELATIVE)
        for s in (1, 2, 3)
    ]
    corpus.append(HdrImage(np.zeros((8, 8, 3))))
    corpus.append(HdrImage(np.full((5, 9, 3), 7.5)))
    spike = np.full((16, 16, 3), 0.01)
    spike[7, 11] = (4000.0, 9000.0, 2500.0)
    corpus.append(HdrImage(spike, Calibration.ABSOLUTE))
    corpus.append(HdrImage(rng.uniform(0.0, 100.0, (11, 13, 3))))
    neg = rng.uniform(0.05, 2.0, (6, 10, 3))
    neg[1, 2, 0] = -0.25
    corpus.append(HdrImage(neg, allow_negative=True))
    corpus.append(HdrImage(np.full((1, 1, 3), 1.0)))
    return corpus


@pytest.fixture(scope="session")
def natural_images():
    """Smooth positive scenes only, for statistics that assume natural images."""
    return [
        HdrImage(smooth_radiance(np.random.default_rng(s), size=96))
        for s in (21, 22, 23, 24)
    ]
