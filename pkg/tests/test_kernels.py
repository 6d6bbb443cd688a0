"""Backend parity for the hot kernels.

The compiled extension and the numpy fallback share their weight tables and
integer coder state, so outputs must match bit for bit, not just to rounding.
"""

import subprocess
import sys

import numpy as np
import pytest

from hdrkit import _kernels
from hdrkit._kernels import (
    backend_name,
    bilateral_filter,
    build_freq_table,
    freq_to_cum,
    rc_pack,
    rc_unpack,
)
from hdrkit._kernels_py import BACKEND as PY_BACKEND
from hdrkit.errors import BadParameter

HAVE_EXT = backend_name() != PY_BACKEND


class TestBilateral:
    def test_constant_field_fixed_point(self):
        img = np.full((20, 20), 3.5)
        out = bilateral_filter(img, 2.0, 0.1)
        np.testing.assert_allclose(out, 3.5, rtol=1e-12)

    def test_smoothing_reduces_noise_variance(self):
        rng = np.random.default_rng(0)
        img = 1.0 + 0.01 * rng.standard_normal((40, 40))
        out = bilateral_filter(img, 2.0, 0.5)
        assert out.var() < img.var() / 4

    def test_edge_preserved(self):
        """A step much larger than sigma_range must survive almost intact."""
        img = np.zeros((24, 24))
        img[:, 12:] = 10.0
        out = bilateral_filter(img, 3.0, 0.2)
        assert abs(out[12, 11] - 0.0) < 0.01
        assert abs(out[12, 12] - 10.0) < 0.01

    def test_thread_count_bit_invariance(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (37, 53))
        base = bilateral_filter(img, 2.5, 0.15, threads=1)
        for threads in (2, 3, 8):
            out = bilateral_filter(img, 2.5, 0.15, threads=threads)
            assert np.array_equal(out, base), f"threads={threads} diverged"

    def test_rejects_bad_sigmas(self):
        with pytest.raises(BadParameter):
            bilateral_filter(np.zeros((4, 4)), 0.0, 0.1)
        with pytest.raises(BadParameter):
            bilateral_filter(np.zeros((4, 4)), 1.0, -1.0)

    def test_rejects_non_2d(self):
        with pytest.raises(BadParameter):
            bilateral_filter(np.zeros((4, 4, 3)), 1.0, 0.1)

    @pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
    def test_backend_bit_parity(self):
        from hdrkit import _kernels_py
        rng = np.random.default_rng(2)
        img = rng.uniform(-2, 2, (31, 45))
        radius = max(1, int(np.ceil(2.5 * 1.8)))
        sw, rw, rscale = _kernels._bilateral_tables(1.8, 0.3, radius)
        padded = np.pad(img, radius, mode="edge")
        fast = np.empty_like(img)
        slow = np.empty_like(img)
        _kernels._impl.bilateral_rows(padded, sw, rw, rscale, radius, fast, 0, 31)
        _kernels_py.bilateral_rows(padded, sw, rw, rscale, radius, slow, 0, 31)
        assert np.array_equal(fast, slow)


class TestRangeCoder:
    def test_roundtrip_random(self):
        rng = np.random.default_rng(3)
        payload = rng.integers(0, 256, 10000, dtype=np.uint8).tobytes()
        freq, packed = rc_pack(payload)
        assert rc_unpack(freq, packed, len(payload)) == payload

    def test_roundtrip_skewed(self):
        # highly skewed input must compress well below 1 byte/symbol
        rng = np.random.default_rng(4)
        payload = (rng.random(20000) < 0.05).astype(np.uint8).tobytes()
        freq, packed = rc_pack(payload)
        assert rc_unpack(freq, packed, len(payload)) == payload
        assert len(packed) < len(payload) / 2

    def test_single_symbol_stream(self):
        payload = b"\x07" * 5000
        freq, packed = rc_pack(payload)
        assert rc_unpack(freq, packed, len(payload)) == payload
        assert len(packed) < 64

    def test_empty_stream(self):
        freq, packed = rc_pack(b"")
        assert packed == b""
        assert rc_unpack(freq, packed, 0) == b""

    def test_all_symbols(self):
        payload = bytes(range(256)) * 10
        freq, packed = rc_pack(payload)
        assert rc_unpack(freq, packed, len(payload)) == payload

    def test_freq_table_invariants(self):
        rng = np.random.default_rng(5)
        data = rng.integers(0, 256, 300000, dtype=np.uint8)
        freqs = build_freq_table(data)
        present = np.bincount(data, minlength=256) > 0
        assert (freqs[present] >= 1).all()
        assert freqs.sum() <= 0xFFFF
        cum = freq_to_cum(freqs)
        assert cum[0] == 0 and cum[256] == freqs.sum()

    def test_bad_freq_table_length(self):
        with pytest.raises(BadParameter):
            rc_unpack(b"\x00" * 100, b"xx", 5)

    def test_empty_table_nonempty_stream(self):
        with pytest.raises(BadParameter):
            rc_unpack(b"\x00" * 512, b"xx", 5)

    @pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
    def test_backend_byte_parity(self):
        """Both backends must emit and accept identical streams."""
        from hdrkit import _kernels_py
        rng = np.random.default_rng(6)
        payload = rng.integers(0, 64, 30000, dtype=np.uint8)
        cum = freq_to_cum(build_freq_table(payload))
        fast = _kernels._impl.rc_encode(payload, cum)
        slow = _kernels_py.rc_encode(payload, cum)
        assert fast == slow
        assert np.array_equal(
            _kernels_py.rc_decode(fast, cum, len(payload)), payload
        )


class TestBackendSelection:
    def test_backend_name_is_reported(self):
        assert backend_name() in ("compiled", "python")

    def test_env_override_forces_python(self):
        code = (
            "from hdrkit._kernels import backend_name;"
            "from hdrkit._kernels_py import BACKEND;"
            "assert backend_name() == BACKEND, backend_name();"
            "print(backend_name())"
        )
        proc = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True, text=True,
            env={"HDRKIT_NO_EXT": "1", "PATH": "/usr/bin:/bin"},
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.strip() == "python"
