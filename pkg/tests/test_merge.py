"""Exposure stacks: weighting, response recovery, alignment, and merging."""

import warnings

import numpy as np
import pytest

from conftest import octave_texture, shoot, smooth_radiance
from hdrkit.core import Calibration, SdrImage
from hdrkit.errors import (
    AlignmentUnreliable,
    BadParameter,
    InsufficientSamples,
    ShapeMismatch,
)
from hdrkit.merge import (
    ExposureStack,
    ResponseCurve,
    WeightFunction,
    align_global,
    estimate_response,
    load_stack_manifest,
    merge,
    misalignment_report,
)


class TestWeightFunction:
    def test_hat_shape(self):
        w = WeightFunction.hat()
        assert w.table[0] == 0.0 and w.table[255] == 0.0
        assert w.table[127] == pytest.approx(127 / 127.5)
        assert (w.table[1:255] > 0).all()

    def test_table_frozen(self):
        w = WeightFunction.hat()
        with pytest.raises(ValueError):
            w.table[10] = 0.5

    def test_validation(self):
        with pytest.raises(BadParameter):
            WeightFunction(np.ones(256))        # endpoints nonzero
        with pytest.raises(BadParameter):
            WeightFunction(np.zeros(256))       # interior zero
        with pytest.raises(BadParameter):
            WeightFunction(np.zeros(100))
        bad = WeightFunction.hat().table.copy()
        bad[10] = 1.5
        with pytest.raises(BadParameter):
            WeightFunction(bad)


class TestResponseCurve:
    def test_linear_pivot(self):
        g = ResponseCurve.linear()
        assert g.values[128] == 0.0
        assert g.values[0] == g.values[1]
        # doubling the code of a gamma-1 sensor doubles radiance
        assert np.exp(g.values[200] - g.values[100]) == pytest.approx(2.0, rel=1e-12)

    def test_monotonicity_enforced(self):
        vals = ResponseCurve.linear().values.copy()
        vals[40] = vals[60]
        with pytest.raises(BadParameter):
            ResponseCurve(vals)

    def test_pivot_enforced(self):
        vals = ResponseCurve.linear().values + 0.5
        with pytest.raises(BadParameter):
            ResponseCurve(vals)

    def test_text_roundtrip_exact(self, tmp_path):
        g = ResponseCurve.linear()
        p = tmp_path / "crf.txt"
        g.save(str(p))
        again = ResponseCurve.load(str(p))
        assert np.array_equal(again.values, g.values)

    def test_load_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("not a number\n")
        with pytest.raises(BadParameter):
            ResponseCurve.load(str(p))

    def test_strictly_monotone_flag(self):
        assert not ResponseCurve.linear().strictly_monotone  # g[0] == g[1]
        z = np.arange(256, dtype=np.float64)
        g = z / 50.0
        g -= g[128]
        g[128] = 0.0
        assert ResponseCurve(g).strictly_monotone


class TestExposureStack:
    def test_accepts_mixed_frame_types(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 256, (4, 4, 3), dtype=np.uint8)
        b = SdrImage(rng.integers(0, 256, (4, 4, 3), dtype=np.uint8))
        c = (rng.integers(0, 256, (4, 4, 3), dtype=np.uint16) << 8)
        stack = ExposureStack([a, b, c], [0.1, 0.2, 0.4])
        assert len(stack) == 3
        assert all(f.dtype == np.uint8 for f in stack.frames)

    def test_uint16_shifted_down(self):
        hi = np.full((2, 2, 3), 0xAB00, dtype=np.uint16)
        stack = ExposureStack([hi], [1.0])
        assert (stack.frames[0] == 0xAB).all()

    def test_shape_mismatch(self):
        a = np.zeros((4, 4, 3), dtype=np.uint8)
        b = np.zeros((4, 5, 3), dtype=np.uint8)
        with pytest.raises(ShapeMismatch):
            ExposureStack([a, b], [0.1, 0.2])

    def test_times_validated(self):
        a = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(BadParameter):
            ExposureStack([a, a], [0.1, -0.2])
        with pytest.raises(BadParameter):
            ExposureStack([a, a], [0.1, 0.1])   # duplicate
        with pytest.raises(BadParameter):
            ExposureStack([a], [0.1, 0.2])
        with pytest.raises(BadParameter):
            ExposureStack([], [])


class TestEstimateResponse:
    def test_recovers_gamma_curve(self, merge_oracle):
        stack = ExposureStack(merge_oracle["frames"], merge_oracle["times"])
        curve = estimate_response(stack, seed=0)
        z = np.arange(256, dtype=np.float64)
        g_true = np.zeros(256)
        g_true[1:] = 2.2 * np.log(z[1:] / 255.0)
        g_true -= g_true[128]
        rmse = np.sqrt(np.mean((curve.values[20:236] - g_true[20:236]) ** 2))
        assert rmse < 0.05

    def test_deterministic_given_seed(self, merge_oracle):
        stack = ExposureStack(merge_oracle["frames"], merge_oracle["times"])
        a = estimate_response(stack, seed=3)
        b = estimate_response(stack, seed=3)
        assert np.array_equal(a.values, b.values)

    def test_single_frame_rejected(self):
        frame = np.full((8, 8, 3), 100, dtype=np.uint8)
        stack = ExposureStack([frame], [0.1])
        with pytest.raises(InsufficientSamples):
            estimate_response(stack)

    def test_result_is_valid_curve(self, merge_oracle):
        stack = ExposureStack(merge_oracle["frames"], merge_oracle["times"])
        curve = estimate_response(stack, seed=1)
        assert curve.values.shape == (256,)
        assert curve.values[128] == 0.0
        assert (np.diff(curve.values) >= 0).all()


class TestMerge:
    def test_known_response_recovers_radiance(self, merge_oracle):
        z = np.arange(256, dtype=np.float64)
        g = np.zeros(256)
        g[1:] = 2.2 * np.log(z[1:] / 255.0)
        g[0] = g[1]
        g -= g[128]
        g[128] = 0.0
        stack = ExposureStack(merge_oracle["frames"], merge_oracle["times"])
        img, mask = merge(stack, ResponseCurve(g))
        assert img.calibration is Calibration.RELATIVE

        radiance = merge_oracle["radiance"]
        unclipped = sum(((f > 0) & (f < 255)).astype(int) for f in merge_oracle["frames"])
        ok = (unclipped >= 2).all(axis=2) & ~mask
        # global scale is unobservable; compare after median alignment
        scale = np.median(img.data[ok] / radiance[ok])
        rel = np.abs(img.data[ok] / scale - radiance[ok]) / radiance[ok]
        assert np.percentile(rel, 99) < 0.02

    def test_frame_order_invariance(self, merge_oracle):
        frames, times = merge_oracle["frames"], merge_oracle["times"]
        a, _ = merge(ExposureStack(frames, times))
        b, _ = merge(ExposureStack(frames[::-1], times[::-1]))
        assert np.array_equal(a.data, b.data)

    def test_reciprocity(self, merge_oracle):
        """Scaling all exposure times by k scales output by exactly 1/k."""
        frames, times = merge_oracle["frames"], merge_oracle["times"]
        a, _ = merge(ExposureStack(frames, times))
        b, _ = merge(ExposureStack(frames, times * 8.0))
        np.testing.assert_allclose(b.data * 8.0, a.data, rtol=1e-13)

    def test_saturation_mask_or_fill(self):
        # one all-white and one all-black frame leave no usable samples
        white = np.full((4, 4, 3), 255, dtype=np.uint8)
        black = np.zeros((4, 4, 3), dtype=np.uint8)
        img, mask = merge(ExposureStack([black, white], [0.1, 0.4]))
        assert mask.all()
        assert np.isfinite(img.data).all()
        assert (img.data > 0).all()

    def test_mask_false_when_clean(self, merge_oracle):
        frames = [np.clip(f, 1, 254) for f in merge_oracle["frames"]]
        _, mask = merge(ExposureStack(frames, merge_oracle["times"]))
        assert not mask.any()


class TestAlignment:
    def _shifted_stack(self, rng, size=128):
        tex = octave_texture(rng, size)
        rad = 0.2 * np.power(300.0, tex)
        rad = np.repeat(rad[..., None], 3, axis=2)
        times = [0.02, 0.08, 0.32]
        frames = [shoot(rad, t) for t in times]
        return frames, times

    def test_integer_shift_recovered(self):
        rng = np.random.default_rng(99)
        frames, times = self._shifted_stack(rng)
        dx, dy = 11, -7
        frames[0] = np.roll(frames[0], (dy, dx), axis=(0, 1))
        stack = ExposureStack(frames, times)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            aligned, shifts = align_global(stack)
        assert shifts[0] == (-dx, -dy)
        assert shifts[1] == (0, 0)

    def test_aligned_frames_match_reference(self):
        rng = np.random.default_rng(100)
        frames, times = self._shifted_stack(rng)
        orig = frames[2].copy()
        frames[2] = np.roll(frames[2], (5, -3), axis=(0, 1))
        stack = ExposureStack(frames, times)
        aligned, shifts = align_global(stack)
        assert np.array_equal(aligned.frames[2], orig)

    def test_wraparound_band_invalidated(self):
        rng = np.random.default_rng(101)
        frames, times = self._shifted_stack(rng)
        frames[0] = np.roll(frames[0], (0, 9), axis=(0, 1))
        stack = ExposureStack(frames, times)
        aligned, _ = align_global(stack)
        # the 9 columns wrapped around by the undo roll carry foreign content
        assert not aligned.valid[0][:, -9:].any()
        assert aligned.valid[0][:, :-9].all()

    def test_unreliable_input_warns_and_keeps_frames(self):
        rng = np.random.default_rng(102)
        flat = np.full((64, 64, 3), 128, dtype=np.uint8)
        noisy = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
        stack = ExposureStack([flat, noisy], [0.1, 0.4])
        with pytest.warns(AlignmentUnreliable):
            aligned, shifts = align_global(stack)
        assert shifts == [(0, 0), (0, 0)]
        assert np.array_equal(aligned.frames[0], flat)

    def test_misalignment_report(self):
        rep = misalignment_report([(0, 0), (3, -4), (0, 0)])
        assert rep["classification"] == "global"
        assert rep["max_shift_l1"] == 7
        assert misalignment_report([(0, 0)])["classification"] == "none"


class TestManifest:
    def test_loads_relative_paths(self, tmp_path):
        rng = np.random.default_rng(55)
        sub = tmp_path / "shots"
        sub.mkdir()
        recorded = {}
        for i, t in enumerate((0.1, 0.2)):
            name = f"e{i}.bin"
            arr = rng.integers(0, 256, (3, 3, 3), dtype=np.uint8)
            (sub / name).write_bytes(arr.tobytes())
            recorded[str(sub / name)] = arr
        manifest = sub / "stack.txt"
        manifest.write_text("# comment line\ne0.bin 0.1\ne1.bin 0.2\n")

        def reader(path):
            return np.frombuffer(
                open(path, "rb").read(), dtype=np.uint8
            ).reshape(3, 3, 3)

        stack = load_stack_manifest(str(manifest), reader)
        assert stack.exposure_times.tolist() == [0.1, 0.2]
        assert np.array_equal(stack.frames[0], recorded[str(sub / "e0.bin")])

    def test_bad_line_rejected(self, tmp_path):
        manifest = tmp_path / "stack.txt"
        manifest.write_text("just-one-token\n")
        with pytest.raises(BadParameter):
            load_stack_manifest(str(manifest), lambda p: None)

    def test_bad_time_rejected(self, tmp_path):
        manifest = tmp_path / "stack.txt"
        manifest.write_text("frame.ppm notanumber\n")
        with pytest.raises(BadParameter):
            load_stack_manifest(str(manifest), lambda p: None)
