"""File formats: Radiance pictures, PFM, PPM, and path dispatch."""

import numpy as np
import pytest

from hdrkit import formats
from hdrkit.core import Calibration, HdrImage, SdrImage, luminance
from hdrkit.errors import (
    BadScale,
    FormatError,
    HdrkitError,
    NotPfm,
    NotRadiance,
    TruncatedFile,
    UnsupportedMaxval,
    UnsupportedVariant,
)


def random_image(seed, h=17, w=23):
    rng = np.random.default_rng(seed)
    return HdrImage(np.power(10.0, rng.uniform(-4, 4, (h, w, 3))))


class TestRadianceHdr:
    def test_roundtrip_within_encoding_bound(self):
        img = random_image(1)
        back = formats.read_hdr(formats.write_hdr(img))
        bound = img.data.max(axis=2) * 2.0 ** -8
        assert (np.abs(back.data - img.data).max(axis=2) <= bound).all()

    def test_rle_and_flat_decode_identically(self):
        img = random_image(2, h=9, w=80)
        a = formats.read_hdr(formats.write_hdr(img, use_rle=True))
        b = formats.read_hdr(formats.write_hdr(img, use_rle=False))
        assert np.array_equal(a.data, b.data)

    def test_rle_compresses_flat_regions(self):
        img = HdrImage(np.full((32, 128, 3), 3.0))
        rle = formats.write_hdr(img, use_rle=True)
        flat = formats.write_hdr(img, use_rle=False)
        assert len(rle) < len(flat) / 4

    def test_narrow_images_use_flat_scanlines(self):
        # adaptive RLE is only defined for widths 8..32767
        img = random_image(3, h=4, w=7)
        back = formats.read_hdr(formats.write_hdr(img, use_rle=True))
        assert back.data.shape == (4, 7, 3)

    def test_xyze_roundtrip(self):
        img = random_image(4)
        back = formats.read_hdr(formats.write_hdr(img, fmt="xyze"))
        # two matrix trips plus the shared-exponent quantization
        np.testing.assert_allclose(back.data, img.data, rtol=0.02, atol=1e-5)
        assert back.allow_negative

    def test_exposure_line_scales_samples(self):
        img = random_image(5)
        blob = formats.write_hdr(img)
        head, _, rest = blob.partition(b"FORMAT")
        patched = head + b"EXPOSURE=4.0\nFORMAT" + rest
        back = formats.read_hdr(patched)
        np.testing.assert_allclose(
            back.data, formats.read_hdr(blob).data * 4.0, rtol=1e-12
        )

    def test_header_comments_ignored(self):
        img = random_image(6, h=5, w=5)
        blob = formats.write_hdr(img)
        head, _, rest = blob.partition(b"FORMAT")
        patched = head + b"# a comment\nSOFTWARE=whatever\nFORMAT" + rest
        assert np.array_equal(formats.read_hdr(patched).data, formats.read_hdr(blob).data)

    def test_missing_signature(self):
        with pytest.raises(NotRadiance):
            formats.read_hdr(b"RADIANCE\n\n-Y 1 +X 1\n\x80\x80\x80\x81")

    def test_missing_format(self):
        with pytest.raises(NotRadiance):
            formats.read_hdr(b"#?RADIANCE\n\n-Y 1 +X 1\n\x80\x80\x80\x81")

    def test_unknown_format_variant(self):
        with pytest.raises(NotRadiance):
            formats.read_hdr(b"#?RADIANCE\nFORMAT=32-bit_rle_abgr\n\n-Y 1 +X 1\nxxxx")

    def test_truncated_payload(self):
        blob = formats.write_hdr(random_image(7))
        with pytest.raises(FormatError):
            formats.read_hdr(blob[: len(blob) // 2])

    def test_error_carries_offset(self):
        try:
            formats.read_hdr(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y oops +X 3\n")
        except NotRadiance as e:
            assert e.offset is not None
            assert "offset" in str(e)
        else:
            pytest.fail("expected NotRadiance")

    def test_implausible_dimensions(self):
        blob = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 99999999 +X 99999999\n"
        with pytest.raises(NotRadiance):
            formats.read_hdr(blob)

    def test_orientation_flips(self):
        img = random_image(8, h=6, w=4)
        blob = formats.write_hdr(img, use_rle=False)
        # rewrite -Y h +X w as +Y h +X w: same payload, vertically flipped
        flipped = blob.replace(b"-Y 6 +X 4", b"+Y 6 +X 4")
        a = formats.read_hdr(blob)
        b = formats.read_hdr(flipped)
        assert np.array_equal(b.data, a.data[::-1])


class TestPfm:
    @pytest.mark.parametrize("little_endian", [True, False])
    def test_float32_roundtrip_bit_exact(self, little_endian):
        rng = np.random.default_rng(20)
        img = HdrImage(
            rng.uniform(0, 100, (7, 11, 3)).astype(np.float32).astype(np.float64)
        )
        back = formats.read_pfm(formats.write_pfm(img, little_endian=little_endian))
        assert np.array_equal(back.data, img.data)

    def test_endianness_from_scale_sign(self):
        img = random_image(21, h=3, w=3)
        le = formats.write_pfm(img, little_endian=True)
        be = formats.write_pfm(img, little_endian=False)
        assert b"-1.0" in le and b"\n1.0" in be
        assert np.allclose(formats.read_pfm(le).data, formats.read_pfm(be).data)

    def test_grayscale_expands(self):
        payload = np.arange(6, dtype="<f4").tobytes()
        blob = b"Pf\n3 2\n-1.0\n" + payload
        img = formats.read_pfm(blob)
        assert img.data.shape == (2, 3, 3)
        assert np.array_equal(img.data[..., 0], img.data[..., 1])

    def test_scale_magnitude_multiplies(self):
        img = HdrImage(np.full((2, 2, 3), 2.0))
        blob = formats.write_pfm(img).replace(b"-1.0", b"-2.5")
        np.testing.assert_allclose(formats.read_pfm(blob).data, 5.0)

    def test_zero_scale_rejected(self):
        blob = formats.write_pfm(random_image(22)).replace(b"-1.0", b"0.0")
        with pytest.raises(BadScale):
            formats.read_pfm(blob)

    def test_bad_magic(self):
        with pytest.raises(NotPfm):
            formats.read_pfm(b"P6\n1 1\n255\nabc")

    def test_truncated(self):
        blob = formats.write_pfm(random_image(23))
        with pytest.raises(TruncatedFile):
            formats.read_pfm(blob[:-5])

    def test_negative_samples_allowed(self):
        data = np.full((2, 2, 3), -1.5, dtype=np.float64)
        blob = b"PF\n2 2\n-1.0\n" + data[::-1].astype("<f4").tobytes()
        img = formats.read_pfm(blob)
        assert img.allow_negative
        np.testing.assert_array_equal(img.data, -1.5)


class TestPpm:
    def test_roundtrip(self):
        rng = np.random.default_rng(30)
        sdr = SdrImage(rng.integers(0, 256, (5, 9, 3), dtype=np.uint8))
        back = formats.read_ppm(formats.write_ppm(sdr))
        assert np.array_equal(back.data, sdr.data)
        assert back.transfer_tag == "srgb"

    def test_transfer_tag_passthrough(self):
        sdr = SdrImage(np.zeros((2, 2, 3), dtype=np.uint8))
        back = formats.read_ppm(formats.write_ppm(sdr), transfer_tag="gamma22")
        assert back.transfer_tag == "gamma22"

    def test_comments_in_header(self):
        blob = b"P6\n# made by hand\n2 1 255\n" + bytes(6)
        assert formats.read_ppm(blob).data.shape == (1, 2, 3)

    def test_ascii_variant_rejected(self):
        with pytest.raises(UnsupportedVariant):
            formats.read_ppm(b"P3\n1 1\n255\n0 0 0\n")

    def test_wide_maxval_rejected(self):
        with pytest.raises(UnsupportedMaxval):
            formats.read_ppm(b"P6\n1 1\n65535\n" + bytes(6))

    def test_truncated(self):
        with pytest.raises(TruncatedFile):
            formats.read_ppm(b"P6\n4 4\n255\n" + bytes(10))


class TestPathDispatch:
    def test_sniff_kind(self):
        assert formats.sniff_kind("scene.hdr") == "hdr"
        assert formats.sniff_kind("scene.PIC") == "hdr"
        assert formats.sniff_kind("depth.pfm") == "pfm"
        assert formats.sniff_kind("frame.ppm") == "ppm"
        assert formats.sniff_kind("packed.hdrl") == "hdrl"

    def test_sniff_unknown_extension(self):
        assert formats.sniff_kind("image.jpeg") is None

    def test_load_unknown_extension(self, tmp_path):
        p = tmp_path / "mystery.bin"
        p.write_bytes(b"???")
        with pytest.raises(HdrkitError):
            formats.load(str(p))

    def test_load_dump_cycle(self, tmp_path):
        img = random_image(40, h=6, w=6)
        p = tmp_path / "scene.pfm"
        p.write_bytes(formats.dump(img, "pfm"))
        again = formats.load(str(p))
        assert isinstance(again, HdrImage)
        assert luminance(again).shape == (6, 6)

    def test_load_kind_override(self, tmp_path):
        img = random_image(41, h=4, w=4)
        p = tmp_path / "mislabeled.bin"
        p.write_bytes(formats.write_hdr(img))
        loaded = formats.load(str(p), kind="hdr")
        assert loaded.data.shape == (4, 4, 3)

    def test_hdr_calibration_is_relative(self):
        img = random_image(42)
        assert formats.read_hdr(formats.write_hdr(img)).calibration is Calibration.RELATIVE
