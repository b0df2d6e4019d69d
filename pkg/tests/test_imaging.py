import math

import numpy as np
import pytest

from helpers import fsum_channel_means, random_image

from pallor.errors import (
    CorruptImageError,
    DimensionMismatchError,
    EmptyRegionError,
    ImageFileMissingError,
    RoiBoundsError,
    UnsupportedImageFormatError,
)
from pallor.imaging import (
    BinaryMask,
    RgbImage,
    Roi,
    channel_means,
    decode_pbm,
    decode_ppm,
    encode_pbm,
    encode_ppm,
    load_image,
    load_mask_pbm,
    mask_to_rle,
    resize_bilinear,
    rle_to_mask,
    save_image,
    save_mask_pbm,
    upsample_nearest,
)
from pallor.rng import SplitMix64

GOLDEN_PPM = b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 128, 0])


class TestPpmCodec:
    def test_golden_decode(self):
        img = decode_ppm(GOLDEN_PPM)
        assert (img.width, img.height) == (2, 1)
        assert img.planes[0].tolist() == [[255.0, 0.0]]
        assert img.planes[1].tolist() == [[0.0, 128.0]]
        assert img.planes[2].tolist() == [[0.0, 0.0]]

    def test_golden_encode(self):
        img = RgbImage.from_interleaved(
            np.array([[[255, 0, 0], [0, 128, 0]]], dtype=np.float64)
        )
        assert encode_ppm(img) == GOLDEN_PPM

    def test_header_comments_and_whitespace(self):
        data = b"P6 # comment\n# another\n 2\t1 # dims\n255\n" + bytes(6)
        img = decode_ppm(data)
        assert (img.width, img.height) == (2, 1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageFileMissingError):
            load_image(tmp_path / "nope.ppm")

    def test_zero_byte_file_is_corrupt(self, tmp_path):
        p = tmp_path / "empty.ppm"
        p.write_bytes(b"")
        with pytest.raises(CorruptImageError):
            load_image(p)

    def test_unknown_magic_is_unsupported(self, tmp_path):
        p = tmp_path / "odd.bin"
        p.write_bytes(b"GIF89a....")
        with pytest.raises(UnsupportedImageFormatError):
            load_image(p)

    def test_truncated_raster_is_corrupt(self):
        with pytest.raises(CorruptImageError):
            decode_ppm(b"P6\n4 4\n255\n" + bytes(10))

    def test_wrong_maxval_is_unsupported(self):
        with pytest.raises(UnsupportedImageFormatError):
            decode_ppm(b"P6\n1 1\n65535\n" + bytes(6))

    def test_bad_dimensions_are_corrupt(self):
        with pytest.raises(CorruptImageError):
            decode_ppm(b"P6\n0 5\n255\n")


class TestExportQuantisation:
    def test_clamp_above(self, tmp_path):
        img = RgbImage(np.full((3, 1, 1), 300.0))
        p = tmp_path / "img.ppm"
        save_image(img, p)
        assert load_image(p).planes[0, 0, 0] == 255.0

    def test_round_half_up(self, tmp_path):
        img = RgbImage(np.full((3, 1, 1), 127.5))
        p = tmp_path / "img.ppm"
        save_image(img, p)
        assert load_image(p).planes[0, 0, 0] == 128.0

    def test_clamp_below_zero(self, tmp_path):
        img = RgbImage(np.full((3, 1, 1), -17.3))
        p = tmp_path / "img.ppm"
        save_image(img, p)
        assert load_image(p).planes[0, 0, 0] == 0.0

    def test_integral_round_trip_is_identity(self, tmp_path):
        rng = SplitMix64(5)
        img = RgbImage(np.floor(rng.uniform_array(3 * 12 * 9, 0, 256).reshape(3, 9, 12)))
        p = tmp_path / "img.ppm"
        save_image(img, p)
        assert np.array_equal(load_image(p).planes, img.planes)

    def test_round_trip_idempotent_after_first_quantisation(self, tmp_path):
        rng = SplitMix64(6)
        img = random_image(rng, 8, 8, lo=-30.0, hi=300.0)
        p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        save_image(img, p1)
        once = load_image(p1)
        save_image(once, p2)
        assert np.array_equal(load_image(p2).planes, once.planes)


class TestPngInput:
    def test_png_decodes_to_same_pixels(self, tmp_path):
        from PIL import Image

        pixels = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3) * 9
        p = tmp_path / "img.png"
        Image.fromarray(pixels, mode="RGB").save(p)
        img = load_image(p)
        assert np.array_equal(img.interleaved(), pixels.astype(np.float64))

    def test_broken_png_is_corrupt(self, tmp_path):
        p = tmp_path / "img.png"
        p.write_bytes(b"\x89PNG\r\n\x1a\n garbage")
        with pytest.raises(CorruptImageError):
            load_image(p)


class TestChannelMeans:
    def test_uniform_image_any_region(self):
        img = RgbImage.full(16, 10, (10.0, 20.0, 30.0))
        assert channel_means(img, Roi(3, 2, 5, 4)) == (10.0, 20.0, 30.0)
        bits = np.zeros((10, 16), dtype=bool)
        bits[1:4, 2:9] = True
        assert channel_means(img, BinaryMask(bits)) == (10.0, 20.0, 30.0)

    def test_two_pixel_mean(self):
        img = RgbImage(np.array([[[0.0, 255.0]], [[0.0, 0.0]], [[0.0, 0.0]]]))
        assert channel_means(img, Roi(0, 0, 2, 1))[0] == 127.5

    def test_empty_mask_raises(self):
        img = RgbImage.full(4, 4, (1.0, 1.0, 1.0))
        with pytest.raises(EmptyRegionError):
            channel_means(img, BinaryMask(np.zeros((4, 4), dtype=bool)))

    def test_roi_outside_image_raises(self):
        img = RgbImage.full(4, 4, (1.0, 1.0, 1.0))
        with pytest.raises(RoiBoundsError):
            channel_means(img, Roi(2, 2, 4, 4))

    def test_mask_dimension_mismatch(self):
        img = RgbImage.full(4, 4, (1.0, 1.0, 1.0))
        with pytest.raises(DimensionMismatchError):
            channel_means(img, BinaryMask(np.ones((3, 3), dtype=bool)))

    def test_matches_compensated_summation_oracle(self):
        rng = SplitMix64(1234)
        for trial in range(20):
            w = 16 + int(rng.below(100))
            h = 16 + int(rng.below(100))
            img = random_image(rng, w, h)
            got = channel_means(img, Roi(0, 0, w, h))
            want = fsum_channel_means(img, 0, h, 0, w)
            for g, m in zip(got, want):
                assert abs(g - m) <= math.ulp(m)

    def test_full_roi_equals_full_mask(self):
        rng = SplitMix64(77)
        img = random_image(rng, 23, 17)
        roi_means = channel_means(img, Roi(0, 0, 23, 17))
        mask_means = channel_means(img, BinaryMask(np.ones((17, 23), dtype=bool)))
        assert roi_means == mask_means


class TestRoi:
    def test_parse_round_trip(self):
        roi = Roi.parse("3,4,10,20")
        assert roi == Roi(3, 4, 10, 20)
        assert str(roi) == "3,4,10,20"

    @pytest.mark.parametrize("text", ["1,2,3", "a,b,c,d", "1;2;3;4", ""])
    def test_parse_rejects_garbage(self, text):
        with pytest.raises(ValueError):
            Roi.parse(text)

    def test_bounds_check(self):
        Roi(0, 0, 4, 4).check_within(4, 4)
        with pytest.raises(RoiBoundsError):
            Roi(1, 0, 4, 4).check_within(4, 4)
        with pytest.raises(RoiBoundsError):
            Roi(0, 0, 0, 4).check_within(4, 4)


class TestMaskFormats:
    def test_pbm_golden(self):
        bits = np.array([[True, False], [False, True]])
        data = encode_pbm(BinaryMask(bits))
        assert data == b"P4\n2 2\n" + bytes([0x80, 0x40])
        assert np.array_equal(decode_pbm(data).bits, bits)

    def test_pbm_file_round_trip(self, tmp_path):
        rng = SplitMix64(9)
        bits = rng.uniform_array(13 * 7, 0, 1).reshape(7, 13) > 0.6
        p = tmp_path / "m.pbm"
        save_mask_pbm(BinaryMask(bits), p)
        assert np.array_equal(load_mask_pbm(p).bits, bits)

    def test_rle_golden(self):
        bits = np.array([[True, True, False], [False, True, False]])
        rle = mask_to_rle(BinaryMask(bits))
        assert rle == {"width": 3, "height": 2, "runs": [[0, 2], [4, 1]]}
        assert np.array_equal(rle_to_mask(rle).bits, bits)

    def test_rle_round_trip_random(self):
        rng = SplitMix64(10)
        for _ in range(10):
            bits = rng.uniform_array(40 * 25, 0, 1).reshape(25, 40) > 0.5
            mask = BinaryMask(bits)
            back = rle_to_mask(mask_to_rle(mask))
            assert np.array_equal(back.bits, bits)
            assert back.popcount == mask.popcount

    def test_rle_rejects_overflowing_run(self):
        with pytest.raises(ValueError):
            rle_to_mask({"width": 2, "height": 2, "runs": [[3, 2]]})

    def test_popcount_plus_complement(self):
        rng = SplitMix64(11)
        bits = rng.uniform_array(30 * 20, 0, 1).reshape(20, 30) > 0.3
        mask = BinaryMask(bits)
        comp = BinaryMask(~bits)
        assert mask.popcount + comp.popcount == 30 * 20


class TestGeometry:
    def test_images_are_immutable(self):
        img = RgbImage.full(4, 4, (1.0, 2.0, 3.0))
        with pytest.raises(ValueError):
            img.planes[0, 0, 0] = 9.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            RgbImage(np.full((3, 2, 2), np.nan))

    def test_resize_same_size_is_identity(self):
        rng = SplitMix64(12)
        img = random_image(rng, 9, 6)
        out = resize_bilinear(img, 9, 6)
        assert np.allclose(out.planes, img.planes, atol=1e-12)

    def test_resize_constant_stays_constant(self):
        img = RgbImage.full(10, 8, (40.0, 80.0, 120.0))
        out = resize_bilinear(img, 37, 23)
        assert np.allclose(out.planes[0], 40.0)
        assert np.allclose(out.planes[2], 120.0)

    def test_upsample_nearest_integer_factor(self):
        planes = np.arange(4, dtype=np.float64).reshape(1, 2, 2)
        up = upsample_nearest(planes, 4, 4)
        assert up.shape == (1, 4, 4)
        assert up[0, 0].tolist() == [0, 0, 1, 1]
        assert up[0, 3].tolist() == [2, 2, 3, 3]
