"""
Tests for image containers, resampling and file I/O
"""
import tempfile
from pathlib import Path

import numpy as np
import tifffile
from django.test import SimpleTestCase
from PIL import Image

from raster.exceptions import ArgumentError, DataError, FormatError, ImageIOError, RangeError
from raster.fields import load_field, mask_path, save_field, sidecar_path
from raster.files import load_frame, load_mask, save_frame, save_mask, srgb_to_linear
from raster.planes import FactorField, Frame, ImagePlane, ScatterField
from raster.resample import downsample, downsample_array, reduced_size, upsample, upsample_array
from raster.serializers import flatten_errors


class PlaneContainerTestCase(SimpleTestCase):
    """Validation rules of ImagePlane and Frame"""

    def test_plane_rejects_non_finite(self):
        """NaN pixels are a data error"""
        with self.assertRaises(DataError):
            ImagePlane(np.array([[0.0, np.nan]]))

    def test_plane_rejects_negative(self):
        """Radiance is non-negative"""
        with self.assertRaises(DataError):
            ImagePlane(np.array([[0.1, -0.1]]))

    def test_plane_rejects_wrong_rank(self):
        with self.assertRaises(ArgumentError):
            ImagePlane(np.zeros(4))

    def test_plane_copies_input(self):
        """Mutating the source array does not change the plane"""
        source = np.zeros((2, 2))
        plane = ImagePlane(source)
        source[0, 0] = 1.0
        self.assertEqual(plane.data[0, 0], 0.0)
        self.assertFalse(plane.data.flags.writeable)

    def test_frame_channel_count(self):
        """Frames carry 1 or 3 channels"""
        with self.assertRaises(ArgumentError):
            Frame.from_array(np.zeros((2, 4, 4)))

    def test_frame_mismatched_planes(self):
        with self.assertRaises(ArgumentError):
            Frame((ImagePlane(np.zeros((2, 2))), ImagePlane(np.zeros((2, 3))), ImagePlane(np.zeros((2, 2)))))

    def test_frame_stack_layout(self):
        """stack() returns (channels, height, width)"""
        frame = Frame.from_array(np.zeros((3, 4, 5)), index=2)
        self.assertEqual(frame.stack().shape, (3, 4, 5))
        self.assertEqual(frame.size, (5, 4))
        self.assertEqual(frame.index, 2)

    def test_factor_validity_from_epsilon(self):
        """Values below epsilon are flagged invalid"""
        factor = FactorField.from_array(np.array([[0.5, 0.0], [0.2, 1e-6]]), epsilon=1e-4)
        np.testing.assert_array_equal(factor.coverage, [[True, False], [True, False]])
        self.assertAlmostEqual(factor.invalid_fraction, 0.5)

    def test_factor_coverage_needs_all_channels(self):
        """Coverage is the intersection of per-channel validity"""
        values = np.ones((3, 2, 2))
        values[1, 0, 0] = 0.0
        factor = FactorField.from_array(values, epsilon=1e-4)
        self.assertFalse(factor.coverage[0, 0])
        self.assertTrue(factor.coverage[1, 1])


class ResampleTestCase(SimpleTestCase):
    """Box downsampling and bilinear upsampling"""

    def test_downsample_constant(self):
        plane = ImagePlane.constant(13, 7, 0.3)
        for factor in (1, 2, 3, 8):
            result = downsample(plane, factor)
            np.testing.assert_allclose(result.data, 0.3, rtol=0, atol=1e-15)

    def test_downsample_checkerboard(self):
        """2x2 [0,1;1,0] averages to 0.5"""
        result = downsample(ImagePlane(np.array([[0.0, 1.0], [1.0, 0.0]])), 2)
        np.testing.assert_array_equal(result.data, [[0.5]])

    def test_downsample_partial_boxes(self):
        """Edge boxes average the pixels they contain"""
        ramp = ImagePlane(np.arange(9, dtype=float).reshape(3, 3))
        result = downsample(ramp, 2)
        np.testing.assert_allclose(result.data, [[2.0, 3.5], [6.5, 8.0]])

    def test_downsample_zero_factor(self):
        with self.assertRaises(ArgumentError):
            downsample(ImagePlane.constant(4, 4, 1.0), 0)

    def test_downsample_mean_preserving(self):
        """Exact boxes keep the global mean"""
        values = np.random.default_rng(3).random((16, 24))
        self.assertAlmostEqual(downsample_array(values, 8).mean(), values.mean(), places=12)

    def test_reduced_size(self):
        self.assertEqual(reduced_size(10, 17, 8), (2, 3))

    def test_upsample_constant_exact(self):
        """Bilinear interpolation preserves constants bit-for-bit"""
        result = upsample(ImagePlane.constant(3, 2, 0.7), 17, 11)
        self.assertTrue((result.data == 0.7).all())

    def test_upsample_single_pixel(self):
        result = upsample(ImagePlane(np.array([[0.25]])), 5, 4)
        self.assertTrue((result.data == 0.25).all())

    def test_upsample_align_centers(self):
        """[0, 1] to four samples lands on pixel centres with clamped edges"""
        result = upsample(ImagePlane(np.array([[0.0, 1.0]])), 4, 1)
        np.testing.assert_allclose(result.data, [[0.0, 0.25, 0.75, 1.0]])

    def test_upsample_rejects_zero_target(self):
        with self.assertRaises(ArgumentError):
            upsample(ImagePlane.constant(2, 2, 1.0), 0, 2)

    def test_upsample_rejects_shrinking(self):
        with self.assertRaises(ArgumentError):
            upsample_array(np.zeros((4, 4)), 2, 4)

    def test_down_then_up_constant_identity(self):
        plane = ImagePlane.constant(20, 12, 0.5)
        low = downsample(plane, 8)
        self.assertTrue((upsample(low, 20, 12).data == plane.data).all())

    def test_stacked_arrays(self):
        """Array variants resample every channel of a stack independently"""
        stack = np.stack([np.full((4, 4), 0.1), np.full((4, 4), 0.2), np.full((4, 4), 0.4)])
        up = upsample_array(downsample_array(stack, 2), 4, 4)
        np.testing.assert_allclose(up[:, 0, 0], [0.1, 0.2, 0.4])


class FrameFileTestCase(SimpleTestCase):
    """load_frame / save_frame behaviour"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_load_8bit_full_scale(self):
        """255 decodes to exactly 1.0"""
        path = self.root / 'white.png'
        Image.fromarray(np.full((4, 5), 255, dtype=np.uint8)).save(path)
        frame = load_frame(path, gamma='linear')
        self.assertEqual(frame.channels, 1)
        self.assertTrue((frame.stack() == 1.0).all())

    def test_load_8bit_zero(self):
        path = self.root / 'black.png'
        Image.fromarray(np.zeros((4, 5), dtype=np.uint8)).save(path)
        self.assertTrue((load_frame(path).stack() == 0.0).all())

    def test_load_8bit_srgb_default(self):
        """8-bit input is sRGB-decoded unless told otherwise"""
        path = self.root / 'mid.png'
        Image.fromarray(np.full((2, 2), 128, dtype=np.uint8)).save(path)
        np.testing.assert_allclose(load_frame(path).stack(), srgb_to_linear(128 / 255))

    def test_load_16bit_linear(self):
        """16-bit 32768 maps to 32768/65535"""
        path = self.root / 'half.tif'
        tifffile.imwrite(path, np.full((3, 3), 32768, dtype=np.uint16))
        frame = load_frame(path)
        np.testing.assert_allclose(frame.stack(), 32768 / 65535)

    def test_round_trip_16bit_png_rgb(self):
        """save/load error stays within one 16-bit step"""
        values = np.random.default_rng(0).random((3, 6, 7))
        path = self.root / 'rgb.png'
        save_frame(Frame.from_array(values), path)
        loaded = load_frame(path)
        self.assertEqual(loaded.channels, 3)
        self.assertLessEqual(np.abs(loaded.stack() - values).max(), 1 / 65535)

    def test_round_trip_half_grey(self):
        path = self.root / 'grey.tif'
        save_frame(Frame.from_array(np.full((4, 4), 0.5)), path, depth=16)
        self.assertLessEqual(np.abs(load_frame(path).stack() - 0.5).max(), 1 / 65535)

    def test_round_trip_8bit_srgb(self):
        values = np.linspace(0.0, 1.0, 12).reshape(3, 4)
        path = self.root / 'srgb.png'
        save_frame(Frame.from_array(values), path, depth=8, gamma='srgb')
        loaded = load_frame(path, gamma='srgb').stack()[0]
        self.assertLess(np.abs(loaded - values).max(), 0.01)

    def test_round_trip_8bit_defaults(self):
        """Default 8-bit encode and decode agree, so 0.5 reads back as 0.5"""
        path = self.root / 'grey8.png'
        save_frame(Frame.from_array(np.full((4, 4), 0.5)), path, depth=8)
        self.assertLess(np.abs(load_frame(path).stack() - 0.5).max(), 0.005)
        with Image.open(path) as image:
            self.assertEqual(np.asarray(image).max(), 188)

    def test_clamp_stores_full_scale(self):
        """1.7 is written as 1.0 when clamping"""
        path = self.root / 'bright.tif'
        save_frame(np.full((2, 2), 1.7), path, clamp=True)
        self.assertTrue((load_frame(path).stack() == 1.0).all())

    def test_out_of_range_without_clamp(self):
        with self.assertRaises(RangeError):
            save_frame(np.full((2, 2), -0.1), self.root / 'neg.png')
        self.assertFalse((self.root / 'neg.png').exists())

    def test_non_finite_rejected(self):
        with self.assertRaises(DataError):
            save_frame(np.array([[0.1, np.inf]]), self.root / 'inf.png', clamp=True)

    def test_alpha_rejected(self):
        """Alpha channels are a format error"""
        path = self.root / 'alpha.png'
        Image.fromarray(np.zeros((4, 4, 4), dtype=np.uint8)).save(path)
        with self.assertRaises(FormatError):
            load_frame(path)

    def test_unsupported_extension(self):
        with self.assertRaises(FormatError):
            load_frame(self.root / 'frame.jpg')

    def test_missing_file(self):
        with self.assertRaises(ImageIOError) as context:
            load_frame(self.root / 'absent.png')
        self.assertEqual(context.exception.path, self.root / 'absent.png')

    def test_truncated_png(self):
        """A cut-off PNG is an I/O error, not a format error"""
        path = self.root / 'cut.png'
        noise = np.random.default_rng(1).integers(0, 256, (64, 64, 3), dtype=np.uint8)
        Image.fromarray(noise).save(path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with self.assertRaises(ImageIOError):
            load_frame(path)

    def test_mask_round_trip(self):
        mask = np.random.default_rng(2).random((5, 9)) > 0.5
        path = self.root / 'mask.png'
        save_mask(mask, path)
        np.testing.assert_array_equal(load_mask(path), mask)


class FieldPersistenceTestCase(SimpleTestCase):
    """Scatter/factor fields with sidecar and validity mask"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_scatter_round_trip(self):
        values = np.random.default_rng(4).random((3, 8, 6)) * 0.2
        path = self.root / 'scatter.tif'
        save_field(ScatterField.from_array(values), path)
        self.assertTrue(sidecar_path(path).exists())
        loaded = load_field(path, expected_kind='scatter')
        self.assertIsInstance(loaded, ScatterField)
        self.assertLessEqual(np.abs(loaded.stack() - values).max(), values.max() / 65535 * 1.01)

    def test_factor_mask_round_trip(self):
        values = np.random.default_rng(5).random((3, 8, 6)) * 2.0
        values[:, 0, 0] = 0.0
        path = self.root / 'factor.tif'
        save_field(FactorField.from_array(values, epsilon=1e-4), path, epsilon=1e-4)
        self.assertTrue(mask_path(path).exists())
        loaded = load_field(path)
        self.assertIsInstance(loaded, FactorField)
        self.assertFalse(loaded.coverage[0, 0])
        self.assertEqual(loaded.coverage.sum(), 47)

    def test_kind_mismatch(self):
        path = self.root / 'scatter.tif'
        save_field(ScatterField.from_array(np.full((4, 4), 0.1)), path)
        with self.assertRaises(ArgumentError):
            load_field(path, expected_kind='factor')

    def test_fields_need_tiff(self):
        with self.assertRaises(ArgumentError):
            save_field(ScatterField.from_array(np.full((4, 4), 0.1)), self.root / 'scatter.png')


class ErrorFlatteningTestCase(SimpleTestCase):

    def test_nested_paths(self):
        """Nested serializer errors become dotted field paths"""
        detail = {'lights': [{}, {'cone_sigma': ['Must be > 0.']}], 'pose': {'altitude': ['Required.']}}
        messages = flatten_errors(detail)
        self.assertIn('lights.1.cone_sigma: Must be > 0.', messages)
        self.assertIn('pose.altitude: Required.', messages)
