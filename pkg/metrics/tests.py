"""
Tests for registration, consistency error, ground-truth RMSE and compositing
"""
import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from rest_framework import serializers

from estimation.config import EnhancementConfig
from metrics.composite import composite
from metrics.consistency import consistency_error
from metrics.registration import Registration, backward_map, load_registration, save_registration
from metrics.rmse import scale_invariant_rmse
from metrics.serializers import ConsistencyReportSerializer
from pipeline.stream import reference_enhance
from raster.exceptions import ArgumentError, MetricError
from raster.files import save_correspondence
from raster.parallel import configure
from raster.planes import Frame
from robust_stats.sampling import WindowSpec
from simulator.scene import AlbedoMap, Camera, LightSource, Pose, SceneSpec, WaterProperties
from simulator.sequence import render_sequence, transect


def translation(tx, ty=0.0):
    return np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def texture(shape, seed=0):
    return 0.2 + 0.6 * np.random.default_rng(seed).random(shape)


def strip_frames(count=3, step=10, width=40, noise=0.02, seed=0):
    """Overlapping crops of one texture, each with its own noise"""
    rng = np.random.default_rng(seed)
    base = texture((3, 30, width + step * (count - 1)), seed)
    frames = [
        Frame.from_array(base[:, :, step * i:step * i + width] + noise * rng.random((3, 30, width)), index=i)
        for i in range(count)
    ]
    registration = Registration(tuple(translation(step * i) for i in range(count)), (30, base.shape[2]))
    return frames, registration


def coordinate_map(width, height, origin=(1.0, 2.0), gsd=0.05, nan_rows=0):
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    coordinates = np.stack([origin[0] + gsd * cols, origin[1] - gsd * rows])
    if nan_rows:
        coordinates[:, :nan_rows] = np.nan
    return coordinates


class RegistrationTestCase(SimpleTestCase):

    def test_fit_from_correspondence(self):
        """A north-up map at the mosaic cell size registers with the identity"""
        registration = Registration.from_correspondence([coordinate_map(20, 12)])
        matrix = registration.homographies[0] / registration.homographies[0][2, 2]
        np.testing.assert_allclose(matrix, np.eye(3), atol=1e-6)
        self.assertEqual(registration.mosaic_shape, (12, 20))

    def test_shifted_maps(self):
        maps = [coordinate_map(20, 12), coordinate_map(20, 12, origin=(1.5, 2.0))]
        registration = Registration.from_correspondence(maps)
        matrix = registration.homographies[1] / registration.homographies[1][2, 2]
        np.testing.assert_allclose(matrix, translation(10.0), atol=1e-6)
        self.assertEqual(registration.mosaic_shape, (12, 30))

    def test_missing_pixels_ignored(self):
        registration = Registration.from_correspondence([coordinate_map(20, 12, nan_rows=4)])
        matrix = registration.homographies[0] / registration.homographies[0][2, 2]
        np.testing.assert_allclose(matrix, translation(0.0, -4.0), atol=1e-6)

    def test_rejects_degenerate_input(self):
        with self.assertRaises(ArgumentError):
            Registration.from_correspondence([])
        with self.assertRaises(ArgumentError):
            Registration.from_correspondence([np.full((2, 4, 4), np.nan)])
        with self.assertRaises(ArgumentError):
            Registration((np.zeros((3, 3)),), (4, 4))

    def test_documents(self):
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            registration = Registration((translation(3.0), translation(5.0, 1.0)), (10, 20))
            save_registration(registration, tmp / 'homographies.json')
            loaded = load_registration(tmp / 'homographies.json')
            np.testing.assert_array_equal(loaded.homographies[1], translation(5.0, 1.0))
            self.assertEqual(loaded.mosaic_shape, (10, 20))

            save_correspondence(coordinate_map(20, 12), tmp / 'corr' / 'corr_0000.tif')
            (tmp / 'maps.json').write_text(json.dumps({'schema': 1, 'correspondence': ['corr/corr_0000.tif']}))
            self.assertEqual(load_registration(tmp / 'maps.json').mosaic_shape, (12, 20))

            (tmp / 'both.json').write_text(json.dumps({
                'schema': 1, 'correspondence': ['corr/corr_0000.tif'],
                'homographies': [np.eye(3).ravel().tolist()], 'mosaic_shape': [4, 4],
            }))
            with self.assertRaises(serializers.ValidationError):
                load_registration(tmp / 'both.json')

    def test_identity_mapping_is_exact(self):
        values = texture((3, 8, 10))
        warp = backward_map(values, np.eye(3), (8, 10))
        self.assertTrue(warp.valid.all())
        np.testing.assert_array_equal(warp.samples, values)

    def test_minified_frame_uses_coarse_level(self):
        """A 2:1 minification samples the box-averaged level, so a fine checkerboard turns grey"""
        rows, cols = np.mgrid[0:32, 0:32]
        checker = ((rows + cols) % 2).astype(np.float64)[np.newaxis]
        warp = backward_map(checker, np.diag([0.5, 0.5, 1.0]), (16, 16))
        np.testing.assert_allclose(warp.samples[:, warp.valid], 0.5, atol=1e-12)


class ConsistencyTestCase(SimpleTestCase):

    def tearDown(self):
        configure(None)

    def test_duplicated_frames(self):
        values = texture((3, 12, 16))
        frames = [Frame.from_array(values, index=i) for i in range(2)]
        report = consistency_error(frames, Registration.identity(2, (12, 16)))
        self.assertEqual(report.errors, [0.0, 0.0, 0.0])
        self.assertEqual(report.overlap_pixel_count, 12 * 16)

    def test_offset_and_scale_invariance(self):
        frames, registration = strip_frames()
        base = consistency_error(frames, registration).errors
        self.assertTrue(all(error > 0 for error in base))
        shifted = [Frame.from_array(frame.stack() + 0.3, index=frame.index) for frame in frames]
        scaled = [Frame.from_array(frame.stack() * 2.5, index=frame.index) for frame in frames]
        np.testing.assert_allclose(consistency_error(shifted, registration).errors, base, rtol=1e-9)
        np.testing.assert_allclose(consistency_error(scaled, registration).errors, base, rtol=1e-9)

    def test_more_noise_scores_worse(self):
        quiet = consistency_error(*strip_frames(noise=0.01)).errors
        loud = consistency_error(*strip_frames(noise=0.1)).errors
        self.assertTrue(all(a < b for a, b in zip(quiet, loud)))

    def test_rmse_norm(self):
        frames, registration = strip_frames()
        mae = consistency_error(frames, registration).errors
        rmse = consistency_error(frames, registration, norm='rmse')
        self.assertEqual(rmse.norm, 'rmse')
        self.assertTrue(all(a <= b for a, b in zip(mae, rmse.errors)))
        with self.assertRaises(ArgumentError):
            consistency_error(frames, registration, norm='max')

    def test_no_overlap(self):
        frames = [Frame.from_array(texture((3, 10, 10), i), index=i) for i in range(2)]
        registration = Registration((translation(0.0), translation(20.0)), (10, 30))
        with self.assertRaises(MetricError):
            consistency_error(frames, registration)

    def test_constant_mosaic(self):
        """Disagreeing constant frames have no mosaic spread to normalize by"""
        frames = [Frame.from_array(np.full((3, 8, 8), value)) for value in (0.4, 0.5)]
        with self.assertRaises(MetricError):
            consistency_error(frames, Registration.identity(2, (8, 8)))

    def test_argument_checks(self):
        frames, registration = strip_frames()
        with self.assertRaises(ArgumentError):
            consistency_error(frames[:1], Registration.identity(1, (30, 40)))
        with self.assertRaises(ArgumentError):
            consistency_error(frames[:2], registration)
        with self.assertRaises(ArgumentError):
            consistency_error(frames, registration, region_mask=np.ones((5, 5), dtype=bool))

    def test_regions(self):
        frames, registration = strip_frames()
        mask = np.zeros(registration.mosaic_shape, dtype=bool)
        mask[:15] = True
        report = consistency_error(frames, registration, region_mask=mask)
        inside, outside = report.regions['inside'], report.regions['outside']
        self.assertEqual(inside.overlap_pixel_count + outside.overlap_pixel_count, report.overlap_pixel_count)
        empty = consistency_error(frames, registration, region_mask=np.zeros_like(mask))
        self.assertIsNone(empty.regions['inside'])
        self.assertEqual(empty.regions['outside'].errors, empty.errors)

    def test_per_frame_breakdown(self):
        frames, registration = strip_frames(count=2)
        frames.append(Frame.from_array(texture((3, 30, 40), 9), index=2))
        registration = Registration(registration.homographies + (translation(100.0),), (30, 140))
        report = consistency_error(frames, registration)
        self.assertEqual(len(report.per_frame), 3)
        self.assertIsNone(report.per_frame[2])
        self.assertTrue(all(value > 0 for value in report.per_frame[0]))

    def test_thread_count_invariance(self):
        frames, registration = strip_frames(count=4)
        configure(1)
        single = consistency_error(frames, registration)
        configure(4)
        multi = consistency_error(frames, registration)
        self.assertEqual(single.errors, multi.errors)
        self.assertEqual(single.per_frame, multi.per_frame)

    def test_report_document(self):
        frames, registration = strip_frames()
        document = consistency_error(frames, registration).as_dict()
        self.assertEqual(document['schema'], 1)
        self.assertEqual(document['mosaic_shape'], [30, 60])
        serializer = ConsistencyReportSerializer(data=json.loads(json.dumps(document)))
        self.assertTrue(serializer.is_valid(), serializer.errors)


class ScaleInvariantRmseTestCase(SimpleTestCase):

    def setUp(self):
        self.truth = texture((3, 100, 100), 4)

    def test_identical(self):
        np.testing.assert_array_equal(scale_invariant_rmse(self.truth, self.truth), 0.0)

    def test_scale_absorbed(self):
        np.testing.assert_allclose(scale_invariant_rmse(2.0 * self.truth, self.truth), 0.0, atol=1e-12)
        np.testing.assert_allclose(scale_invariant_rmse(Frame.from_array(0.3 * self.truth), self.truth), 0.0, atol=1e-12)

    def test_gaussian_noise(self):
        """Additive noise of spread sigma gives an error near sigma / mean(truth)"""
        sigma = 0.02
        expected = sigma / self.truth.mean(axis=(1, 2))
        for seed in range(5):
            noisy = self.truth + np.random.default_rng(seed).normal(0.0, sigma, self.truth.shape)
            np.testing.assert_allclose(scale_invariant_rmse(noisy, self.truth), expected, rtol=0.2)

    def test_mask(self):
        restored = self.truth.copy()
        restored[:, :10] = 5.0
        mask = np.ones((100, 100), dtype=bool)
        mask[:10] = False
        np.testing.assert_allclose(scale_invariant_rmse(restored, self.truth, mask), 0.0, atol=1e-12)
        with self.assertRaises(MetricError):
            scale_invariant_rmse(restored, self.truth, np.zeros((100, 100), dtype=bool))

    def test_degenerate(self):
        restored = self.truth.copy()
        restored[1] = 0.0
        with self.assertRaises(MetricError):
            scale_invariant_rmse(restored, self.truth)
        with self.assertRaises(ArgumentError):
            scale_invariant_rmse(self.truth[:, :50], self.truth)


class CompositeTestCase(SimpleTestCase):

    def test_empty(self):
        with self.assertRaises(ArgumentError):
            composite([], Registration.identity(1, (4, 4)))

    def test_single_frame(self):
        values = texture((3, 24, 32))
        mosaic = composite([Frame.from_array(values)], Registration.identity(1, (24, 32)))
        np.testing.assert_allclose(mosaic.stack(), values, atol=1e-12)

    def test_identical_frames(self):
        values = texture((3, 24, 32), 2)
        frames = [Frame.from_array(values, index=i) for i in range(2)]
        np.testing.assert_allclose(composite(frames, Registration.identity(2, (24, 32))).stack(), values, atol=1e-12)

    def test_constants_conserved(self):
        frames = [Frame.from_array(np.full((3, 16, 32), 0.35), index=i) for i in range(3)]
        registration = Registration(tuple(translation(8.0 * i) for i in range(3)), (16, 64))
        mosaic = composite(frames, registration).stack()
        np.testing.assert_allclose(mosaic[:, :, :48], 0.35, atol=1e-12)
        self.assertEqual(mosaic[:, :, 48:].max(), 0.0)

    def test_no_hard_seam(self):
        """Frames offset by d blend across the overlap with steps of about d / overlap width"""
        low, high, overlap = 0.4, 0.6, 16
        frames = [Frame.from_array(np.full((1, 16, 32), value)) for value in (low, high)]
        registration = Registration((translation(0.0), translation(16.0)), (16, 48))
        row = composite(frames, registration).stack()[0, 8]
        self.assertAlmostEqual(row[0], low)
        self.assertAlmostEqual(row[-1], high)
        self.assertLessEqual(np.abs(np.diff(row)).max(), 1.5 * (high - low) / overlap)


class TransectConsistencyTestCase(SimpleTestCase):
    """Enhanced frames agree far better than raw frames on a simulated survey line"""

    def test_enhanced_beats_raw(self):
        lights = (
            LightSource((1.0, 0.0, 0.0), (-0.2, 0.0, 1.0), (20.0, 3.5, 2.6), 0.5),
            LightSource((-1.0, 0.0, 0.0), (0.2, 0.0, 1.0), (20.0, 3.5, 2.6), 0.5),
        )
        scene = SceneSpec(
            camera=Camera(48, 36, 40.0),
            pose=Pose(3.0),
            lights=lights,
            water=WaterProperties(),
            albedo=AlbedoMap.generate((14.0, 6.0), 0.05, base=(0.55, 0.5, 0.45), texture=0.15, smoothing=3.0, seed=7),
            seed=11,
        )
        sequence = render_sequence(scene, transect((-2.8, 0.0), (0.3, 0.0), 20, 3.0))
        registration = Registration.from_correspondence(sequence.correspondences)
        config = EnhancementConfig(window=WindowSpec(n=7, spatial_radius=1, downsample_factor=4))
        enhanced = [emission.frame for emission in reference_enhance(sequence.frames, sequence.truths[0].scatter, config)]

        raw = consistency_error(sequence.frames, registration).errors
        restored = consistency_error(enhanced, registration).errors
        for before, after in zip(raw, restored):
            self.assertLess(after, 0.5 * before)
