"""
Tests for the synthetic seafloor renderer
"""
import json
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from rest_framework import serializers

from estimation.config import ReferenceColor
from estimation.factor import compute_factor, estimate_allseafloor
from estimation.normalize import enhance
from estimation.scatter import estimate_scatter, reduce_array, reduce_field
from metrics.rmse import scale_invariant_rmse
from pipeline.manifest import read_manifest
from raster.exceptions import ArgumentError
from raster.fields import load_field
from raster.files import load_correspondence, load_frame, save_frame
from raster.planes import Frame
from raster.serializers import flatten_errors
from robust_stats.sampling import WindowSpec
from simulator.export import clipped_fraction, write_sequence
from simulator.render import render_frame
from simulator.scattering import (
    backscatter_field,
    cumulative_backscatter,
    integrate_backscatter,
    seafloor_distance,
)
from simulator.scene import (
    AlbedoMap,
    Camera,
    ContaminationSpec,
    LightSource,
    Pose,
    SceneSpec,
    WaterProperties,
)
from simulator.sequence import render_sequence, render_water_column, transect
from simulator.serializers import SceneSerializer, TrajectorySerializer

FIXTURES = Path(__file__).resolve().parent / 'fixtures'


def small_scene(rate=0.0, seed=0, beta=0.3, texture=0.15, smoothing=3.0, size=(0.05, 0.3), cosine=True,
                camera=None):
    lights = (
        LightSource((1.0, 0.0, 0.0), (-0.2, 0.0, 1.0), (20.0, 3.5, 2.6), 0.5),
        LightSource((-1.0, 0.0, 0.0), (0.2, 0.0, 1.0), (20.0, 3.5, 2.6), 0.5),
    )
    albedo = AlbedoMap.generate(
        (12.0, 8.0), 0.05, base=(0.55, 0.5, 0.45), texture=texture, smoothing=smoothing, seed=seed + 1
    )
    return SceneSpec(
        camera=camera or Camera(32, 24, 26.7),
        pose=Pose(3.0),
        lights=lights,
        water=WaterProperties(beta_scale=(beta,) * 3),
        albedo=albedo,
        contamination=ContaminationSpec(rate=rate, size=size),
        seed=seed,
        cosine_weighting=cosine,
    )


def fixture(name):
    return json.loads((FIXTURES / name).read_text())


class BackscatterTestCase(SimpleTestCase):

    def setUp(self):
        self.scene = small_scene()

    def test_cumulative_curve_saturates(self):
        """Most backscatter is collected within the first 5 m of the ray"""
        distances, cumulative = cumulative_backscatter(self.scene, (0.0, 0.0, 1.0), max_distance=20.0, steps=2000)
        self.assertTrue((np.diff(cumulative, axis=1) >= 0).all())
        near = cumulative[:, np.searchsorted(distances, 5.0)]
        total = cumulative[:, -1]
        self.assertTrue((total > 0).all())
        self.assertTrue((near >= 0.8 * total).all(), near / total)

    def test_quadrature_converges(self):
        """Default step count is within 1% of a 10x finer quadrature"""
        for direction in ((0.0, 0.0, 1.0), (0.4, -0.3, 1.0)):
            coarse = integrate_backscatter(self.scene, direction, steps=64)
            fine = integrate_backscatter(self.scene, direction, steps=640)
            np.testing.assert_array_less(np.abs(coarse - fine) / fine, 0.01)

    def test_no_scattering(self):
        scene = small_scene(beta=0.0)
        self.assertEqual(backscatter_field(scene).max(), 0.0)
        self.assertEqual(integrate_backscatter(scene, (0.0, 0.0, 1.0)).max(), 0.0)

    def test_steps_must_be_positive(self):
        with self.assertRaises(ArgumentError):
            integrate_backscatter(self.scene, (0.0, 0.0, 1.0), steps=0)
        with self.assertRaises(ArgumentError):
            backscatter_field(self.scene, steps=-1)
        with self.assertRaises(ArgumentError):
            WaterProperties(steps=0)

    def test_water_column_exceeds_seafloor_rays(self):
        """Integrating to max_distance collects at least as much as stopping at the seafloor"""
        self.assertTrue((backscatter_field(self.scene, water_column=True) >= backscatter_field(self.scene)).all())


class GeometryTestCase(SimpleTestCase):

    def setUp(self):
        self.scene = small_scene()

    def test_nadir_distance(self):
        distance = seafloor_distance(self.scene, np.array([[0.0, 0.0, 1.0]]))
        self.assertAlmostEqual(distance[0], 3.0)

    def test_pitched_ray_lands_ahead(self):
        pose = Pose(3.0, pitch=0.3)
        direction = np.array([[0.0, 0.0, 1.0]])
        distance = seafloor_distance(self.scene, direction, pose)[0]
        self.assertAlmostEqual(distance, 3.0 / np.cos(0.3))
        point = direction[0] * distance @ pose.rotation().T + np.array([0.0, 0.0, 3.0])
        np.testing.assert_allclose(point, [0.0, 3.0 * np.tan(0.3), 0.0], atol=1e-12)

    def test_horizontal_ray_misses(self):
        self.assertEqual(seafloor_distance(self.scene, np.array([[0.0, -1.0, 0.0]]))[0], np.inf)

    def test_pose_limits(self):
        with self.assertRaises(ArgumentError):
            Pose(0.0)
        with self.assertRaises(ArgumentError):
            Pose(3.0, pitch=np.pi / 2)


class RenderTestCase(SimpleTestCase):

    def test_exact_inversion(self):
        """Enhancing with the true fields returns the rendered albedo"""
        rng = np.random.default_rng(5)
        for seed in range(6):
            scene = small_scene(seed=seed, rate=0.1 if seed % 2 else 0.0)
            pose = Pose(
                rng.uniform(2.0, 4.0), pitch=rng.uniform(-0.2, 0.2), roll=rng.uniform(-0.2, 0.2),
                x=rng.uniform(-1.0, 1.0), y=rng.uniform(-0.5, 0.5),
            )
            frame, truth = render_frame(scene, pose=pose, rng=np.random.default_rng(seed))
            restored = enhance(frame, truth.scatter, truth.factor, epsilon=1e-12).stack()
            albedo = truth.albedo.stack()
            valid = truth.factor.coverage & (truth.factor.stack() >= 1e-4).all(axis=0) & (albedo > 0).all(axis=0)
            self.assertGreater(valid.mean(), 0.9)
            error = np.abs(restored - albedo)[:, valid] / albedo[:, valid]
            self.assertLess(error.max(), 1e-5)

    def test_exact_inversion_at_full_size(self):
        """100 randomized 512x512 frames invert exactly, the enhancement taking under 30 s"""
        rng = np.random.default_rng(17)
        water = WaterProperties(steps=4)
        elapsed, worst = 0.0, 0.0
        for seed in range(100):
            scene = replace(small_scene(seed=seed, camera=Camera(512, 512, 427.2)), water=water)
            pose = Pose(
                rng.uniform(2.0, 3.5), pitch=rng.uniform(-0.15, 0.15), roll=rng.uniform(-0.15, 0.15),
                x=rng.uniform(-1.0, 1.0), y=rng.uniform(-0.3, 0.3),
            )
            frame, truth = render_frame(scene, pose=pose, rng=np.random.default_rng(seed))
            started = time.perf_counter()
            restored = enhance(frame, truth.scatter, truth.factor, epsilon=1e-12).stack()
            elapsed += time.perf_counter() - started
            albedo = truth.albedo.stack()
            valid = truth.factor.coverage & (truth.factor.stack() >= 1e-4).all(axis=0) & (albedo > 0).all(axis=0)
            self.assertGreater(valid.mean(), 0.9)
            worst = max(worst, (np.abs(restored - albedo)[:, valid] / albedo[:, valid]).max())
        self.assertLess(worst, 1e-5)
        self.assertLess(elapsed, 30.0)

    def test_linear_in_albedo(self):
        """Halving the albedo halves the direct term and leaves backscatter alone"""
        scene = small_scene()
        darker = scene.with_albedo(scene.albedo.scaled(0.5))
        frame, truth = render_frame(scene)
        half, half_truth = render_frame(darker)
        scatter = truth.scatter.stack()
        np.testing.assert_array_equal(half_truth.scatter.stack(), scatter)
        np.testing.assert_allclose(half.stack() - scatter, 0.5 * (frame.stack() - scatter), rtol=1e-12, atol=1e-15)

    def test_scatter_independent_of_albedo(self):
        first = render_frame(small_scene(seed=1))[1]
        second = render_frame(small_scene(seed=2, texture=0.4))[1]
        np.testing.assert_array_equal(first.scatter.stack(), second.scatter.stack())

    def test_observed_exceeds_scatter(self):
        frame, truth = render_frame(small_scene(rate=0.2))
        self.assertTrue((frame.stack() >= truth.scatter.stack()).all())

    def test_contamination_coverage(self):
        frame, truth = render_frame(small_scene(rate=0.2))
        coverage = truth.contamination_mask.mean()
        self.assertGreaterEqual(coverage, 0.2)
        self.assertLess(coverage, 0.3)
        changed = (truth.albedo.stack() != truth.clean_albedo.stack()).any(axis=0)
        self.assertFalse(changed[~truth.contamination_mask].any())

    def test_cosine_toggle(self):
        """Dropping the incidence cosine can only brighten the direct term"""
        with_cosine = render_frame(small_scene())[1].factor.stack()
        without = render_frame(small_scene(cosine=False))[1].factor.stack()
        self.assertTrue((without >= with_cosine).all())
        self.assertTrue((without > with_cosine).any())

    def test_footprint_outside_map(self):
        with self.assertRaises(ArgumentError):
            render_frame(small_scene(), pose=Pose(3.0, x=50.0))

    def test_single_channel_scene(self):
        scene = SceneSpec(
            camera=Camera(16, 12, 14.0),
            pose=Pose(2.0),
            lights=(LightSource((0.5, 0.0, 0.0), (0.0, 0.0, 1.0), 1.0, 0.6),),
            water=WaterProperties(eta=0.4, beta_scale=0.2),
            albedo=AlbedoMap.uniform((8.0, 8.0), 0.1, 0.5),
        )
        frame, truth = render_frame(scene)
        self.assertEqual(frame.channels, 1)
        self.assertEqual(truth.correspondence.shape, (2, 12, 16))


class SequenceTestCase(SimpleTestCase):

    def test_deterministic(self):
        scene = small_scene(rate=0.2, seed=9)
        poses = transect((-0.5, 0.0), (0.25, 0.0), 4, 3.0)
        first = render_sequence(scene, poses)
        second = render_sequence(scene, poses)
        for a, b in zip(first.frames, second.frames):
            np.testing.assert_array_equal(a.stack(), b.stack())

    def test_uncontaminated_frames_share_albedo(self):
        scene = small_scene(rate=0.0)
        sequence = render_sequence(scene, [scene.pose] * 3)
        reference = sequence.truths[0].albedo.stack()
        for truth in sequence.truths:
            np.testing.assert_array_equal(truth.albedo.stack(), reference)
            self.assertFalse(truth.contamination_mask.any())

    def test_contamination_differs_per_frame(self):
        scene = small_scene(rate=0.2)
        sequence = render_sequence(scene, [scene.pose] * 2)
        self.assertFalse(np.array_equal(sequence.truths[0].contamination_mask, sequence.truths[1].contamination_mask))

    def test_transect_correspondence(self):
        """Correspondence maps shift by exactly the along-track step"""
        sequence = render_sequence(small_scene(), transect((-1.0, 0.5), (0.4, 0.0), 3, 3.0))
        maps = sequence.correspondences
        for previous, current in zip(maps, maps[1:]):
            np.testing.assert_allclose(current[0] - previous[0], 0.4, atol=1e-9)
            np.testing.assert_allclose(current[1], previous[1], atol=1e-9)

    def test_transect_needs_poses(self):
        with self.assertRaises(ArgumentError):
            transect((0.0, 0.0), (1.0, 0.0), 0, 3.0)
        with self.assertRaises(ArgumentError):
            render_sequence(small_scene(), [])

    def test_water_column_feeds_scatter_estimate(self):
        """The median over particle-laden water frames recovers the particle-free scatter"""
        frames, scatter = render_water_column(small_scene(), count=7, particle_rate=0.05, seed=3)
        estimate = estimate_scatter(frames).stack()
        exact = np.isclose(estimate, scatter, rtol=1e-12, atol=0).all(axis=0)
        self.assertGreaterEqual(exact.mean(), 0.99)

    def test_water_column_arguments(self):
        with self.assertRaises(ArgumentError):
            render_water_column(small_scene(), count=0)
        with self.assertRaises(ArgumentError):
            render_water_column(small_scene(), particle_rate=0.5)


class RobustRecoveryTestCase(SimpleTestCase):
    """Fixed pose, 7 frames, 20% transient contamination"""

    spec = WindowSpec(n=7, spatial_radius=1, downsample_factor=4)

    def render(self, seed):
        scene = small_scene(
            rate=0.2, seed=seed, texture=0.05, smoothing=1.0, size=(0.01, 0.04), camera=Camera(64, 48, 53.4)
        )
        return render_sequence(scene, [scene.pose] * 7)

    def test_allseafloor_ignores_transients(self):
        """The all-seafloor image matches the contamination-free one at >= 97% of reduced pixels"""
        sequence = self.render(seed=4)
        truth = sequence.truths[0]
        clean = truth.factor.stack() * truth.clean_albedo.stack() + truth.scatter.stack()
        expected = reduce_array(clean, self.spec)
        estimate = estimate_allseafloor(sequence.frames, self.spec).stack()
        close = (np.abs(estimate - expected) <= 0.05 * expected).all(axis=0)
        self.assertGreaterEqual(close.mean(), 0.97)

    def test_enhanced_frame_matches_albedo(self):
        """Enhancing with an estimated factor recovers the albedo up to a per-channel scale"""
        reference = ReferenceColor((0.55, 0.5, 0.45))
        errors, fractions = [], []
        for seed in range(20):
            sequence = self.render(seed)
            truth = sequence.truths[3]
            allseafloor = estimate_allseafloor(sequence.frames, self.spec)
            factor = compute_factor(allseafloor, reduce_field(truth.scatter, self.spec), reference)
            restored = enhance(sequence.frames[3], truth.scatter, factor)
            albedo = truth.albedo.stack()
            errors.append(scale_invariant_rmse(restored, truth.albedo, factor.coverage).max())
            relative = np.abs(restored.stack() - albedo) / np.maximum(albedo, 1e-6)
            fractions.append((relative < 0.1).all(axis=0)[factor.coverage].mean())
        self.assertLess(np.mean(errors), 0.05)
        self.assertGreaterEqual(np.mean(fractions), 0.95)


class SceneDocumentTestCase(SimpleTestCase):

    def test_example_scene(self):
        serializer = SceneSerializer(data=fixture('example_scene.json'))
        self.assertTrue(serializer.is_valid(), serializer.errors)
        scene = serializer.save()
        self.assertEqual(scene.camera.width, 96)
        self.assertEqual(len(scene.lights), 2)
        self.assertEqual(scene.channels, 3)
        self.assertEqual(scene.water_column.count, 7)

    def test_error_paths(self):
        """Schema violations are reported by field path"""
        document = fixture('example_scene.json')
        document['pose']['altitude'] = 0
        document['lights'][1]['cone_sigma'] = -1
        document['contamination']['rate'] = 0.6
        serializer = SceneSerializer(data=document)
        self.assertFalse(serializer.is_valid())
        messages = flatten_errors(serializer.errors)
        paths = {message.split(':')[0] for message in messages}
        self.assertIn('pose.altitude', paths)
        self.assertIn('lights.1.cone_sigma', paths)
        self.assertIn('contamination.rate', paths)

    def test_schema_version(self):
        document = fixture('example_scene.json')
        document['schema'] = 2
        serializer = SceneSerializer(data=document)
        self.assertFalse(serializer.is_valid())
        self.assertIn('schema', serializer.errors)

    def test_channel_mismatch(self):
        document = fixture('example_scene.json')
        document['water']['eta'] = [0.5]
        document['albedo']['base'] = [0.5]
        document['lights'][0]['intensity'] = [1.0, 2.0, 3.0]
        self.assertTrue(SceneSerializer(data=document).is_valid())
        document['water']['eta'] = [0.5, 0.4]
        self.assertFalse(SceneSerializer(data=document).is_valid())

    def test_albedo_from_image(self):
        document = fixture('example_scene.json')
        with tempfile.TemporaryDirectory() as tmp:
            save_frame(np.full((3, 20, 40), 0.25), Path(tmp) / 'floor.png')
            document['albedo'] = {'image': 'floor.png', 'texel_size': 0.5, 'origin': [-10.0, -5.0]}
            serializer = SceneSerializer(data=document, context={'base_dir': tmp})
            self.assertTrue(serializer.is_valid(), serializer.errors)
            scene = serializer.save()
        self.assertEqual(scene.albedo.extent(), (-10.0, 10.0, -5.0, 5.0))
        np.testing.assert_allclose(scene.albedo.values, 0.25, atol=1e-4)

    def test_albedo_needs_one_source(self):
        document = fixture('example_scene.json')
        document['albedo']['image'] = 'floor.png'
        serializer = SceneSerializer(data=document)
        self.assertFalse(serializer.is_valid())
        self.assertIn('albedo', serializer.errors)


class TrajectoryDocumentTestCase(SimpleTestCase):

    def test_example_transect(self):
        serializer = TrajectorySerializer(data=fixture('example_trajectory.json'))
        self.assertTrue(serializer.is_valid(), serializer.errors)
        poses = serializer.save()
        self.assertEqual(len(poses), 20)
        self.assertAlmostEqual(poses[1].x - poses[0].x, 0.4)

    def test_explicit_poses(self):
        serializer = TrajectorySerializer(data={'schema': 1, 'poses': [{'altitude': 2.0}, {'altitude': 2.5, 'x': 1.0}]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual([pose.altitude for pose in serializer.save()], [2.0, 2.5])

    def test_exactly_one_form(self):
        document = fixture('example_trajectory.json')
        document['poses'] = [{'altitude': 2.0}]
        self.assertFalse(TrajectorySerializer(data=document).is_valid())
        self.assertFalse(TrajectorySerializer(data={'schema': 1}).is_valid())

    def test_bad_pose(self):
        serializer = TrajectorySerializer(data={'schema': 1, 'poses': [{'altitude': 2.0}, {'altitude': -1.0}]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('poses.1.altitude', ' '.join(flatten_errors(serializer.errors)))


class ExportTestCase(SimpleTestCase):

    def test_layout(self):
        scene = small_scene(rate=0.1)
        sequence = render_sequence(scene, transect((-0.5, 0.0), (0.3, 0.0), 3, 3.0))
        water, _ = render_water_column(scene, count=3)
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / 'run'
            manifest = write_sequence(sequence, out, water_frames=water)
            frames = read_manifest(manifest)
            self.assertEqual([path.name for path in frames], ['frame_0000.png', 'frame_0001.png', 'frame_0002.png'])
            self.assertEqual(len(read_manifest(out / 'truth_manifest.txt')), 3)
            self.assertEqual(len(read_manifest(out / 'water_manifest.txt')), 3)

            loaded = load_frame(frames[1])
            np.testing.assert_allclose(loaded.stack(), np.clip(sequence.frames[1].stack(), 0, 1), atol=1e-4)

            factor = load_field(out / 'gt' / 'factor_0001.tif', expected_kind='factor')
            np.testing.assert_array_equal(factor.valid, sequence.truths[1].factor.valid)
            np.testing.assert_allclose(factor.stack(), sequence.truths[1].factor.stack(), rtol=0, atol=1e-4)

            registration = json.loads((out / 'registration.json').read_text())
            self.assertEqual(registration['schema'], 1)
            self.assertEqual(registration['correspondence'][2], 'corr/corr_0002.tif')
            corr = load_correspondence(out / registration['correspondence'][2])
            np.testing.assert_allclose(corr, sequence.truths[2].correspondence, atol=1e-5)

    def test_saturated_frames_warn(self):
        """Frames over full scale are clipped on disk and reported"""
        scene = small_scene()
        sequence = render_sequence(scene, transect((-0.2, 0.0), (0.2, 0.0), 3, 1.0))
        self.assertGreater(clipped_fraction(sequence.frames[0], sequence.truths[0].seafloor_mask), 0.0)
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertLogs('simulator', level='WARNING') as logs:
                write_sequence(sequence, Path(tmp) / 'run')
        self.assertEqual(len(logs.records), 1)
        self.assertIn('3 of 3 frames exceed full scale', logs.output[0])

    def test_clipped_fraction(self):
        values = np.full((3, 4, 5), 0.5)
        values[1, 0, :2] = 1.2
        frame = Frame.from_array(values)
        self.assertAlmostEqual(clipped_fraction(frame), 2 / 20)
        region = np.zeros((4, 5), dtype=bool)
        region[0] = True
        self.assertAlmostEqual(clipped_fraction(frame, region), 2 / 5)
        self.assertEqual(clipped_fraction(frame, np.zeros((4, 5), dtype=bool)), 0.0)

    def test_validation_error_type(self):
        """Document errors raised during creation stay DRF validation errors"""
        document = fixture('example_scene.json')
        document['albedo']['size'] = [1000.0, 0.0]
        serializer = SceneSerializer(data=document)
        self.assertFalse(serializer.is_valid())
        with self.assertRaises(serializers.ValidationError):
            serializer.is_valid(raise_exception=True)
