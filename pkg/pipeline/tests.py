"""
Tests for streaming enhancement and batch runs
"""
import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from estimation.config import EnhancementConfig
from pipeline.batch import REPORT_NAME, run_batch
from pipeline.manifest import read_manifest, write_manifest
from pipeline.serializers import RunReportSerializer
from pipeline.stream import StreamState, reference_enhance, window_bounds
from raster.exceptions import ArgumentError, ImageIOError, StreamError
from raster.files import save_frame
from raster.planes import Frame, ScatterField
from robust_stats.sampling import WindowSpec


def small_config(n=7, **kwargs):
    return EnhancementConfig(window=WindowSpec(n=n, spatial_radius=1, downsample_factor=4), **kwargs)


def random_frames(count, seed=0, shape=(3, 16, 16)):
    rng = np.random.default_rng(seed)
    return [Frame.from_array(0.1 + 0.6 * rng.random(shape), index=i) for i in range(count)]


def zero_scatter(shape=(3, 16, 16)):
    return ScatterField.from_array(np.zeros(shape))


class WindowBoundsTestCase(SimpleTestCase):

    def test_interior(self):
        self.assertEqual(window_bounds(10, 3, 29, 3), (7, 13))

    def test_shrunk_ends(self):
        self.assertEqual(window_bounds(0, 3, 29, 3), (0, 3))
        self.assertEqual(window_bounds(29, 3, 29, 3), (26, 29))

    def test_grows_to_minimum(self):
        """Windows shorter than three frames take the nearest three"""
        self.assertEqual(window_bounds(0, 0, 9, 3), (0, 2))
        self.assertEqual(window_bounds(5, 0, 9, 3), (4, 6))
        self.assertEqual(window_bounds(9, 0, 9, 3), (7, 9))
        self.assertEqual(window_bounds(1, 3, 2, 3), (0, 2))


class StreamStateTestCase(SimpleTestCase):
    """push/flush emission rules"""

    def test_warm_up(self):
        """Six pushes emit nothing; the seventh emits frames 0 to 3"""
        state = StreamState(zero_scatter(), small_config())
        frames = random_frames(7)
        for frame in frames[:6]:
            self.assertEqual(state.push(frame), [])
        emitted = state.push(frames[6])
        self.assertEqual([emission.position for emission in emitted], [0, 1, 2, 3])
        self.assertEqual(emitted[3].window, (0, 6))
        self.assertEqual(emitted[0].window, (0, 3))

    def test_one_output_per_input(self):
        state = StreamState(zero_scatter(), small_config())
        outputs = []
        for frame in random_frames(7):
            outputs.extend(state.push(frame))
        outputs.extend(state.flush())
        self.assertEqual([emission.position for emission in outputs], list(range(7)))

    def test_three_frame_stream(self):
        """Every frame of a 3-frame stream uses the whole stream"""
        state = StreamState(zero_scatter(), small_config())
        outputs = []
        for frame in random_frames(3):
            outputs.extend(state.push(frame))
        self.assertEqual(outputs, [])
        outputs.extend(state.flush())
        self.assertEqual(len(outputs), 3)
        self.assertTrue(all(emission.window == (0, 2) for emission in outputs))

    def test_two_frame_stream(self):
        state = StreamState(zero_scatter(), small_config())
        for frame in random_frames(2):
            state.push(frame)
        with self.assertRaises(StreamError):
            state.flush()

    def test_layout_mismatch(self):
        state = StreamState(zero_scatter(), small_config())
        state.push(random_frames(1)[0])
        with self.assertRaises(StreamError):
            state.push(random_frames(1, shape=(3, 16, 8))[0])

    def test_scatter_mismatch(self):
        state = StreamState(zero_scatter((3, 8, 8)), small_config())
        with self.assertRaises(StreamError):
            state.push(random_frames(1)[0])

    def test_push_after_flush(self):
        state = StreamState(zero_scatter(), small_config())
        for frame in random_frames(3):
            state.push(frame)
        state.flush()
        with self.assertRaises(StreamError):
            state.push(random_frames(1)[0])

    def test_identical_frames_recover_albedo(self):
        """A stream of identical A*F + S frames enhances back to A"""
        albedo = 0.5
        factor = np.array([0.8, 0.6, 0.4]).reshape(3, 1, 1) * np.ones((3, 16, 16))
        scatter = np.array([0.05, 0.03, 0.02]).reshape(3, 1, 1) * np.ones((3, 16, 16))
        frame = Frame.from_array(albedo * factor + scatter)
        state = StreamState(ScatterField.from_array(scatter), small_config())
        outputs = []
        for _ in range(9):
            outputs.extend(state.push(frame))
        outputs.extend(state.flush())
        self.assertEqual(len(outputs), 9)
        for emission in outputs:
            np.testing.assert_allclose(emission.frame.stack(), albedo, rtol=1e-12)

    def test_matches_reference(self):
        """Streaming output is bit-identical to materializing every window"""
        frames = random_frames(30, seed=5)
        scatter = ScatterField.from_array(np.full((3, 16, 16), 0.05))
        config = small_config()
        state = StreamState(scatter, config)
        streamed = []
        for frame in frames:
            streamed.extend(state.push(frame))
        streamed.extend(state.flush())
        reference = reference_enhance(frames, scatter, config)
        self.assertEqual(len(streamed), len(reference))
        for ours, theirs in zip(streamed, reference):
            self.assertEqual(ours.window, theirs.window)
            np.testing.assert_array_equal(ours.frame.stack(), theirs.frame.stack())
            np.testing.assert_array_equal(ours.factor.stack(), theirs.factor.stack())

    def test_single_frame_window(self):
        """n = 1 still estimates from the three nearest frames"""
        frames = random_frames(6, seed=8)
        config = small_config(n=1)
        state = StreamState(zero_scatter(), config)
        streamed = []
        for frame in frames:
            streamed.extend(state.push(frame))
        streamed.extend(state.flush())
        reference = reference_enhance(frames, zero_scatter(), config)
        self.assertEqual([e.window for e in streamed], [e.window for e in reference])
        for ours, theirs in zip(streamed, reference):
            np.testing.assert_array_equal(ours.frame.stack(), theirs.frame.stack())

    def test_static_factor(self):
        """Static mode reuses one factor for the whole stream"""
        frames = random_frames(10, seed=6)
        config = small_config(static_factor=True)
        state = StreamState(zero_scatter(), config)
        outputs = []
        for frame in frames:
            outputs.extend(state.push(frame))
        outputs.extend(state.flush())
        self.assertTrue(all(emission.factor is outputs[0].factor for emission in outputs))
        reference = reference_enhance(frames, zero_scatter(), config)
        np.testing.assert_array_equal(outputs[9].frame.stack(), reference[9].frame.stack())

    def test_replace_scatter(self):
        """Frames emitted after the swap use the new scatter field"""
        frames = random_frames(10, seed=7)
        replaced = StreamState(zero_scatter(), small_config())
        untouched = StreamState(zero_scatter(), small_config())
        for frame in frames[:7]:
            replaced.push(frame)
            untouched.push(frame)
        new_scatter = ScatterField.from_array(np.full((3, 16, 16), 0.05))
        replaced.replace_scatter(new_scatter)
        after = replaced.push(frames[7])[0]
        self.assertEqual(after.position, 4)
        expected = reference_enhance(frames[:8], new_scatter, small_config())[4]
        np.testing.assert_array_equal(after.frame.stack(), expected.frame.stack())
        self.assertFalse(np.array_equal(after.frame.stack(), untouched.push(frames[7])[0].frame.stack()))
        with self.assertRaises(StreamError):
            state.replace_scatter(zero_scatter((3, 8, 8)))


class ManifestTestCase(SimpleTestCase):

    def test_comments_and_relative_paths(self):
        with tempfile.TemporaryDirectory() as tmp:
            manifest = Path(tmp) / 'frames.txt'
            manifest.write_text('# survey leg 1\nframe_0000.png\n\n  frame_0001.png\n#frame_0002.png\n')
            self.assertEqual(read_manifest(manifest), [Path(tmp) / 'frame_0000.png', Path(tmp) / 'frame_0001.png'])

    def test_write_relative(self):
        with tempfile.TemporaryDirectory() as tmp:
            manifest = Path(tmp) / 'out' / 'manifest.txt'
            write_manifest([Path(tmp) / 'out' / 'a.png'], manifest, header='test')
            self.assertEqual(manifest.read_text(), '# test\na.png\n')

    def test_missing_manifest(self):
        with self.assertRaises(ImageIOError):
            read_manifest('/nonexistent/manifest.txt')


class RunBatchTestCase(SimpleTestCase):
    """End-to-end batch runs over files on disk"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.paths = []
        for frame in random_frames(10, seed=9):
            path = self.root / 'input' / f"frame_{frame.index:04d}.png"
            save_frame(frame, path)
            self.paths.append(path)
        self.scatter = ScatterField.from_array(np.full((3, 16, 16), 0.02))

    def tearDown(self):
        self.tmp.cleanup()

    def test_ten_frames(self):
        out_dir = self.root / 'enhanced'
        report = run_batch(self.paths, self.scatter, small_config(), out_dir)
        self.assertEqual(report.frames, 10)
        self.assertEqual(report.window_sizes, [4, 5, 6, 7, 7, 7, 7, 6, 5, 4])
        for index in range(10):
            self.assertTrue((out_dir / f"frame_{index:04d}_enhanced.png").exists())
            self.assertTrue((out_dir / f"frame_{index:04d}_coverage.png").exists())
        document = json.loads((out_dir / REPORT_NAME).read_text())
        serializer = RunReportSerializer(data=document)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertTrue(document['complete'])
        self.assertEqual(document['config']['window'], 7)
        self.assertEqual(len(document['factor_mean'][0]), 3)
        self.assertEqual(read_manifest(out_dir / 'manifest.txt')[9], out_dir / 'frame_0009_enhanced.png')
        self.assertEqual([p.name for p in self.root.iterdir() if p.name.startswith('.')], [])

    def test_dump_factors(self):
        out_dir = self.root / 'enhanced'
        run_batch(self.paths[:3], self.scatter, small_config(), out_dir, dump_factors=True)
        self.assertTrue((out_dir / 'frame_0000_factor.tif').exists())
        self.assertTrue((out_dir / 'frame_0000_factor.json').exists())
        self.assertTrue((out_dir / 'frame_0000_factor_mask.png').exists())

    def test_existing_output_directory(self):
        out_dir = self.root / 'enhanced'
        out_dir.mkdir()
        (out_dir / 'notes.txt').write_text('keep')
        run_batch(self.paths[:4], self.scatter, small_config(), out_dir)
        self.assertTrue((out_dir / 'notes.txt').exists())
        self.assertTrue((out_dir / 'frame_0003_enhanced.png').exists())

    def test_empty_manifest(self):
        with self.assertRaises(ArgumentError):
            run_batch([], self.scatter, small_config(), self.root / 'enhanced')

    def test_corrupt_frame_commits_nothing(self):
        """A truncated PNG at position 5 aborts the run without outputs"""
        data = self.paths[5].read_bytes()
        self.paths[5].write_bytes(data[:len(data) // 2])
        out_dir = self.root / 'enhanced'
        with self.assertRaises(ImageIOError) as context:
            run_batch(self.paths, self.scatter, small_config(), out_dir)
        self.assertIn('entry 5', str(context.exception))
        self.assertIn('frame_0005.png', str(context.exception))
        self.assertFalse(out_dir.exists())
        self.assertEqual([p.name for p in self.root.iterdir() if p.name.startswith('.')], [])

    def test_duplicate_output_names(self):
        with self.assertRaises(ArgumentError):
            run_batch([self.paths[0], self.paths[0]], self.scatter, small_config(), self.root / 'enhanced')

    def test_shared_coverage_name(self):
        """a.png and a.tif enhance to different names but share a_coverage.png"""
        tif = self.root / 'input' / 'frame_0000.tif'
        save_frame(random_frames(1, seed=3)[0], tif)
        with self.assertRaises(ArgumentError) as context:
            run_batch([self.paths[0], tif], self.scatter, small_config(), self.root / 'enhanced')
        self.assertIn('frame_0000_coverage.png', str(context.exception))
        self.assertFalse((self.root / 'enhanced').exists())


class ThroughputTestCase(SimpleTestCase):
    """Default configuration on 1 megapixel RGB frames"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        rng = np.random.default_rng(21)
        self.paths = []
        for index in range(14):
            path = self.root / 'input' / f"frame_{index:04d}.tif"
            save_frame(Frame.from_array(0.1 + 0.6 * rng.random((3, 1000, 1000))), path)
            self.paths.append(path)
        self.scatter = ScatterField.from_array(np.full((3, 1000, 1000), 0.02))

    def tearDown(self):
        self.tmp.cleanup()

    def test_two_frames_per_second(self):
        report = run_batch(self.paths, self.scatter, EnhancementConfig(), self.root / 'enhanced')
        self.assertEqual(report.frames, 14)
        self.assertEqual(report.config['window'], 7)
        self.assertGreaterEqual(report.frames_per_second, 2.0)
