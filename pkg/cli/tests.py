"""
Tests for the management commands and their exit codes
"""
import json
import logging
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from pipeline.manifest import read_manifest, write_manifest
from raster.files import load_frame, save_frame
from raster.planes import Frame

from .base import EXIT_ARGUMENT, EXIT_IO, EXIT_METRIC


def scene_document(altitude=3.0):
    return {
        'schema': 1,
        'camera': {'width': 32, 'height': 24, 'focal_length': 26.7},
        'pose': {'altitude': altitude},
        'lights': [
            {'position': [1.0, 0.0, 0.0], 'direction': [-0.2, 0.0, 1.0], 'intensity': [20.0, 3.5, 2.6], 'cone_sigma': 0.5},
            {'position': [-1.0, 0.0, 0.0], 'direction': [0.2, 0.0, 1.0], 'intensity': [20.0, 3.5, 2.6], 'cone_sigma': 0.5},
        ],
        'water': {'steps': 32},
        'albedo': {'base': [0.55, 0.5, 0.45], 'texture': 0.15, 'smoothing': 3.0, 'size': [12.0, 8.0],
                   'texel_size': 0.05, 'seed': 1},
        'contamination': {'rate': 0.05, 'size': [0.05, 0.2]},
        'water_column': {'count': 3, 'particle_rate': 0.02},
        'seed': 7,
    }


TRAJECTORY = {
    'schema': 1,
    'transect': {'start': [-1.0, 0.0], 'step': [0.3, 0.0], 'count': 7, 'altitude': 3.0},
}


def run(name, *args, **kwargs):
    """Run a command, returning its stdout"""
    stdout = StringIO()
    call_command(name, *args, stdout=stdout, **kwargs)
    return stdout.getvalue()


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_json(self, name, data):
        path = self.root / name
        path.write_text(json.dumps(data))
        return path

    def assertExitCode(self, code, name, *args, **kwargs):
        with self.assertRaises(CommandError) as caught:
            run(name, *args, **kwargs)
        self.assertEqual(caught.exception.returncode, code)
        return caught.exception


class SampleSizeCommandTestCase(CommandTestCase):

    def test_required_window(self):
        output = run('sample_size', contamination=0.2, target=0.035)
        self.assertIn('n = 7', output)

    def test_table_is_bounded(self):
        """Long tables are thinned to 40 rows plus the header and summary"""
        output = run('sample_size', contamination=0.45, target=1e-6)
        self.assertLessEqual(len(output.strip().splitlines()), 42)

    def test_breakdown_point(self):
        error = self.assertExitCode(EXIT_ARGUMENT, 'sample_size', contamination=0.6)
        self.assertIn('breakdown', str(error))

    def test_verbose_restores_log_levels(self):
        levels = {name: logging.getLogger(name).level for name in settings.LOCAL_APPS}
        run('sample_size', contamination=0.2, target=0.035, verbose=True)
        self.assertEqual({name: logging.getLogger(name).level for name in settings.LOCAL_APPS}, levels)


class EnhanceCommandTestCase(CommandTestCase):

    def test_even_window(self):
        """Argument errors are reported before any input is opened"""
        self.assertExitCode(
            EXIT_ARGUMENT, 'enhance',
            manifest='missing.txt', scatter='missing.tif', out_dir=str(self.root / 'out'), window=4,
        )

    def test_bad_reference(self):
        self.assertExitCode(
            EXIT_ARGUMENT, 'enhance',
            manifest='missing.txt', scatter='missing.tif', out_dir=str(self.root / 'out'), reference='0.5,0',
        )

    def test_missing_scatter(self):
        self.assertExitCode(
            EXIT_IO, 'enhance',
            manifest='missing.txt', scatter=str(self.root / 'missing.tif'), out_dir=str(self.root / 'out'),
        )


class EstimateScatterCommandTestCase(CommandTestCase):

    def test_too_few_water_frames(self):
        paths = []
        for index in range(2):
            paths.append(self.root / f"water_{index}.png")
            save_frame(Frame.from_array(np.full((3, 8, 8), 0.1)), paths[-1])
        write_manifest(paths, self.root / 'water.txt')
        self.assertExitCode(
            EXIT_ARGUMENT, 'estimate_scatter', water_manifest=str(self.root / 'water.txt'), out=str(self.root / 's.tif')
        )

    def test_missing_frame(self):
        write_manifest([self.root / f"water_{index}.png" for index in range(3)], self.root / 'water.txt')
        error = self.assertExitCode(
            EXIT_IO, 'estimate_scatter', water_manifest=str(self.root / 'water.txt'), out=str(self.root / 's.tif')
        )
        self.assertIn('water_0.png', str(error))

    def test_writes_field(self):
        paths = []
        for index in range(3):
            paths.append(self.root / f"water_{index}.tif")
            save_frame(Frame.from_array(np.full((3, 8, 8), 0.1 + 0.01 * index)), paths[-1])
        write_manifest(paths, self.root / 'water.txt')
        run('estimate_scatter', water_manifest=str(self.root / 'water.txt'), out=str(self.root / 's.tif'))
        self.assertTrue((self.root / 's.tif').exists())
        self.assertTrue((self.root / 's.json').exists())


class SimulateCommandTestCase(CommandTestCase):

    def test_zero_altitude(self):
        scene = self.write_json('scene.json', scene_document(altitude=0.0))
        error = self.assertExitCode(EXIT_ARGUMENT, 'simulate', scene=str(scene), out_dir=str(self.root / 'sim'))
        self.assertIn('pose.altitude', str(error))

    def test_invalid_json(self):
        scene = self.root / 'scene.json'
        scene.write_text('{"schema": 1,')
        self.assertExitCode(EXIT_ARGUMENT, 'simulate', scene=str(scene), out_dir=str(self.root / 'sim'))

    def test_seed_is_deterministic(self):
        scene = self.write_json('scene.json', scene_document())
        for name in ('a', 'b'):
            run('simulate', scene=str(scene), out_dir=str(self.root / name), seed=11)
        self.assertEqual(
            (self.root / 'a' / 'frame_0000.png').read_bytes(),
            (self.root / 'b' / 'frame_0000.png').read_bytes(),
        )

    def test_eight_bit_frames_decode_like_sixteen_bit(self):
        """8-bit output is sRGB encoded, so it reads back at the rendered radiance"""
        scene = self.write_json('scene.json', scene_document())
        for depth in (8, 16):
            run('simulate', scene=str(scene), out_dir=str(self.root / f'depth{depth}'), depth=depth)
        coarse = load_frame(self.root / 'depth8' / 'frame_0000.png').stack()
        fine = load_frame(self.root / 'depth16' / 'frame_0000.png').stack()
        np.testing.assert_allclose(coarse, fine, atol=0.006)


class WorkflowTestCase(SimpleTestCase):
    """simulate, estimate_scatter, enhance and evaluate chained on one synthetic transect"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        scene = cls.root / 'scene.json'
        scene.write_text(json.dumps(scene_document()))
        trajectory = cls.root / 'trajectory.json'
        trajectory.write_text(json.dumps(TRAJECTORY))
        cls.sim = cls.root / 'sim'
        run('simulate', scene=str(scene), trajectory=str(trajectory), out_dir=str(cls.sim))
        run('estimate_scatter', water_manifest=str(cls.sim / 'water_manifest.txt'), out=str(cls.root / 'scatter.tif'))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def enhance(self, out_dir, threads=1, depth=16):
        return run(
            'enhance',
            manifest=str(self.sim / 'manifest.txt'),
            scatter=str(self.root / 'scatter.tif'),
            out_dir=str(out_dir),
            spatial_radius=1,
            downsample=4,
            threads=threads,
            depth=depth,
        )

    def test_simulated_layout(self):
        self.assertEqual(len(read_manifest(self.sim / 'manifest.txt')), 7)
        self.assertEqual(len(read_manifest(self.sim / 'water_manifest.txt')), 3)
        self.assertTrue((self.sim / 'registration.json').exists())

    def test_thread_count_does_not_change_output(self):
        single, multi = self.root / 'single', self.root / 'multi'
        self.enhance(single, threads=1)
        self.enhance(multi, threads=3)
        names = sorted(path.name for path in single.glob('*_enhanced.png'))
        self.assertEqual(len(names), 7)
        for name in names:
            self.assertEqual((single / name).read_bytes(), (multi / name).read_bytes(), name)

    def test_eight_bit_output_decodes_like_sixteen_bit(self):
        coarse_dir, fine_dir = self.root / 'depth8', self.root / 'depth16'
        self.enhance(coarse_dir, depth=8)
        self.enhance(fine_dir, depth=16)
        for path in sorted(fine_dir.glob('*_enhanced.png')):
            np.testing.assert_allclose(
                load_frame(coarse_dir / path.name).stack(),
                load_frame(path).stack(),
                atol=0.006,
                err_msg=path.name,
            )

    def test_evaluate_enhanced(self):
        out_dir = self.root / 'enhanced'
        self.enhance(out_dir)
        report_path = self.root / 'report.json'
        output = run(
            'evaluate',
            frames=str(out_dir / 'manifest.txt'),
            registration=str(self.sim / 'registration.json'),
            truth=str(self.sim / 'truth_manifest.txt'),
            out=str(report_path),
            composite=str(self.root / 'mosaic.png'),
        )
        self.assertIn('mae', output)
        report = json.loads(report_path.read_text())
        self.assertEqual(report['schema'], 1)
        self.assertEqual(len(report['errors']), 3)
        self.assertEqual(len(report['truth_rmse']), 7)
        self.assertTrue((self.root / 'mosaic.png').exists())

    def test_truth_against_itself(self):
        """A perfect restoration has zero truth error"""
        report_path = self.root / 'truth.json'
        run(
            'evaluate',
            frames=str(self.sim / 'truth_manifest.txt'),
            registration=str(self.sim / 'registration.json'),
            truth=str(self.sim / 'truth_manifest.txt'),
            out=str(report_path),
        )
        report = json.loads(report_path.read_text())
        for errors in report['truth_rmse']:
            for error in errors:
                self.assertAlmostEqual(error, 0.0, places=12)

    def test_registration_frame_count(self):
        write_manifest(read_manifest(self.sim / 'manifest.txt')[:3], self.root / 'short.txt')
        with self.assertRaises(CommandError) as caught:
            run(
                'evaluate',
                frames=str(self.root / 'short.txt'),
                registration=str(self.sim / 'registration.json'),
                out=str(self.root / 'short.json'),
            )
        self.assertEqual(caught.exception.returncode, EXIT_ARGUMENT)


class EvaluateCommandTestCase(CommandTestCase):

    def setUp(self):
        super().setUp()
        rng = np.random.default_rng(4)
        self.frame = self.root / 'frame.png'
        save_frame(Frame.from_array(0.2 + 0.5 * rng.random((3, 12, 16))), self.frame)

    def registration(self, matrices, shape=(12, 16)):
        return self.write_json('registration.json', {
            'schema': 1,
            'homographies': [np.asarray(m, dtype=float).ravel().tolist() for m in matrices],
            'mosaic_shape': list(shape),
        })

    def test_duplicated_frames(self):
        write_manifest([self.frame, self.frame], self.root / 'frames.txt')
        registration = self.registration([np.eye(3), np.eye(3)])
        run('evaluate', frames=str(self.root / 'frames.txt'), registration=str(registration),
            out=str(self.root / 'report.json'))
        report = json.loads((self.root / 'report.json').read_text())
        self.assertEqual(report['errors'], [0.0, 0.0, 0.0])
        self.assertEqual(report['overlap_pixel_count'], 12 * 16)

    def test_no_overlap(self):
        write_manifest([self.frame, self.frame], self.root / 'frames.txt')
        shift = np.array([[1.0, 0.0, 40.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        registration = self.registration([np.eye(3), shift], shape=(12, 60))
        self.assertExitCode(
            EXIT_METRIC, 'evaluate',
            frames=str(self.root / 'frames.txt'), registration=str(registration), out=str(self.root / 'report.json'),
        )

    def test_bad_registration_document(self):
        write_manifest([self.frame, self.frame], self.root / 'frames.txt')
        registration = self.write_json('registration.json', {'schema': 1, 'homographies': [[1.0, 0.0]]})
        self.assertExitCode(
            EXIT_ARGUMENT, 'evaluate',
            frames=str(self.root / 'frames.txt'), registration=str(registration), out=str(self.root / 'report.json'),
        )


class BandedEnhanceTestCase(CommandTestCase):
    """Frames tall enough for the medians to be split into row bands"""

    def setUp(self):
        super().setUp()
        rng = np.random.default_rng(9)
        water, frames = [], []
        for index in range(3):
            water.append(self.root / 'water' / f"water_{index}.png")
            save_frame(Frame.from_array(0.02 + 0.005 * rng.random((3, 140, 40))), water[-1])
        for index in range(7):
            frames.append(self.root / 'frames' / f"frame_{index:04d}.png")
            save_frame(Frame.from_array(0.1 + 0.6 * rng.random((3, 140, 40))), frames[-1])
        write_manifest(water, self.root / 'water.txt')
        write_manifest(frames, self.root / 'frames.txt')
        run('estimate_scatter', water_manifest=str(self.root / 'water.txt'), out=str(self.root / 'scatter.tif'))

    def enhance(self, out_dir, threads):
        run(
            'enhance',
            manifest=str(self.root / 'frames.txt'),
            scatter=str(self.root / 'scatter.tif'),
            out_dir=str(out_dir),
            spatial_radius=2,
            downsample=1,
            threads=threads,
        )

    def test_thread_count_does_not_change_output(self):
        single, multi = self.root / 'single', self.root / 'multi'
        self.enhance(single, threads=1)
        self.enhance(multi, threads=3)
        names = sorted(path.name for path in single.glob('*_enhanced.png'))
        self.assertEqual(len(names), 7)
        for name in names:
            np.testing.assert_array_equal(
                load_frame(single / name).stack(), load_frame(multi / name).stack(), err_msg=name
            )
