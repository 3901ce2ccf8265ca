"""
Tests for scatter, all-seafloor and factor estimation and frame normalization
"""
import numpy as np
from django.test import SimpleTestCase

from estimation.config import EnhancementConfig, ReferenceColor
from estimation.factor import AllSeafloorImage, compute_factor, estimate_allseafloor
from estimation.normalize import enhance
from estimation.scatter import estimate_scatter, reduce_array, reduce_field, reduce_frame
from raster.exceptions import ArgumentError
from raster.planes import FactorField, Frame, ScatterField
from robust_stats.sampling import WindowSpec


def smooth_factor(height, width):
    """Bright centre falling off towards the corners, per channel"""
    y, x = np.mgrid[0:height, 0:width]
    r2 = ((x - width / 2) / width) ** 2 + ((y - height / 2) / height) ** 2
    base = np.exp(-2.0 * r2)
    return np.stack([0.6 * base, 0.9 * base, 1.1 * base])


class ConfigTestCase(SimpleTestCase):

    def test_reference_parse(self):
        self.assertEqual(ReferenceColor.parse('0.4,0.3,0.2').values, (0.4, 0.3, 0.2))
        self.assertEqual(ReferenceColor.parse('0.5').for_channels(3).ravel().tolist(), [0.5, 0.5, 0.5])

    def test_reference_bounds(self):
        """Reference channels must lie in (0, 1]"""
        for values in ((0.0, 0.5, 0.5), (0.5, 1.2, 0.5), (-0.1,)):
            with self.assertRaises(ArgumentError):
                ReferenceColor(values)
        with self.assertRaises(ArgumentError):
            ReferenceColor.parse('grey')

    def test_epsilon_positive(self):
        with self.assertRaises(ArgumentError):
            EnhancementConfig(epsilon=0.0)

    def test_defaults(self):
        config = EnhancementConfig()
        self.assertEqual(config.as_dict()['window'], 7)
        self.assertEqual(config.as_dict()['downsample'], 8)
        self.assertEqual(config.reference.values, (0.5, 0.5, 0.5))


class ScatterEstimationTestCase(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(21)
        self.scatter = 0.05 + 0.1 * rng.random((3, 16, 16))

    def test_identical_frames(self):
        frames = [Frame.from_array(self.scatter, index=i) for i in range(7)]
        np.testing.assert_array_equal(estimate_scatter(frames).stack(), self.scatter)

    def test_particles_removed(self):
        """Particles in at most 3 of 7 samples leave the scatter exact"""
        rng = np.random.default_rng(22)
        frames = np.repeat(self.scatter[np.newaxis], 7, axis=0)
        hits = np.zeros((16, 16), dtype=int)
        for index in range(7):
            y, x = rng.integers(0, 13, size=2)
            if (hits[y:y + 3, x:x + 3] < 3).all():
                frames[index, :, y:y + 3, x:x + 3] = 0.9
                hits[y:y + 3, x:x + 3] += 1
        field = estimate_scatter([Frame.from_array(f) for f in frames])
        np.testing.assert_array_equal(field.stack(), self.scatter)

    def test_zero_frames(self):
        field = estimate_scatter([Frame.from_array(np.zeros((3, 4, 4)))] * 7)
        self.assertTrue((field.stack() == 0.0).all())

    def test_too_few_frames(self):
        with self.assertRaises(ArgumentError):
            estimate_scatter([Frame.from_array(self.scatter)] * 2)

    def test_layout_mismatch(self):
        frames = [Frame.from_array(self.scatter)] * 3 + [Frame.from_array(self.scatter[0])]
        with self.assertRaises(ArgumentError):
            estimate_scatter(frames)


class AllSeafloorTestCase(SimpleTestCase):

    def setUp(self):
        self.spec = WindowSpec(n=7, spatial_radius=1, downsample_factor=4)
        rng = np.random.default_rng(31)
        self.frame = Frame.from_array(rng.random((3, 24, 20)))

    def test_identical_window(self):
        """The output equals the reduced frame"""
        allseafloor = estimate_allseafloor([self.frame] * 7, self.spec)
        np.testing.assert_array_equal(allseafloor.stack(), reduce_frame(self.frame, self.spec))
        self.assertEqual((allseafloor.target_width, allseafloor.target_height), (20, 24))

    def test_single_black_frame(self):
        black = Frame.from_array(np.zeros((3, 24, 20)))
        window = [self.frame] * 3 + [black] + [self.frame] * 3
        np.testing.assert_array_equal(
            estimate_allseafloor(window, self.spec).stack(),
            reduce_frame(self.frame, self.spec),
        )

    def test_short_window(self):
        with self.assertRaises(ArgumentError):
            estimate_allseafloor([self.frame] * 2, self.spec)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(32)
        frames = [Frame.from_array(rng.random((3, 24, 20))) for _ in range(5)]
        forward = estimate_allseafloor(frames, self.spec).stack()
        backward = estimate_allseafloor(frames[::-1], self.spec).stack()
        np.testing.assert_array_equal(forward, backward)

    def test_mean_estimator(self):
        frames = [Frame.from_array(np.full((3, 8, 8), v)) for v in (0.25, 0.5, 0.75)]
        allseafloor = estimate_allseafloor(frames, self.spec, estimator='mean')
        np.testing.assert_allclose(allseafloor.stack(), 0.5)

    def test_recovers_under_contamination(self):
        """c = 0.2 with seven frames recovers A*F + S at >= 97% of reduced pixels"""
        rng = np.random.default_rng(33)
        height, width = 96, 128
        ramp = 0.3 + 0.1 * np.arange(width) / width
        truth = np.stack([np.tile(ramp * gain, (height, 1)) for gain in (0.8, 1.0, 1.2)])
        frames = []
        for index in range(7):
            values = truth.copy()
            covered = rng.random((height, width)) < 0.2
            values[:, covered] = rng.choice([0.02, 0.95], size=covered.sum())
            frames.append(Frame.from_array(values, index=index))
        spec = WindowSpec(n=7, spatial_radius=1, downsample_factor=8)
        estimate = estimate_allseafloor(frames, spec).stack()
        expected = reduce_array(truth, spec)
        relative = np.abs(estimate - expected) / expected
        self.assertGreaterEqual((relative < 0.05).all(axis=0).mean(), 0.97)


class FactorTestCase(SimpleTestCase):

    def test_worked_example(self):
        """(0.5 - 0.1) / 0.5 = 0.8"""
        allseafloor = AllSeafloorImage.from_array(np.full((3, 2, 2), 0.5), 16, 16)
        scatter = ScatterField.from_array(np.full((3, 2, 2), 0.1))
        factor = compute_factor(allseafloor, scatter, ReferenceColor())
        np.testing.assert_allclose(factor.stack(), 0.8)
        self.assertEqual(factor.size, (16, 16))
        self.assertTrue(factor.coverage.all())

    def test_no_light_all_invalid(self):
        """allseafloor == scatter leaves nothing valid"""
        values = np.full((3, 2, 2), 0.3)
        factor = compute_factor(
            AllSeafloorImage.from_array(values, 8, 8), ScatterField.from_array(values), ReferenceColor()
        )
        self.assertFalse(factor.coverage.any())
        self.assertEqual(factor.invalid_fraction, 1.0)

    def test_reference_scaling(self):
        """Doubling A_ref halves F"""
        allseafloor = AllSeafloorImage.from_array(np.random.default_rng(41).random((3, 3, 3)) + 0.2, 9, 9)
        scatter = ScatterField.from_array(np.full((3, 3, 3), 0.1))
        low = compute_factor(allseafloor, scatter, ReferenceColor((0.25, 0.25, 0.25)))
        high = compute_factor(allseafloor, scatter, ReferenceColor((0.5, 0.5, 0.5)))
        np.testing.assert_allclose(high.stack(), low.stack() / 2)

    def test_resolution_mismatch(self):
        allseafloor = AllSeafloorImage.from_array(np.full((3, 2, 2), 0.5), 16, 16)
        scatter = ScatterField.from_array(np.full((3, 16, 16), 0.1))
        with self.assertRaises(ArgumentError):
            compute_factor(allseafloor, scatter, ReferenceColor())

    def test_reduced_scatter_matches(self):
        """reduce_field brings a full-resolution scatter to allseafloor resolution"""
        spec = WindowSpec(downsample_factor=4)
        scatter = reduce_field(ScatterField.from_array(np.full((3, 16, 12), 0.1)), spec)
        self.assertEqual(scatter.size, (3, 4))


class EnhanceTestCase(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(51)
        self.albedo = rng.random((3, 12, 10))
        self.factor = smooth_factor(12, 10) + 0.05
        self.scatter = 0.02 + 0.05 * rng.random((3, 12, 10))
        self.frame = Frame.from_array(self.albedo * self.factor + self.scatter)

    def test_identity_configuration(self):
        """factor 1 and scatter 0 return the input"""
        frame = Frame.from_array(self.albedo)
        result = enhance(
            frame,
            ScatterField.from_array(np.zeros((3, 12, 10))),
            FactorField.from_array(np.ones((3, 12, 10))),
        )
        np.testing.assert_array_equal(result.stack(), self.albedo)

    def test_exact_inversion(self):
        result = enhance(self.frame, ScatterField.from_array(self.scatter), FactorField.from_array(self.factor))
        np.testing.assert_allclose(result.stack(), self.albedo, rtol=1e-12, atol=1e-14)

    def test_scale_equivariance(self):
        """Scaling a reference channel scales that output channel"""
        spec = WindowSpec(n=3, spatial_radius=0, downsample_factor=2)
        scatter = ScatterField.from_array(self.scatter)
        allseafloor = estimate_allseafloor([self.frame] * 3, spec)
        outputs = []
        for reference in (ReferenceColor((0.5, 0.5, 0.5)), ReferenceColor((0.4, 0.3, 0.2))):
            factor = compute_factor(allseafloor, reduce_field(scatter, spec), reference)
            outputs.append(enhance(self.frame, scatter, factor).stack())
        ratio = outputs[1] / outputs[0]
        np.testing.assert_allclose(ratio[0], 0.8)
        np.testing.assert_allclose(ratio[1], 0.6)
        np.testing.assert_allclose(ratio[2], 0.4)

    def test_monotone_in_input(self):
        scatter = ScatterField.from_array(self.scatter)
        factor = FactorField.from_array(self.factor)
        brighter = Frame.from_array(self.frame.stack() + 0.01)
        low = enhance(self.frame, scatter, factor).stack()
        high = enhance(brighter, scatter, factor).stack()
        self.assertTrue((high >= low).all())

    def test_invalid_pixels_zeroed(self):
        factor_values = self.factor.copy()
        factor_values[1, 0, 0] = 0.0
        factor = FactorField.from_array(factor_values, epsilon=1e-4)
        result = enhance(self.frame, ScatterField.from_array(self.scatter), factor).stack()
        self.assertTrue((result[:, 0, 0] == 0.0).all())
        self.assertTrue(np.isfinite(result).all())
        self.assertTrue((result >= 0).all())

    def test_negative_after_subtraction(self):
        """Frames darker than the scatter clamp to zero"""
        frame = Frame.from_array(np.zeros((3, 12, 10)))
        result = enhance(frame, ScatterField.from_array(self.scatter), FactorField.from_array(self.factor))
        self.assertTrue((result.stack() == 0.0).all())

    def test_clamp_output(self):
        config = EnhancementConfig(clamp_output=True)
        frame = Frame.from_array(np.full((3, 12, 10), 0.9))
        result = enhance(
            frame,
            ScatterField.from_array(np.zeros((3, 12, 10))),
            FactorField.from_array(np.full((3, 12, 10), 0.3)),
            config,
        )
        self.assertEqual(result.stack().max(), 1.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(ArgumentError):
            enhance(
                self.frame,
                ScatterField.from_array(np.zeros((3, 6, 5))),
                FactorField.from_array(self.factor),
            )
