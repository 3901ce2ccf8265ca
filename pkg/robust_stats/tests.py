"""
Tests for the temporal/spatial medians and the window-size calculator
"""
import itertools
import math

import numpy as np
from django.test import SimpleTestCase
from scipy import ndimage

from raster import parallel
from raster.exceptions import ArgumentError
from raster.planes import ImagePlane
from robust_stats.medians import spatial_median, spatial_median_array, temporal_median, temporal_median_array
from robust_stats.sampling import (
    ContaminationModel,
    WindowSpec,
    log_p_half,
    p_half,
    required_window,
    sample_size_table,
)


def brute_force_tail(c, n):
    return sum(math.comb(n, k) * c ** k * (1 - c) ** (n - k) for k in range(-(-n // 2), n + 1))


def brute_force_spatial(values, radius):
    height, width = values.shape
    out = np.empty_like(values)
    for y in range(height):
        for x in range(width):
            window = values[max(0, y - radius):y + radius + 1, max(0, x - radius):x + radius + 1]
            out[y, x] = np.median(window)
    return out


class TemporalMedianTestCase(SimpleTestCase):

    def test_identical_planes(self):
        """Seven copies of v give v"""
        planes = [ImagePlane.constant(5, 4, 0.42)] * 7
        self.assertTrue((temporal_median(planes).data == 0.42).all())

    def test_order_statistic(self):
        """{0,0,0,0,1,1,1} has median 0 in every order"""
        samples = [0, 0, 0, 0, 1, 1, 1]
        for order in set(itertools.permutations(samples)):
            planes = [ImagePlane.constant(1, 1, v) for v in order]
            self.assertEqual(temporal_median(planes).data[0, 0], 0.0)

    def test_even_count_midpoint(self):
        planes = [ImagePlane.constant(2, 2, v) for v in (0.1, 0.4, 0.2, 0.8)]
        np.testing.assert_allclose(temporal_median(planes).data, 0.3)

    def test_empty_stack(self):
        with self.assertRaises(ArgumentError):
            temporal_median([])

    def test_dimension_mismatch(self):
        with self.assertRaises(ArgumentError):
            temporal_median([ImagePlane.constant(2, 2, 0.0), ImagePlane.constant(3, 2, 0.0)])

    def test_sparse_outliers_over_constant(self):
        """At most 3 of 7 outliers per pixel leave the background exactly"""
        rng = np.random.default_rng(11)
        stack = np.full((7, 20, 20), 0.3)
        for y, x in itertools.product(range(20), range(20)):
            hit = rng.choice(7, size=rng.integers(0, 4), replace=False)
            stack[hit, y, x] = rng.random(len(hit)) * 5.0
        self.assertTrue((temporal_median_array(stack) == 0.3).all())

    def test_breakdown_exhaustive(self):
        """For odd k <= 9 and up to k//2 outliers the median stays within the clean range"""
        rng = np.random.default_rng(7)
        for k in range(1, 10, 2):
            for contaminated in range(k // 2 + 1):
                clean = rng.random((k - contaminated, 6, 6))
                outliers = rng.choice([-50.0, 50.0], size=(contaminated, 6, 6)) * rng.random((contaminated, 6, 6))
                stack = np.concatenate([clean, outliers])
                stack = rng.permuted(stack, axis=0)
                result = temporal_median_array(stack)
                expected = np.sort(stack, axis=0)[k // 2]
                np.testing.assert_array_equal(result, expected)
                self.assertTrue((result >= clean.min(axis=0)).all(), (k, contaminated))
                self.assertTrue((result <= clean.max(axis=0)).all(), (k, contaminated))

    def test_permutation_invariant(self):
        stack = np.random.default_rng(2).random((5, 8, 8))
        shuffled = stack[[3, 0, 4, 1, 2]]
        np.testing.assert_array_equal(temporal_median_array(stack), temporal_median_array(shuffled))

    def test_affine_commutes(self):
        """median(a*stack + b) = a*median(stack) + b for odd k"""
        stack = np.random.default_rng(4).random((7, 6, 6))
        np.testing.assert_allclose(
            temporal_median_array(2.5 * stack + 0.125),
            2.5 * temporal_median_array(stack) + 0.125,
        )


class SpatialMedianTestCase(SimpleTestCase):

    def test_radius_zero_identity(self):
        values = np.random.default_rng(0).random((5, 6))
        np.testing.assert_array_equal(spatial_median(ImagePlane(values), 0).data, values)

    def test_constant_plane(self):
        for radius in (1, 2, 4):
            self.assertTrue((spatial_median(ImagePlane.constant(7, 5, 0.6), radius).data == 0.6).all())

    def test_salt_pixel_removed(self):
        """A lone bright pixel vanishes under a 3x3 median"""
        values = np.zeros((7, 7))
        values[3, 3] = 1.0
        self.assertTrue((spatial_median(ImagePlane(values), 1).data == 0.0).all())

    def test_clipped_borders_match_brute_force(self):
        """Border pixels use only the in-bounds part of their neighbourhood"""
        values = np.random.default_rng(9).random((9, 11))
        for radius in (1, 2):
            np.testing.assert_allclose(spatial_median_array(values, radius), brute_force_spatial(values, radius))

    def test_output_within_input_range(self):
        values = np.random.default_rng(6).random((12, 12))
        result = spatial_median_array(values, 2)
        self.assertGreaterEqual(result.min(), values.min())
        self.assertLessEqual(result.max(), values.max())

    def test_stacked_channels(self):
        """Channels are filtered independently"""
        values = np.random.default_rng(8).random((3, 10, 10))
        result = spatial_median_array(values, 1)
        for channel in range(3):
            np.testing.assert_allclose(result[channel], brute_force_spatial(values[channel], 1))

    def test_near_ties_are_exact(self):
        """Values closer than float32 resolution still give the float64 median"""
        values = 0.5 + 1e-12 * np.random.default_rng(14).integers(0, 5, (20, 20))
        for radius in (1, 2):
            inner = (slice(radius, -radius), slice(radius, -radius))
            np.testing.assert_array_equal(
                spatial_median_array(values, radius)[inner], brute_force_spatial(values, radius)[inner]
            )

    def test_matches_generic_filter(self):
        values = np.random.default_rng(15).random((3, 140, 90))
        for radius in (1, 2):
            size = (1, 2 * radius + 1, 2 * radius + 1)
            expected = ndimage.median_filter(values, size=size, mode='nearest')
            inner = (slice(None), slice(radius, -radius), slice(radius, -radius))
            np.testing.assert_array_equal(spatial_median_array(values, radius)[inner], expected[inner])


class ThreadCountTestCase(SimpleTestCase):
    """Row-band parallelism does not change results"""

    def tearDown(self):
        parallel.configure(None)

    def test_bit_identical_across_threads(self):
        values = np.random.default_rng(12).random((3, 300, 40))
        stack = np.random.default_rng(13).random((7, 3, 300, 40))
        parallel.configure(1)
        spatial_single = spatial_median_array(values, 1)
        temporal_single = temporal_median_array(stack)
        parallel.configure(4)
        self.assertEqual(parallel.worker_count(), 4)
        np.testing.assert_array_equal(spatial_median_array(values, 1), spatial_single)
        np.testing.assert_array_equal(temporal_median_array(stack), temporal_single)

    def test_negative_threads(self):
        with self.assertRaises(ArgumentError):
            parallel.configure(-1)

    def test_row_bands_cover_height(self):
        bands = parallel.row_bands(301, 4)
        self.assertEqual(bands[0][0], 0)
        self.assertEqual(bands[-1][1], 301)
        for (_, stop), (start, _) in zip(bands, bands[1:]):
            self.assertEqual(stop, start)


class SampleSizeTestCase(SimpleTestCase):
    """Binomial breakdown probability and window sizing"""

    def test_worked_example(self):
        """c = 0.2 with seven frames fails about 3% of the time"""
        self.assertAlmostEqual(p_half(0.2, 7), 0.0333, delta=0.0005)

    def test_matches_brute_force(self):
        for c in (0.05, 0.2, 0.35, 0.49):
            for n in (1, 2, 3, 7, 8, 15):
                self.assertAlmostEqual(p_half(c, n), brute_force_tail(c, n), places=12)

    def test_single_draw(self):
        self.assertAlmostEqual(p_half(0.2, 1), 0.2)

    def test_vanishing_contamination(self):
        self.assertLess(p_half(1e-9, 7), 1e-30)

    def test_increasing_in_c(self):
        values = [p_half(c, 9) for c in np.linspace(0.01, 0.49, 25)]
        self.assertTrue(all(a < b for a, b in zip(values, values[1:])))

    def test_decreasing_in_n(self):
        values = [p_half(0.3, n) for n in range(1, 101, 2)]
        self.assertTrue(all(a >= b for a, b in zip(values, values[1:])))
        self.assertLess(values[-1], 1e-4)

    def test_log_form(self):
        """log_p_half agrees with p_half and stays finite far below float range"""
        self.assertAlmostEqual(log_p_half(0.2, 7), math.log(p_half(0.2, 7)), places=10)
        tiny = log_p_half(0.1, 20001)
        self.assertTrue(math.isfinite(tiny))
        self.assertLess(tiny, -1000)

    def test_breakdown_point_exceeded(self):
        for c in (0.5, 0.6, 0.0, -0.1):
            with self.assertRaises(ArgumentError):
                p_half(c, 7)
        with self.assertRaises(ArgumentError) as context:
            ContaminationModel(0.6)
        self.assertIn('breakdown point exceeded', str(context.exception))

    def test_required_window_examples(self):
        self.assertEqual(required_window(0.2, 0.035), 7)
        self.assertEqual(required_window(0.2, 0.5), 1)

    def test_required_window_minimal(self):
        """The result passes and the next smaller odd window does not"""
        for c, target in ((0.1, 1e-3), (0.3, 1e-6), (0.45, 1e-2)):
            n = required_window(c, target)
            self.assertEqual(n % 2, 1)
            self.assertLessEqual(p_half(c, n), target)
            if n > 1:
                self.assertGreater(p_half(c, n - 2), target)

    def test_required_window_near_breakdown(self):
        """c = 0.49 needs a long window but terminates"""
        n = required_window(0.49, 1e-3)
        self.assertGreater(n, 1000)
        self.assertLessEqual(p_half(0.49, n), 1e-3)

    def test_required_window_monotone_in_target(self):
        targets = [0.4, 0.1, 0.05, 0.01, 0.001]
        windows = [required_window(0.2, t) for t in targets]
        self.assertEqual(windows, sorted(windows))

    def test_invalid_target(self):
        with self.assertRaises(ArgumentError):
            required_window(0.2, 1.0)

    def test_table_thinning(self):
        rows = sample_size_table(0.45, 1e-4)
        self.assertLessEqual(len(rows), 40)
        self.assertEqual(rows[0][0], 1)
        self.assertEqual(rows[-1][0], required_window(0.45, 1e-4))

    def test_window_spec_odd(self):
        with self.assertRaises(ArgumentError):
            WindowSpec(n=4)
        self.assertEqual(WindowSpec().half, 3)
