"""Tests the file thimble"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use

import logging
import unittest

import mpmath
import numpy as np

from resurgix.helper import errors, thimble
from resurgix.helper.scenes import make_scene, read_scene


class Test(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def test_short_gaussian_identity(self):
        scene = read_scene('gaussian')
        crit, = thimble.scene_points(scene)
        rng = np.random.default_rng(3)
        for _ in range(5):
            t = mpmath.mpf(rng.uniform(0.2, 2)) * mpmath.expj(rng.uniform(-3, 3))
            result = thimble.thimble_integral(scene, crit, t)
            ratio = result.value * mpmath.exp(-crit.z / t) / mpmath.sqrt(2 * mpmath.pi * t)
            self.assertLess(abs(ratio - 1), 1e-12, msg=f"t = {t}")

    def test_short_gaussian_value(self):
        scene = make_scene('-z^2/2', seeds_per_axis=3, box=[(-10 - 10j, 10 + 10j)])
        crit, = thimble.scene_points(scene)
        result = thimble.thimble_integral(scene, crit, 0.5)
        self.assertLess(abs(result.value - mpmath.sqrt(mpmath.pi)), 1e-15)
        self.assertLess(result.tail_bound, 1e-20)

    def test_short_integrals_in_order(self):
        scene = make_scene('-z^2/2', seeds_per_axis=3, box=[(-10 - 10j, 10 + 10j)])
        crit, = thimble.scene_points(scene)
        ts = [mpmath.mpf('0.5'), mpmath.mpf(2), mpmath.expj(0.4)]
        results = thimble.thimble_integrals(scene, [(crit, t) for t in ts])
        self.assertEqual([r.t for r in results], [mpmath.mpc(t) for t in ts])
        for result, t in zip(results, ts):
            self.assertLess(abs(result.value / mpmath.sqrt(2 * mpmath.pi * t) - 1), 1e-12)

    def test_short_gamma(self):
        scene = read_scene('gamma')
        crit, = thimble.scene_points(scene)
        result = thimble.thimble_integral(scene, crit, mpmath.mpf('0.2'))
        expected = mpmath.gamma(5) * mpmath.exp(5) / mpmath.mpf(5) ** 5
        self.assertLess(abs(result.value / expected - 1), 1e-12)

    def test_short_airy_phase_conserved(self):
        scene = read_scene('airy')
        points = thimble.scene_points(scene)
        t = mpmath.expj(0.3)
        contour = thimble.trace_thimble(scene, points[0], t)
        expected = (-mpmath.mpf(2) / 3 / t).imag
        self.assertLess(contour.drift, 1e-12)
        for _, value in contour.samples:
            self.assertLess(abs((value / t).imag - expected), 1e-12)
        # Re(f/t) decreases away from the critical point on both branches
        reals = [(value / t).real for _, value in contour.samples]
        middle = reals.index(max(reals))
        self.assertTrue(all(a <= b for a, b in zip(reals[:middle], reals[1:middle + 1])))
        self.assertTrue(all(a >= b for a, b in zip(reals[middle:], reals[middle + 1:])))

    def test_short_contour_frame(self):
        scene = read_scene('gaussian')
        crit, = thimble.scene_points(scene)
        frame = thimble.trace_thimble(scene, crit, 1).to_frame()
        self.assertEqual(list(frame.columns), ['s', 're_x0', 'im_x0', 're_f', 'im_f'])
        self.assertEqual(len(frame), 2 * thimble.SAMPLES_PER_BRANCH - 1)
        self.assertTrue((frame['s'].diff().dropna() > 0).all())
        self.assertLess(abs(frame['im_x0']).max(), 1e-20)

    def test_short_stokes_collision(self):
        scene = read_scene('airy')
        points = thimble.scene_points(scene)
        with self.assertRaises(errors.StokesCollision):
            thimble.trace_thimble(scene, points[0], -1)
        with self.assertRaises(errors.StokesCollision):
            thimble.trace_thimble(scene, points[0], -1, allow_stokes=True)
        with self.assertRaises(errors.StokesCollision):
            thimble.trace_thimble(scene, points[1], 1, allow_stokes=True)

    def test_short_flow_escape(self):
        scene = make_scene('-z^2/2', seeds_per_axis=3, box=[(-1 - 1j, 1 + 1j)])
        crit, = thimble.scene_points(scene)
        with self.assertRaises(errors.FlowEscape):
            thimble.trace_thimble(scene, crit, 1)

    def test_short_direction(self):
        v = thimble.thimble_direction(-1, 4)
        self.assertLess(abs(v - mpmath.sqrt(8)), 1e-25)
        flipped = thimble.thimble_direction(-1, 4, reference_direction=-1)
        self.assertLess(abs(flipped + mpmath.sqrt(8)), 1e-25)

    def test_short_continued_orientation(self):
        scene = read_scene('gaussian')
        crit, = thimble.scene_points(scene)
        t = mpmath.mpf('0.5')
        direct = thimble.thimble_integral(scene, crit, t).value
        continued = thimble.thimble_integral(scene, crit, t, trace_t=t * mpmath.expj(0.4)).value
        self.assertLess(abs(direct - continued), 1e-15)
        reversed_value = thimble.thimble_integral(scene, crit, t, reference_direction=-1).value
        self.assertLess(abs(direct + reversed_value), 1e-15)

    def test_short_separable_product(self):
        scene = make_scene('-x^2/2 - y^2/2', ['x', 'y'], vol='2', seeds_per_axis=3,
                           box=[(-10 - 10j, 10 + 10j), (-10 - 10j, 10 + 10j)])
        crit, = thimble.scene_points(scene)
        result = thimble.thimble_integral(scene, crit, 0.5)
        self.assertLess(abs(result.value - 2 * mpmath.pi), 1e-15)

    def test_short_not_separable(self):
        scene = make_scene('-x^2/2 - y^2/2 + x*y/4', ['x', 'y'], seeds_per_axis=3)
        with self.assertRaises(errors.ResurgixError):
            thimble.component_scenes(scene)

    def test_short_level_volume_quadratic(self):
        scene = make_scene('-z^2/2', seeds_per_axis=3, box=[(-10 - 10j, 10 + 10j)])
        crit, = thimble.scene_points(scene)
        result = thimble.level_volume(scene, crit, 1, [1, 2, 4])
        for s, volume in result.rows:
            self.assertAlmostEqual(volume, 2 / np.sqrt(2 * s), places=10)
        self.assertLess(result.slope, 0)
        empty = thimble.level_volume(scene, crit, 1, [])
        self.assertEqual(empty.rows, [])
        self.assertIsNone(empty.slope)

    def test_short_level_volume_airy(self):
        scene = read_scene('airy')
        crit = thimble.scene_points(scene)[0]
        result = thimble.level_volume(scene, crit, 0.5, [1, 2, 4, 6, 8, 10])
        self.assertEqual(len(result.rows), 6)
        self.assertLess(result.slope, 1)

    def test_short_valley_index(self):
        valley = (3, mpmath.mpf(1) / 3, mpmath.mpf(0))
        # at theta = 0 the valleys of z^3/3 point at angles pi/3, pi, 5pi/3
        self.assertEqual(thimble.valley_index(-5, 0, valley), 1)
        self.assertEqual(thimble.valley_index(5 * mpmath.expj(mpmath.pi / 3), 0, valley), 0)

    def test_airy_stokes_jump(self):
        scene = read_scene('airy')
        jump = thimble.stokes_jump(scene, 0, mpmath.pi, moduli=(0.1,))
        self.assertEqual(abs(jump.partners[1]), 1)
        self.assertLess(jump.residual, 1e-6)
        self.assertEqual(thimble.count_stokes_jump(scene, 1, 0, 0) ** 2, 1)

    def test_quartic_stokes_jump(self):
        scene = read_scene('quartic')
        jump = thimble.stokes_jump(scene, 2, 0)
        self.assertEqual(sorted(jump.partners), [0, 1])
        self.assertEqual([abs(n) for n in jump.partners.values()], [1, 1])
        self.assertEqual(abs(sum(jump.partners.values())), 2)
        self.assertLess(jump.residual, 1e-6)

    def test_short_gaussian_no_rays(self):
        scene = read_scene('gaussian')
        result = thimble.valley_monodromy(scene)
        self.assertEqual(result.rays, ())
        self.assertEqual(result.monodromy.tolist(), [[1]])

    def test_airy_valley_monodromy(self):
        result = thimble.valley_monodromy(read_scene('airy'))
        self.assertEqual(result.gauge, (-1, -1))
        self.assertEqual(len(result.jumps), 2)
        self.assertEqual(abs(result.monodromy[0, 1]), 1)
        self.assertEqual(abs(result.monodromy[1, 0]), 1)
        self.assertEqual(round(np.linalg.det(result.monodromy)), 1)
        # the three valleys are permuted cyclically
        self.assertEqual(np.linalg.matrix_power(result.monodromy, 3).tolist(), [[1, 0], [0, 1]])


if __name__ == '__main__':
    unittest.main()
