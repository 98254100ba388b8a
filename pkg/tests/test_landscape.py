"""Tests the file landscape"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use

import logging
import unittest

import mpmath

from resurgix.helper import errors, landscape
from resurgix.helper.expressions import parse_expression
from resurgix.helper.scenes import make_scene, read_scene


class Test(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def test_short_airy_points(self):
        points = landscape.find_critical_points(read_scene('airy'))
        self.assertEqual(len(points), 2)
        self.assertLess(abs(points[0].x[0] - 1), 1e-25)
        self.assertLess(abs(points[0].z + mpmath.mpf(2) / 3), 1e-25)
        self.assertLess(abs(points[1].x[0] + 1), 1e-25)
        self.assertLess(abs(points[1].z - mpmath.mpf(2) / 3), 1e-25)
        self.assertEqual([p.index for p in points], [0, 1])
        self.assertTrue(all(p.morse for p in points))

    def test_short_gaussian_point(self):
        scene = make_scene('-z^2/2', seeds_per_axis=3)
        points = landscape.find_critical_points(scene)
        self.assertEqual(len(points), 1)
        self.assertLess(abs(points[0].x[0]), 1e-25)
        self.assertLess(abs(points[0].hess_det + 1), 1e-25)

    def test_short_gamma_point(self):
        points = landscape.find_critical_points(read_scene('gamma'))
        self.assertEqual(len(points), 1)
        self.assertLess(abs(points[0].x[0] - 1), 1e-25)
        self.assertLess(abs(points[0].z), 1e-25)

    def test_short_two_variables(self):
        scene = make_scene('x^3/3 - x + y^2/2 - y', ['x', 'y'], seeds_per_axis=4,
                           box=[(-3 - 3j, 3 + 3j), (-3 - 3j, 3 + 3j)])
        points = landscape.find_critical_points(scene)
        self.assertEqual(len(points), 2)
        for point in points:
            self.assertLess(abs(point.x[1] - 1), 1e-25)
            self.assertLess(abs(abs(point.x[0]) - 1), 1e-25)

    def test_short_quartic_coincident(self):
        points = landscape.find_critical_points(read_scene('quartic'))
        self.assertEqual(len(points), 3)
        self.assertLess(abs(points[2].x[0]), 1e-25)
        with self.assertRaises(errors.CoincidentValues):
            landscape.stokes_rays(points)
        rays = landscape.stokes_rays(points, allow_coincident=True)
        self.assertEqual(len(rays.skipped), 2)
        self.assertEqual(len(rays.rays), 2)
        self.assertFalse(rays.rays[0].generic)

    def test_short_rays_two_values(self):
        rays = landscape.stokes_rays(landscape.points_from_values([0, 1j]))
        angles = rays.angles()
        self.assertEqual(len(angles), 2)
        self.assertLess(abs(angles[0] - mpmath.pi / 2), 1e-25)
        self.assertLess(abs(angles[1] - 3 * mpmath.pi / 2), 1e-25)
        self.assertTrue(all(ray.generic for ray in rays.rays))
        self.assertEqual(rays.ray_for_pair(1, 0).pairs, ((1, 0),))

    def test_short_rays_collinear(self):
        points = landscape.points_from_values([0, 1, 2])
        self.assertEqual(landscape.genericity_check(points), [(0, 1, 2)])
        rays = landscape.stokes_rays(points)
        self.assertEqual(len(rays.rays), 2)
        for ray in rays.rays:
            self.assertFalse(ray.generic)
            self.assertEqual(len(ray.pairs), 3)
        # nearest pairs first
        self.assertEqual(abs(rays.rays[0].pairs[0][0] - rays.rays[0].pairs[0][1]), 1)

    def test_short_generic_triangle(self):
        points = landscape.points_from_values([0, 1, 1j])
        self.assertEqual(landscape.genericity_check(points), [])
        self.assertEqual(len(landscape.stokes_rays(points).rays), 6)

    def test_short_angles(self):
        self.assertLess(landscape.angle_distance(0.1, 2 * mpmath.pi - 0.1) - 0.2, 1e-25)
        self.assertLess(abs(landscape.normalized_angle(-mpmath.pi / 2) - 3 * mpmath.pi / 2), 1e-25)
        rays = landscape.StokesRaySet(())
        self.assertEqual(rays.distance_to_rays(1), mpmath.inf)

    def test_short_singular_hessian(self):
        with self.assertRaises(errors.NoConvergence):
            landscape.newton_from_seed(parse_expression('z'), (mpmath.mpc(0.5),))

    def test_short_reverification(self):
        with self.assertRaises(errors.NoConvergence):
            landscape.make_critical_point(parse_expression('z^3/3 - z'), (mpmath.mpc(0.9),))

    def test_short_seed_grid(self):
        scene = make_scene('x*y', ['x', 'y'], seeds_per_axis=8)
        seeds = landscape.seed_grid(scene)
        self.assertEqual(len(seeds), landscape.MAX_SEEDS)
        self.assertEqual(seeds, landscape.seed_grid(scene))

    def test_short_degenerate_point(self):
        scene = make_scene('z^3', seeds_per_axis=3, seed_box=[(-0.5 - 0.5j, 0.5 + 0.5j)])
        points = landscape.find_critical_points(scene, landscape.DEFAULT_TOLERANCES.replace(
            tol_newton=mpmath.mpf('1e-30')))
        self.assertTrue(points)
        self.assertFalse(points[0].morse)


if __name__ == '__main__':
    unittest.main()
