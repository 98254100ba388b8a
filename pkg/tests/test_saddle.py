"""Tests the file saddle"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use

import logging
import unittest

import mpmath

from resurgix.helper import errors, landscape, saddle, thimble
from resurgix.helper.scenes import make_scene, read_scene


class Test(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def assertCoeffsClose(self, series, expected, tol=1e-25):
        for k, value in enumerate(expected):
            self.assertLess(abs(series[k] - value), tol, msg=f"coefficient {k}")

    def test_short_gaussian(self):
        scene = make_scene('-z^2/2')
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(0),))
        expansion = saddle.local_expansion_1d(scene, crit, 10)
        self.assertCoeffsClose(expansion.series, [1] + [0] * 10)
        self.assertEqual(expansion.sign_choice, 1)

    def test_short_stirling(self):
        scene = read_scene('gamma')
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(1),))
        series = saddle.local_expansion_1d(scene, crit, 6).series
        expected = [1, mpmath.mpf(1) / 12, mpmath.mpf(1) / 288, -mpmath.mpf(139) / 51840,
                    -mpmath.mpf(571) / 2488320]
        self.assertCoeffsClose(series, expected)

    def test_short_quartic_perturbation(self):
        scene = make_scene('-z^2/2 + z^4')
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(0),))
        expected = [1, 3, mpmath.mpf(105) / 2, mpmath.mpf(10395) / 6]
        self.assertCoeffsClose(saddle.local_expansion_1d(scene, crit, 3).series, expected)
        self.assertCoeffsClose(saddle.local_expansion_wick(scene, crit, 3).series, expected)

    def test_short_paths_agree(self):
        scene = read_scene('airy')
        crit = thimble.scene_points(scene)[0]
        by_reversion = saddle.local_expansion_1d(scene, crit, 8).series
        by_wick = saddle.local_expansion_wick(scene, crit, 8).series
        self.assertLess(by_reversion.distance(by_wick), 1e-25)
        other = thimble.scene_points(scene)[1]
        self.assertLess(saddle.local_expansion_1d(scene, other, 8).series.distance(
            saddle.local_expansion_wick(scene, other, 8).series), 1e-25)

    def test_short_canonical_sign(self):
        scene = read_scene('airy')
        for crit in thimble.scene_points(scene):
            c0 = saddle.local_expansion_1d(scene, crit, 2).series[0]
            self.assertGreater(mpmath.arg(c0), -mpmath.pi / 2 + 1e-6)
            self.assertLess(mpmath.arg(c0), mpmath.pi / 2 + 1e-6)
            self.assertLess(abs(c0 ** 2 - 1 / (-crit.hessian[0, 0])), 1e-25)

    def test_short_two_variable_gaussian(self):
        scene = make_scene('-(x^2 + y^2)/2', ['x', 'y'])
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(0), mpmath.mpc(0)))
        self.assertCoeffsClose(saddle.local_expansion_wick(scene, crit, 4).series, [1, 0, 0, 0, 0])

    def test_short_separable_product(self):
        scene = make_scene('x^3/3 - x - y^2/2 + y^4', ['x', 'y'])
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(1), mpmath.mpc(0)))
        product = saddle.local_expansion(scene, crit, 5).series

        cubic = make_scene('x^3/3 - x', ['x'])
        quartic = make_scene('-y^2/2 + y^4', ['y'])
        left = saddle.local_expansion_1d(
            cubic, landscape.make_critical_point(cubic.f, (mpmath.mpc(1),)), 5).series
        right = saddle.local_expansion_1d(
            quartic, landscape.make_critical_point(quartic.f, (mpmath.mpc(0),)), 5).series
        self.assertLess(product.distance(left * right), 1e-25)

    def test_short_density(self):
        scene = make_scene('-z^2/2')
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(0),))
        # g = 1 + t z^2 has <g> = 1 + t^2
        series = saddle.local_expansion_wick(scene, crit, 3, density=['1', 'z^2']).series
        self.assertCoeffsClose(series, [1, 0, 1, 0])

    def test_short_non_morse(self):
        scene = make_scene('z^3')
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(0),))
        with self.assertRaises(errors.NonMorse):
            saddle.local_expansion_1d(scene, crit, 3)
        with self.assertRaises(errors.NonMorse):
            saddle.local_expansion_wick(scene, crit, 3)
        self.assertEqual(saddle.local_expansions(scene, [crit], 3), [None])

    def test_short_order_infeasible(self):
        with mpmath.workprec(64):
            scene = read_scene('airy')
            crit = landscape.make_critical_point(scene.f, (mpmath.mpc(1),))
            with self.assertRaises(errors.OrderInfeasible):
                saddle.local_expansion_1d(scene, crit, 40)

    def test_short_gevrey(self):
        scene = read_scene('airy')
        crit = thimble.scene_points(scene)[0]
        series = saddle.local_expansion_1d(scene, crit, 24).series
        _, b = saddle.gevrey_fit(series, skip=4)
        self.assertGreater(b, 0.75 / 3)
        self.assertLess(b, 0.75 * 3)
        self.assertIsNone(saddle.gevrey_fit(saddle.local_expansion_1d(
            make_scene('-z^2/2'), landscape.make_critical_point(
                make_scene('-z^2/2').f, (mpmath.mpc(0),)), 6).series))

    def test_short_pairing_trivial(self):
        series = saddle.pairing_expansion(['-q^2/2'], ['0'], [0], 4)
        self.assertCoeffsClose(series, [1, 0, 0, 0, 0])

    def test_short_pairing_cubic(self):
        paired = saddle.pairing_expansion(['-q^2/2'], ['q^3'], [0], 5)
        scene = make_scene('-q^2/2 + q^3', ['q'])
        crit = landscape.make_critical_point(scene.f, (mpmath.mpc(0),))
        direct = saddle.local_expansion_wick(scene, crit, 5).series
        self.assertLess(paired.distance(direct), 1e-25)

    def test_short_pairing_density(self):
        paired = saddle.pairing_expansion(['-q^2/2', 'q^2'], ['0'], [0], 3)
        # exp(q^2) against the Gaussian: sum_m t^m (2m-1)!!/m!
        expected = [1, 1, mpmath.mpf(3) / 2, mpmath.mpf(15) / 6]
        self.assertCoeffsClose(paired, expected)

    def test_short_fiber_pairing(self):
        series = saddle.pairing_expansion(['-q^2/2', 'q', 'q^2'], 'fiber', [2], 3)
        e2 = mpmath.exp(2)
        self.assertCoeffsClose(series, [e2, 4 * e2, 8 * e2, e2 * 32 / 3])

    def test_thimble_consistency(self):
        scene = read_scene('airy')
        crit = thimble.scene_points(scene)[0]
        series = saddle.local_expansion_1d(scene, crit, 6).series
        t = mpmath.mpf('0.02') * mpmath.expj(0.3)
        value = thimble.thimble_integral(scene, crit, t).value
        modified = value * mpmath.exp(-crit.z / t) / mpmath.sqrt(2 * mpmath.pi * t)
        self.assertLess(abs(modified - series.evaluate(t)), 1e-8)


if __name__ == '__main__':
    unittest.main()
