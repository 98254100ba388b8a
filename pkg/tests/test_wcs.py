"""Tests the file wcs"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use

import functools
import logging
import os
import tempfile
import unittest

import mpmath
import numpy as np
import sympy

from resurgix.helper import errors, thimble, wcs
from resurgix.helper.precision import HIGH_PRECISION, working_precision
from resurgix.helper.scenes import read_scene
from resurgix.helper.series import FormalSeries


def constant_package(points, stokes=None, constants=None):
    constants = constants or [1] * len(points)
    return wcs.make_package(points, [FormalSeries.constant(c, 2) for c in constants], stokes)


def triangle_package():
    """Three values in general position with every Stokes index set to 1."""
    points = [0, 1, 1j]
    stokes = {(i, j): 1 for i in range(3) for j in range(3) if i != j}
    return constant_package(points, stokes)


@functools.lru_cache(maxsize=None)
def airy_package(K=40):
    with working_precision(HIGH_PRECISION):
        return wcs.package_from_scene(read_scene('airy'), K)


def strictly_upper(rng, size, low=-3, high=4):
    return sympy.Matrix(size, size, lambda a, b: int(rng.integers(low, high)) if b > a else 0)


class Test(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def test_short_package_round_trip(self):
        series = [FormalSeries([1, 0.5, -0.25j]), FormalSeries([2, 1j, 3], mu='1/2')]
        pkg = wcs.make_package([-2, 2j], series, {(0, 1): -1, (1, 0): 0})
        self.assertEqual(pkg.stokes, {(0, 1): -1})
        with tempfile.TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'package.json')
            wcs.write_package(pkg, filename)
            loaded = wcs.read_package(filename)
        self.assertEqual(loaded.stokes, pkg.stokes)
        self.assertEqual(list(loaded.points), list(pkg.points))
        for original, copy in zip(pkg.series, loaded.series):
            self.assertEqual(copy.mu, original.mu)
            self.assertLess(copy.distance(original), 1e-30)

    def test_short_package_rejects_coincident_points(self):
        with self.assertRaises(errors.CoincidentValues):
            constant_package([1, 1])

    def test_short_single_point_is_vacuously_valid(self):
        report = wcs.validate_package(constant_package([0]))
        self.assertEqual(len(report), 0)
        self.assertTrue(report['passed'].all())

    def test_airy_validation(self):
        pkg = airy_package()
        self.assertEqual(sorted(pkg.stokes), [(0, 1), (1, 0)])
        self.assertEqual([abs(n) for n in pkg.stokes.values()], [1, 1])
        report = wcs.validate_package(pkg)
        self.assertEqual(len(report), 2)
        self.assertTrue(report['detected'].all())
        self.assertTrue(report['passed'].all(), msg=report.to_string())

        fabricated = wcs.make_package(pkg.points, pkg.series, {**pkg.stokes, (0, 1): 5})
        report = wcs.validate_package(fabricated).set_index(['i', 'j'])
        self.assertFalse(report.loc[(0, 1), 'passed'])
        self.assertEqual(abs(report.loc[(0, 1), 'alpha_int']), 1)
        self.assertTrue(report.loc[(1, 0), 'passed'])

    def test_short_jump_factors_unipotent(self):
        data = wcs.stokes_data(triangle_package())
        self.assertEqual(len(data.rays.rays), 6)
        for factor in data.jump_factors:
            self.assertTrue(wcs.is_unipotent(factor, 2))

        collinear = constant_package([0, 1, 2], {(0, 1): 1, (1, 2): 1, (0, 2): 1,
                                                 (1, 0): 1, (2, 1): 1, (2, 0): 1})
        data = wcs.stokes_data(collinear)
        self.assertEqual(len(data.rays.rays), 2)
        for ray, factor in zip(data.rays.rays, data.jump_factors):
            self.assertEqual(len(ray.pairs), 3)
            self.assertFalse(wcs.is_unipotent(factor, 2))
            self.assertTrue(wcs.is_unipotent(factor, 3))

    def test_short_weights(self):
        pkg = constant_package([0, 1], {(1, 0): 2})
        data = wcs.stokes_data(pkg)
        X0, X1 = pkg.weights()
        factor, = [m for m in data.jump_factors if m != sympy.eye(2)]
        self.assertEqual(sympy.simplify(factor[1, 0] - 2 * X0 / X1), 0)
        t = mpmath.mpf('0.5')
        numeric = wcs.specialize(factor, pkg, t)
        self.assertLess(abs(numeric[1, 0] - 2 * mpmath.exp(-1 / t)), 1e-30)
        self.assertEqual(wcs.specialize(factor, pkg), sympy.Matrix([[1, 0], [2, 1]]))

    def test_short_sector_cocycle(self):
        data = wcs.stokes_data(triangle_package())
        first = wcs.Sector(0, 2, include_start=True)
        second = wcs.Sector(2, 5)
        union = wcs.Sector(0, 5, include_start=True)
        product = wcs.sector_product(data, second) * wcs.sector_product(data, first)
        self.assertTrue(wcs.same_matrix(product, wcs.sector_product(data, union)))

        third = wcs.Sector(5, 2 * mpmath.pi, include_end=False)
        full = wcs.Sector(0, 2 * mpmath.pi, include_start=True, include_end=False)
        product = wcs.sector_product(data, third) * wcs.sector_product(data, union)
        self.assertTrue(wcs.same_matrix(product, wcs.sector_product(data, full)))
        self.assertNotEqual(wcs.sector_product(data, full), sympy.eye(3))

    def test_short_empty_sector(self):
        data = wcs.stokes_data(triangle_package())
        self.assertEqual(wcs.sector_product(data, wcs.Sector(0.1, 0.2)), sympy.eye(3))

    def test_short_ray_on_boundary(self):
        data = wcs.stokes_data(triangle_package())
        with self.assertRaises(errors.RayOnBoundary):
            wcs.sector_product(data, wcs.Sector(0, 2))
        with self.assertRaises(errors.RayOnBoundary):
            wcs.sector_product(data, wcs.Sector(0, 2 * mpmath.pi, include_start=True,
                                                include_end=True))
        excluded = wcs.sector_product(data, wcs.Sector(0, 0.5, include_start=False))
        self.assertEqual(excluded, sympy.eye(3))

    def test_airy_full_turn_matches_valley_monodromy(self):
        scene = read_scene('airy')
        pkg = wcs.package_from_scene(scene, 2)
        data = wcs.stokes_data(pkg)
        valley = thimble.valley_monodromy(scene)
        sector = wcs.Sector(valley.theta0, valley.theta0 + 2 * mpmath.pi)
        product = wcs.specialize(wcs.sector_product(data, sector), pkg)
        product = np.array(product.tolist(), dtype=int)
        self.assertEqual(np.abs(product).tolist(), np.abs(valley.product).tolist())
        self.assertEqual(round(np.linalg.det(product)), 1)

    def test_short_family_update(self):
        zeros = {(0, 1): 0, (1, 2): 0, (0, 2): 0}
        self.assertEqual(wcs.family_update(zeros, (0, 1, 2)), zeros)

        updated = wcs.family_update({(0, 1): 1, (1, 2): 1, (0, 2): 0}, (0, 1, 2))
        self.assertEqual(updated, {(0, 1): 1, (1, 2): 1, (0, 2): 1})

        rng = np.random.default_rng(11)
        for _ in range(20):
            T = {pair: complex(*rng.normal(size=2)) for pair in [(0, 1), (1, 2), (0, 2), (2, 0)]}
            there = wcs.family_update(T, (0, 1, 2))
            back = wcs.family_update(there, (0, 1, 2), inverse=True)
            self.assertEqual(there[(2, 0)], T[(2, 0)])
            for pair, value in T.items():
                self.assertAlmostEqual(back[pair], value, places=12)

    def test_short_family_update_matrices(self):
        left = np.array([[1, 2], [0, 1]])
        right = np.array([[0, 1], [1, 0]])
        updated = wcs.family_update({(0, 1): left, (1, 2): right}, (0, 1, 2))
        self.assertEqual(updated[(0, 2)].tolist(), (left @ right).tolist())

    def test_short_bad_alignment(self):
        with self.assertRaises(errors.BadAlignment):
            wcs.family_update({}, (0, 0, 2))
        points = [0, 1, 2]
        wcs.family_update({}, (0, 1, 2), points=points)
        with self.assertRaises(errors.BadAlignment):
            wcs.family_update({}, (1, 0, 2), points=points)
        with self.assertRaises(errors.BadAlignment):
            wcs.family_update({}, (0, 1, 2), points=[0, 1 + 1j, 2])

    def test_short_focus_focus(self):
        self.assertTrue(wcs.monodromy_check_focus_focus())
        self.assertFalse(wcs.monodromy_check_focus_focus(Y=sympy.eye(2)))
        self.assertFalse(wcs.monodromy_check_focus_focus(X=wcs.FOCUS_FOCUS_PRINTED_X))
        # -X gives (XY)^3 = -id
        self.assertFalse(wcs.monodromy_check_focus_focus(X=-wcs.FOCUS_FOCUS_X))

    def test_short_identities_commuting(self):
        A = np.diag([0.1, 0.2j, -0.3])
        B = np.diag([0.25, -0.1, 0.05j])
        self.assertTrue(wcs.five_term_check(A, B))
        self.assertTrue(wcs.six_term_check(A, B))

    def test_short_identities_random(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            A, B = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(2))
            A *= 0.35 / np.linalg.norm(A, 2)
            B *= 0.35 / np.linalg.norm(B, 2)
            self.assertTrue(wcs.five_term_check(A, B))
            self.assertTrue(wcs.six_term_check(A, B))

    def test_short_identities_exact(self):
        rng = np.random.default_rng(8)
        A, B = strictly_upper(rng, 5), strictly_upper(rng, 5)
        self.assertTrue(wcs.five_term_check(A, B))
        self.assertTrue(wcs.six_term_check(A, B))

    def test_short_identities_series(self):
        A = FormalSeries([0, 1, 2, 0.5])
        B = FormalSeries([0.25, -1, 0, 3])
        self.assertTrue(wcs.five_term_check(A, B))
        self.assertTrue(wcs.six_term_check(A, B))

    def test_short_identities_not_invertible(self):
        with self.assertRaises(errors.NotInvertible):
            wcs.five_term_check(np.zeros((2, 2)), np.eye(2))
        with self.assertRaises(errors.NotInvertible):
            wcs.six_term_check(sympy.Matrix([[0, 1], [0, 0]]), sympy.Matrix([[0, 0], [1, 0]]))
        with self.assertRaises(errors.NotInvertible):
            wcs.five_term_check(FormalSeries([0, 1]), FormalSeries([1, 1]))

    def test_short_farey_trivial(self):
        zero = sympy.zeros(3, 3)
        result = wcs.farey_product(zero, zero, 3)
        self.assertTrue(result.exact)
        self.assertEqual(result.product, sympy.eye(3))

    def test_short_farey_exact(self):
        rng = np.random.default_rng(2)
        A, B = strictly_upper(rng, 4), strictly_upper(rng, 4)
        result = wcs.farey_product(A, B, 4)
        self.assertTrue(result.exact)
        self.assertEqual(len(result.factors), 2 ** 4 - 1)
        self.assertEqual(list(result.factors), sorted(result.factors, reverse=True))
        self.assertTrue(wcs.farey_product(A, B, 2).exact)
        self.assertEqual(wcs.farey_product(A, B, 3).product, result.product)

    def test_short_farey_needs_depth(self):
        A = sympy.Matrix(4, 4, lambda a, b: 1 if (a, b) in [(0, 1), (2, 3)] else 0)
        B = sympy.Matrix(4, 4, lambda a, b: 1 if (a, b) == (1, 2) else 0)
        self.assertFalse(wcs.farey_product(A, B, 0).exact)
        self.assertTrue(wcs.farey_product(A, B, 2).exact)

    def test_short_farey_factorization(self):
        rng = np.random.default_rng(4)
        A, B = strictly_upper(rng, 5), strictly_upper(rng, 5)
        for depth in range(4):
            result = wcs.farey_factorization(A, B, depth)
            self.assertTrue(result.exact, msg=f"depth {depth}")
            self.assertEqual(len(result.factors), 2 ** depth)

    def test_short_farey_not_nilpotent(self):
        with self.assertRaises(errors.NotNilpotent):
            wcs.farey_product(sympy.eye(2), sympy.zeros(2, 2), 1)

    def test_short_gamma_identities(self):
        report = wcs.gamma_rh_check()
        self.assertEqual(len(report), 20)
        self.assertLess(report['residual'].max(), 1e-10)
        self.assertLess(report['gamma_recursion'].max(), 1e-25)
        lower = report[report['side'] == '-i']
        self.assertEqual(len(lower), 10)
        self.assertGreater(lower['printed_residual'].min(), 0.5)

    def test_short_gamma_single_points(self):
        report = wcs.gamma_rh_check([0.2j, -0.2j])
        self.assertEqual(list(report['side']), ['+i', '-i'])
        self.assertLess(report['residual'].max(), 1e-10)

    def test_short_reconstruction_gated(self):
        with self.assertRaises(errors.ResurgixError):
            wcs.rh_reconstruct(constant_package([0]), [0.1j])

    def test_short_reconstruction_without_jumps(self):
        solution = wcs.rh_reconstruct(constant_package([0], constants=[2]), [0.1j, -0.3],
                                      enable_stretch=True)
        self.assertEqual(solution.values.shape, (1, 2))
        self.assertTrue(np.allclose(solution.values, 2))

        pkg = constant_package([-1, 1], constants=[3, 1j])
        solution = wcs.rh_reconstruct(pkg, [0.1j, 0.2 - 0.1j], enable_stretch=True)
        self.assertTrue(np.allclose(solution.values[0], 3))
        self.assertTrue(np.allclose(solution.values[1], 1j))
        self.assertEqual(solution.iterations, 1)

    def test_airy_reconstruction(self):
        scene = read_scene('airy')
        pkg = wcs.package_from_scene(scene, 2)
        points = thimble.scene_points(scene)
        grid = [0.1 * mpmath.expj(phi) for phi in (np.pi / 2, -np.pi / 2, 1.2, -2.0)]
        solution = wcs.rh_reconstruct(pkg, grid, enable_stretch=True)
        for k, t in enumerate(grid):
            for crit in points:
                value = thimble.thimble_integral(scene, crit, t).value
                expected = value * mpmath.exp(-crit.z / t) / mpmath.sqrt(2 * mpmath.pi * t)
                self.assertLess(abs(solution.values[crit.index, k] - complex(expected)), 1e-4,
                                msg=f"point {crit.index}, t = {t}")


if __name__ == '__main__':
    unittest.main()
