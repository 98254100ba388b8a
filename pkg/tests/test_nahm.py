"""Tests the file nahm"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use
from fractions import Fraction
import functools
import logging
import os
import tempfile
import unittest

import mpmath
import sympy

from resurgix.helper import errors, nahm
from resurgix.helper.expressions import expr_eval, parse_expression
from resurgix.helper.precision import HIGH_PRECISION

Y = nahm.Y
TRIANGLE = (((-1, 0), 0), ((0, -1), 0), ((1, 1), 1))
NOWHERE = (((1,), Fraction(1, 2)), ((-1,), Fraction(-3, 4)))


@functools.lru_cache(maxsize=None)
def golden():
    return nahm.read_nahm('golden')


@functools.lru_cache(maxsize=None)
def dominant():
    return nahm.read_nahm('dominant')


@functools.lru_cache(maxsize=None)
def golden_critical():
    return nahm.critical_solve(golden())


@functools.lru_cache(maxsize=None)
def dominant_critical():
    return nahm.critical_solve(dominant())


def one_dimensional(a, b, c=0, chi=0, inequalities=None):
    return nahm.NahmData(((b,),), (a,), (c,), (chi,), inequalities)


def direct_golden(N):
    with mpmath.workprec(HIGH_PRECISION):
        q = mpmath.exp(2j * mpmath.pi / N)
        total = mpmath.mpc(0)
        for j in range(N):
            factorial = mpmath.mpc(1)
            for k in range(1, j + 1):
                factorial *= 1 - q ** k
            total += q ** (j * j) / factorial
        return total


class Test(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def test_short_read_fixtures(self):
        data = golden()
        self.assertEqual(data.d, 1)
        self.assertEqual(data.a, (-1,))
        self.assertEqual(data.b, ((Fraction(2),),))
        self.assertEqual(data.vertices(), [(Fraction(0),), (Fraction(1),)])
        self.assertEqual(data.residue_period(), 1)
        self.assertIn('two_saddle', nahm.bundled_nahm())

        face = nahm.read_nahm('half_face')
        self.assertEqual(face.vertices(), [(Fraction(1, 3),), (Fraction(1, 2),)])
        self.assertTrue(face.contains((3,), 6))
        self.assertFalse(face.contains((4,), 6))

    def test_short_read_errors(self):
        with tempfile.TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'broken.nahm')
            with open(filename, 'w') as f:
                f.write('[nahm]\na = -1, 1\nb = 1, 2; 3, 1\n')
            self.assertRaises(errors.ResurgixError, nahm.read_nahm, filename)
            with open(filename, 'w') as f:
                f.write('[nahm]\na = -1\n')
            self.assertRaises(errors.ResurgixError, nahm.read_nahm, filename)
        self.assertRaises(FileNotFoundError, nahm.read_nahm, 'no_such_fixture')
        self.assertRaises(errors.ResurgixError, one_dimensional, -1, 2,
                          inequalities=(((1,), Fraction(3, 2)), ((-1,), 0)))
        self.assertRaises(errors.ResurgixError, nahm.parse_inequalities, '1 < 2', 1)

    def test_short_residue_period(self):
        data = nahm.NahmData(((Fraction(1, 2), 0), (0, 1)), (1, -1), (0, Fraction(1, 4)),
                             (Fraction(1, 3), 0))
        self.assertEqual(data.residue_period(), 12)
        self.assertEqual(one_dimensional(-1, 2, chi=Fraction(4, 3)).chi, (Fraction(1, 3),))

    def test_short_trivial_sums(self):
        self.assertEqual(nahm.nahm_sum(golden(), 1), 1)
        empty = golden().with_inequalities(NOWHERE)
        self.assertTrue(empty.is_empty())
        self.assertEqual(nahm.nahm_sum(empty, 7), 0)

    def test_short_golden_direct(self):
        with mpmath.workprec(HIGH_PRECISION):
            difference = abs(nahm.nahm_sum(golden(), 5) - direct_golden(5))
        self.assertLess(difference, 1e-60)

    def test_short_permutation_invariance(self):
        data = nahm.NahmData(((2, 1), (1, 3)), (-1, 1), (Fraction(1, 2), 0), (Fraction(1, 3), 0),
                             TRIANGLE)
        swapped = data.permuted((1, 0))
        self.assertEqual(swapped.a, (1, -1))
        for N in (5, 7, 8):
            self.assertEqual(nahm.nahm_sum(data, N), nahm.nahm_sum(swapped, N))

    def test_short_product_sums(self):
        data = nahm.NahmData(((2, 0), (0, 1)), (-1, 1), (0, 0), (0, Fraction(1, 2)),
                             (((-1, 0), 0), ((1, 0), 1), ((0, -1), 0), ((0, 1), Fraction(1, 2))))
        factors = nahm.factorize(data)
        self.assertEqual(len(factors), 2)
        self.assertEqual(factors[1].vertices(), [(Fraction(0),), (Fraction(1, 2),)])
        with mpmath.workprec(HIGH_PRECISION):
            product = nahm.nahm_sum(factors[0], 6) * nahm.nahm_sum(factors[1], 6)
            self.assertLess(abs(nahm.nahm_sum(data, 6) - product), 1e-60)
        self.assertIsNone(nahm.factorize(nahm.NahmData(((2, 1), (1, 3)), (-1, 1), (0, 0), (0, 0))))

    def test_short_zero_factorial_guard(self):
        data = one_dimensional(-1, 2)
        self.assertRaises(errors.ZeroQFactorialDivision, nahm._term, data, 2,
                          [mpmath.mpc(1), mpmath.mpc(0)], (1,))

    def test_short_last_q_factorial(self):
        for N in (5, 12, 31):
            self.assertLess(abs(nahm.q_factorials(N)[N - 1] - N), 1e-30)

    def test_short_partial_sums(self):
        sums = nahm.z_sum_partial(golden(), 3, 1)
        self.assertEqual(len(sums), 3)
        self.assertEqual(sums[0], 1)
        with mpmath.workprec(HIGH_PRECISION):
            self.assertLess(abs(sums[2] - sums[1] - direct_golden(3)), 1e-60)

    def test_short_golden_critical_points(self):
        crits = golden_critical()
        self.assertEqual(len(crits), 2)
        by_mode = {c.modes: c for c in crits}
        inverse, negative = by_mode[(0,)], by_mode[(1,)]
        phi = (1 + mpmath.sqrt(5)) / 2
        self.assertLess(abs(inverse.x[0] - (mpmath.sqrt(5) - 1) / 2), 1e-15)
        self.assertLess(abs(negative.x[0] + phi), 1e-15)
        self.assertLess(abs(negative.u[0] - mpmath.log(phi) - 1j * mpmath.pi), 1e-20)
        self.assertLess(abs(inverse.f_value + mpmath.pi ** 2 / 15), 1e-20)
        self.assertLess(abs(negative.f_value - 11 * mpmath.pi ** 2 / 15), 1e-20)
        self.assertEqual(inverse.face, 'interior')
        self.assertEqual(sorted(c.index for c in crits), [0, 1])

    def test_short_simple_critical_points(self):
        crits = nahm.critical_solve(one_dimensional(-1, 1))
        self.assertEqual(len(crits), 1)
        self.assertLess(abs(crits[0].x[0] - mpmath.mpf(1) / 2), 1e-20)
        self.assertEqual(crits[0].modes, (0,))

        self.assertRaises(errors.DegenerateSolution, nahm.critical_solve, one_dimensional(-1, 0))
        self.assertEqual(nahm.critical_solve(one_dimensional(-1, 0), allow_degenerate=True), [])

    def test_short_two_saddle_critical_points(self):
        crits = nahm.critical_solve(nahm.read_nahm('two_saddle'))
        self.assertEqual(len(crits), 3)
        for c in crits:
            x = c.x[0]
            self.assertLess(abs(x ** 3 + x - 1), 1e-20)

    def test_short_dominant_critical_point(self):
        crits = dominant_critical()
        self.assertEqual(len(crits), 2)
        top = crits[0]
        self.assertEqual(top.index, 0)
        self.assertEqual(top.modes, (1,))
        self.assertLess(abs(top.x[0] - mpmath.expjpi(mpmath.mpf(-1) / 3)), 1e-20)
        self.assertLess(abs(top.growth - mpmath.clsin(2, mpmath.pi / 3) / (2 * mpmath.pi)), 1e-20)
        self.assertLess(abs(top.f_value.real - 25 * mpmath.pi ** 2 / 12), 1e-20)

    def test_short_q_factorial_asymptotics(self):
        data = one_dimensional(1, 0)
        N, j = 200, 70
        with mpmath.workprec(HIGH_PRECISION):
            hbar = 2j * mpmath.pi / N
            u = (j * hbar,)
            exact = nahm.q_factorials(N)[j]
            phi = expr_eval(parse_expression(nahm.exponent_text(data, (0,)), ('u',)), u)
            levels = [expr_eval(parse_expression(text, ('u',)), u)
                      for text in nahm.log_density_texts(data, 2)]
            self.assertEqual(nahm.log_density_texts(data, 2)[2], '0')
            base = phi / hbar + levels[0] + mpmath.log(1j * N) / 2
            leading = mpmath.exp(base)
            corrected = mpmath.exp(base + hbar * levels[1])
            self.assertLess(abs(corrected / exact - 1), 1e-4)
            self.assertLess(abs(corrected / exact - 1), abs(leading / exact - 1) / 10)

    def test_short_psi_recursion(self):
        fs = nahm.psi_x1_recursion(2)
        self.assertEqual(sympy.simplify(fs[0] + 1 / Y), 0)
        self.assertEqual(sympy.simplify(fs[1] + 1 / Y ** 2), 0)
        self.assertEqual(sympy.simplify(fs[2] - (-2 / Y ** 3 + sympy.Rational(1, 2) / Y ** 2)), 0)

        printed = nahm.psi_x1_recursion(1, 'every_order')
        self.assertEqual(sympy.simplify(printed[1] + 1 / Y + 1 / Y ** 2), 0)
        self.assertRaises(AssertionError, nahm.psi_x1_recursion, -1)

    def test_short_psi_residual(self):
        for variant in ('leading', 'every_order'):
            fs = nahm.psi_x1_recursion(3, variant)
            residual = nahm.psi_x1_residual(fs, 4, variant)
            self.assertEqual(residual[:4], [0, 0, 0, 0])
            self.assertNotEqual(residual[4], 0)

    def test_short_dft_orders(self):
        first = nahm.dft_wavefunction_check(256, 0)
        second = nahm.dft_wavefunction_check(256, 1)
        self.assertLess(second['deviations'][0], first['deviations'][0])
        self.assertRaises(AssertionError, nahm.dft_wavefunction_check, 64, 1, (0.0,))
        self.assertRaises(AssertionError, nahm.dft_wavefunction_check, 64, 5)

    def test_dft_decay(self):
        report = nahm.dft_wavefunction_check((64, 128, 256, 512), 1)
        self.assertGreaterEqual(report['decay_exponent'], 1.7)

    def test_dft_prefers_leading_inhomogeneity(self):
        leading = nahm.dft_wavefunction_check((128, 256), 1)
        every_order = nahm.dft_wavefunction_check((128, 256), 1, inhomogeneous='every_order')
        for better, worse in zip(leading['deviations'], every_order['deviations']):
            self.assertLess(5 * better, worse)
        self.assertGreater(leading['decay_exponent'], 1.7)
        self.assertLess(every_order['decay_exponent'], 1.3)

    def test_dominant_sweep(self):
        data = dominant()
        top = dominant_critical()[0]
        report = nahm.saddle_sweep(data, top, (50, 100, 200, 400), K=0)
        self.assertGreaterEqual(report['decay_exponent'], 0.8)
        deviations = [row['deviation'] for row in report['rows']]
        for before, after in zip(deviations[:-1], deviations[1:]):
            self.assertLess(after, 1.1 * before)

        corrected = nahm.saddle_sweep(data, top, (400,), K=1)
        self.assertLess(corrected['rows'][0]['deviation'], deviations[-1])

    def test_dominant_match(self):
        data = dominant()
        matches = nahm.match_integers(data, dominant_critical()[:1], (50, 100, 200, 400))
        self.assertEqual(len(matches), 1)
        match = matches[0]
        self.assertEqual(match.coefficients, (1,))
        self.assertTrue(match.stable)
        self.assertTrue(match.conjectural)
        self.assertLess(match.trend, -0.8)
        self.assertAlmostEqual(abs(match.least_squares[0]), 1, places=1)

    def test_short_empty_match(self):
        empty = golden().with_inequalities(NOWHERE)
        matches = nahm.match_integers(empty, golden_critical(), (10, 20))
        self.assertEqual(matches[0].coefficients, (0, 0))
        self.assertTrue(matches[0].exact)
        self.assertRaises(AssertionError, nahm.match_integers, empty, golden_critical(), (10,))

    def test_short_degenerate_series(self):
        crits = nahm.critical_solve(one_dimensional(-1, 0), allow_degenerate=True)
        self.assertEqual(crits, [])
        self.assertRaises(errors.DegenerateSolution, nahm.face_contribution, golden(), 0, 10)

    def test_face_contribution(self):
        data = nahm.read_nahm('half_face')
        self.assertRaises(errors.ConditionViolated, nahm.face_contribution, data,
                          Fraction(1, 3), 60)
        Ns = (60, 120, 240)
        deviations = []
        for N in Ns:
            prediction = nahm.face_contribution(data, Fraction(1, 2), N)
            deviations.append(abs(nahm.nahm_sum(data, N) - prediction) / abs(prediction))
        self.assertGreaterEqual(nahm.decay_exponent(Ns, deviations), 0.8)


if __name__ == '__main__':
    unittest.main()
