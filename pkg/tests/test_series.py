"""Tests the file series"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use

from fractions import Fraction
import unittest

import mpmath

from resurgix.helper import errors
from resurgix.helper.series import FormalSeries, series_arith


class Test(unittest.TestCase):
    def assertSeriesClose(self, series, expected, tol=1e-30):
        self.assertEqual(series.K, len(expected) - 1)
        for k, value in enumerate(expected):
            self.assertLess(abs(series[k] - value), tol, msg=f"coefficient {k}")

    def test_short_exp_log_identity(self):
        one_plus = FormalSeries([1, 1] + [0] * 7)
        result = series_arith('exp', series_arith('log', one_plus))
        self.assertSeriesClose(result, [1, 1] + [0] * 7)

    def test_short_reversion(self):
        u = FormalSeries([0, 1, 1, 0])
        inverse = series_arith('reversion', u)
        self.assertSeriesClose(inverse, [0, 1, -1, 2])
        back = series_arith('compose', u, inverse)
        self.assertSeriesClose(back, [0, 1, 0, 0])

    def test_short_reversion_long(self):
        with mpmath.workprec(128):
            u = FormalSeries([0, 1, mpmath.mpf(1) / 3, -2, 5, mpmath.mpf(1) / 7] + [1] * 15)
            identity = u.compose(u.reversion())
            expected = [0, 1] + [0] * (u.K - 1)
            self.assertSeriesClose(identity, expected, tol=2 ** -64)

    def test_short_reciprocal_times_series(self):
        geometric = FormalSeries([1] * 6)
        one_minus = FormalSeries([1, -1, 0, 0, 0, 0])
        self.assertSeriesClose(series_arith('mul', geometric, one_minus), [1, 0, 0, 0, 0, 0])
        self.assertSeriesClose(one_minus.reciprocal(), [1] * 6)

    def test_short_sqrt_and_power(self):
        one_plus = FormalSeries([1, 1, 0, 0, 0])
        root = series_arith('sqrt', one_plus)
        self.assertSeriesClose(root, [1, 0.5, -0.125, 0.0625, -0.0390625])
        self.assertLess((root * root).distance(one_plus), 1e-30)
        self.assertLess(one_plus.power(Fraction(1, 2)).distance(root), 1e-30)
        self.assertSeriesClose(one_plus ** 3, [1, 3, 3, 1, 0])

    def test_short_prefactor_exponents(self):
        a = FormalSeries([1, 2, 3], mu=Fraction(1, 2))
        b = FormalSeries([1, 1, 1], mu=Fraction(1, 2))
        self.assertEqual((a * b).mu, Fraction(1))
        self.assertEqual(a.sqrt().mu, Fraction(1, 4))
        self.assertEqual(a.reciprocal().mu, Fraction(-1, 2))
        shifted = a + b.shift_mu(1)
        self.assertSeriesClose(shifted, [1, 3, 4])

    def test_short_truncation_is_minimum(self):
        a = FormalSeries([1, 2, 3, 4])
        b = FormalSeries([1, 1])
        self.assertEqual((a + b).K, 1)
        self.assertEqual((a * b).K, 1)

    def test_short_errors(self):
        zero_start = FormalSeries([0, 1, 2])
        with self.assertRaises(errors.ZeroLeadingCoefficient):
            zero_start.reciprocal()
        with self.assertRaises(errors.ZeroLeadingCoefficient):
            zero_start.log()
        with self.assertRaises(errors.ZeroLeadingCoefficient):
            FormalSeries([1, 1]).compose(FormalSeries([1, 1]))
        with self.assertRaises(errors.OrderUnderflow):
            zero_start[3]
        with self.assertRaises(errors.OrderUnderflow):
            FormalSeries([1]).derivative()
        with self.assertRaises(errors.OrderUnderflow):
            FormalSeries([])

    def test_short_evaluate_and_borel(self):
        series = FormalSeries([1, 1, 2, 6])
        self.assertLess(abs(series.evaluate(0.1) - (1 + 0.1 + 0.02 + 0.006)), 1e-30)
        self.assertSeriesClose(FormalSeries(series.borel_coefficients()), [1, 1, 1, 1])
        half = FormalSeries([2], mu=Fraction(1, 2))
        self.assertLess(abs(half.evaluate(4) - 4), 1e-30)

    def test_short_from_sympy(self):
        import sympy
        h = sympy.Symbol('h')
        series = FormalSeries.from_sympy(h / (1 - sympy.exp(-h)), h, 6)
        expected = [1, mpmath.mpf(1) / 2, mpmath.mpf(1) / 12, 0, -mpmath.mpf(1) / 720, 0,
                    mpmath.mpf(1) / 30240]
        self.assertSeriesClose(series, expected, tol=1e-25)

    def test_short_unknown_operation(self):
        with self.assertRaises(ValueError):
            series_arith('sin', FormalSeries([1]))
