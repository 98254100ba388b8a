"""Multivariate Laurent rational functions with integer coefficients.

Values are held as sympy expressions. The canonical form is

    x^shift * P / Q

with P, Q coprime integer polynomials free of monomial factors, combined content 1, and a
positive coefficient on the lexicographically least monomial of Q. Two LaurentRationals are
equal exactly when their canonical forms are identical.
"""
import string

import mpmath
import sympy
from sympy.parsing.sympy_parser import (convert_xor, implicit_multiplication_application,
                                        parse_expr, standard_transformations)

from resurgix.helper import errors

_TRANSFORMATIONS = standard_transformations + (implicit_multiplication_application, convert_xor)
# Single letters only, so that E, I, N, S, Q ... are symbols rather than sympy constants
_LETTERS = {letter: sympy.Symbol(letter) for letter in string.ascii_letters}


def _monomial(gens, exponents):
    return sympy.Mul(*[g ** e for g, e in zip(gens, exponents)])


def _strip_monomial(terms, nvars):
    low = tuple(min(m[i] for m, _ in terms) for i in range(nvars))
    return low, [(tuple(e - l for e, l in zip(m, low)), c) for m, c in terms]


def _canonical_key(expr):
    """(gens, shift, numerator terms, denominator terms) of the canonical form of expr."""
    expr = sympy.cancel(sympy.together(expr))
    num, den = sympy.fraction(expr)
    if den == 0:
        raise errors.ZeroDenominator("Denominator of a Laurent rational is zero")
    gens = tuple(sorted(expr.free_symbols, key=lambda s: s.name))
    if num == 0:
        return (), (), (), (((), 1),)
    if not gens:
        value = sympy.Rational(expr)
        return (), (), (((), int(value.p)),), (((), int(value.q)),)

    p_poly = sympy.Poly(num, *gens, domain='QQ')
    q_poly = sympy.Poly(den, *gens, domain='QQ')
    p_scale, p_poly = p_poly.clear_denoms(convert=True)
    q_scale, q_poly = q_poly.clear_denoms(convert=True)
    p_content, p_poly = p_poly.primitive()
    q_content, q_poly = q_poly.primitive()
    ratio = sympy.Rational(p_content * q_scale, p_scale * q_content)

    p_terms = [(m, int(c) * int(ratio.p)) for m, c in p_poly.terms()]
    q_terms = [(m, int(c) * int(ratio.q)) for m, c in q_poly.terms()]
    p_low, p_terms = _strip_monomial(p_terms, len(gens))
    q_low, q_terms = _strip_monomial(q_terms, len(gens))
    shift = tuple(a - b for a, b in zip(p_low, q_low))

    if min(q_terms)[1] < 0:
        p_terms = [(m, -c) for m, c in p_terms]
        q_terms = [(m, -c) for m, c in q_terms]
    return (tuple(g.name for g in gens), shift, tuple(sorted(p_terms)), tuple(sorted(q_terms)))


class LaurentRational:
    """A rational function in named variables, e.g. LaurentRational('a*s/(1-a**3*f)')."""

    def __init__(self, numerator, denominator=1, canonical=False):
        numerator = sympy.sympify(numerator, locals=_LETTERS)
        denominator = sympy.sympify(denominator, locals=_LETTERS)
        if sympy.expand(denominator) == 0:
            raise errors.ZeroDenominator("Denominator of a Laurent rational is zero",
                                         numerator=str(numerator))
        self.expr = numerator / denominator
        self.canonical = canonical
        self._key = None

    @classmethod
    def from_string(cls, text):
        """Parses textbook notation such as 'a b f s^-1 / (1 - a^3 f)'."""
        try:
            expr = parse_expr(text, local_dict=dict(_LETTERS), transformations=_TRANSFORMATIONS)
        except (SyntaxError, TypeError, sympy.SympifyError) as err:
            raise errors.ExpressionSyntaxError(f"Cannot parse Laurent rational {text!r}: {err}", 0)
        return cls(expr)

    @classmethod
    def from_key(cls, key):
        gens, shift, num_terms, den_terms = key
        symbols = [sympy.Symbol(name) for name in gens]
        num = sympy.Add(*[c * _monomial(symbols, m) for m, c in num_terms])
        den = sympy.Add(*[c * _monomial(symbols, m) for m, c in den_terms])
        result = cls(_monomial(symbols, shift) * num, den, canonical=True)
        result._key = key
        return result

    @property
    def key(self):
        if self._key is None:
            self._key = _canonical_key(self.expr)
        return self._key

    def normalize(self):
        if self.canonical:
            return self
        return LaurentRational.from_key(self.key)

    @property
    def variables(self):
        return self.key[0]

    @property
    def numerator(self):
        """Laurent polynomial x^shift * P of the canonical form."""
        gens, shift, num_terms, _ = self.key
        symbols = [sympy.Symbol(name) for name in gens]
        return _monomial(symbols, shift) * sympy.Add(*[c * _monomial(symbols, m) for m, c in num_terms])

    @property
    def denominator(self):
        gens, _, _, den_terms = self.key
        symbols = [sympy.Symbol(name) for name in gens]
        return sympy.Add(*[c * _monomial(symbols, m) for m, c in den_terms])

    def as_expr(self):
        return self.numerator / self.denominator

    def is_zero(self):
        return not self.key[2]

    def _coerce(self, other):
        if isinstance(other, LaurentRational):
            return other.expr
        return sympy.sympify(other, locals=_LETTERS)

    def __add__(self, other):
        return LaurentRational(self.expr + self._coerce(other)).normalize()

    __radd__ = __add__

    def __sub__(self, other):
        return LaurentRational(self.expr - self._coerce(other)).normalize()

    def __rsub__(self, other):
        return LaurentRational(self._coerce(other) - self.expr).normalize()

    def __mul__(self, other):
        return LaurentRational(self.expr * self._coerce(other)).normalize()

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if sympy.cancel(other) == 0:
            raise errors.ZeroDenominator("Division by a zero Laurent rational")
        return LaurentRational(self.expr / other).normalize()

    def __rtruediv__(self, other):
        if self.is_zero():
            raise errors.ZeroDenominator("Division by a zero Laurent rational")
        return LaurentRational(self._coerce(other) / self.expr).normalize()

    def __neg__(self):
        return LaurentRational(-self.expr).normalize()

    def __pow__(self, exponent):
        assert isinstance(exponent, int), f"Only integer powers, got {exponent!r}"
        if exponent < 0 and self.is_zero():
            raise errors.ZeroDenominator("Negative power of a zero Laurent rational")
        return LaurentRational(self.expr ** exponent).normalize()

    def __eq__(self, other):
        if not isinstance(other, LaurentRational):
            other = LaurentRational(other)
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return str(self.as_expr())

    def __repr__(self):
        return f"LaurentRational({self})"

    def subs(self, **values):
        """Exact substitution of some variables, e.g. r.subs(f=1, g=1, s=1)."""
        replacements = {sympy.Symbol(name): sympy.sympify(value) for name, value in values.items()}
        return LaurentRational(self.as_expr().subs(replacements)).normalize()

    def evaluate(self, values):
        """Numeric value at a mapping from variable name to number, at working precision."""
        missing = [name for name in self.variables if name not in values]
        assert not missing, f"No values given for variables {missing}"
        gens, shift, num_terms, den_terms = self.key
        point = [mpmath.mpc(values[name]) for name in gens]

        def _eval(terms):
            total = mpmath.mpc(0)
            for monom, coeff in terms:
                term = mpmath.mpc(coeff)
                for x, e in zip(point, monom):
                    term *= x ** e
                total += term
            return total

        den = _eval(den_terms)
        if den == 0:
            raise errors.ZeroDenominator("Denominator vanishes at the specialization",
                                         point={name: values[name] for name in gens})
        num = _eval(num_terms)
        for x, e in zip(point, shift):
            num *= x ** e
        return num / den

    def to_json(self):
        return str(self)


def laurent_normalize(r):
    """Canonical form of a LaurentRational (see the module docstring)."""
    if not isinstance(r, LaurentRational):
        r = LaurentRational(r)
    return r.normalize()
