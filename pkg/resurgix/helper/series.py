"""Truncated power series in hbar with a rational prefactor exponent.

A FormalSeries represents hbar^mu * (c_0 + c_1 hbar + ... + c_K hbar^K) with complex
coefficients at the current mpmath working precision. Coefficients beyond K are unknown,
never zero: reading them raises OrderUnderflow.
"""
from fractions import Fraction
import logging

import mpmath
import sympy

from resurgix.helper import errors, utils


def _sympy_to_mpf(value):
    return mpmath.mpf(str(sympy.N(value, mpmath.mp.dps + 5)))


class FormalSeries:
    __slots__ = ('coeffs', 'mu')

    def __init__(self, coeffs, mu=0):
        coeffs = tuple(mpmath.mpc(c) for c in coeffs)
        if not coeffs:
            raise errors.OrderUnderflow("A series needs at least the coefficient c_0", K=-1)
        self.coeffs = coeffs
        self.mu = Fraction(mu)

    @classmethod
    def constant(cls, value, K, mu=0):
        return cls([value] + [0] * K, mu)

    @classmethod
    def hbar(cls, K):
        """The series hbar itself (zero constant term), to order K."""
        assert K >= 1, f"The variable series needs K >= 1, got {K}"
        return cls([0, 1] + [0] * (K - 1))

    @classmethod
    def from_sympy(cls, expr, symbol, K, mu=0):
        """Taylor coefficients of an exact sympy expression in `symbol` up to order K."""
        poly = sympy.series(expr, symbol, 0, K + 1).removeO()
        coeffs = []
        for k in range(K + 1):
            real, imag = sympy.expand(poly.coeff(symbol, k)).as_real_imag()
            coeffs.append(mpmath.mpc(_sympy_to_mpf(real), _sympy_to_mpf(imag)))
        return cls(coeffs, mu)

    @property
    def K(self):
        return len(self.coeffs) - 1

    def __getitem__(self, k):
        if k < 0:
            raise IndexError(f"Negative coefficient index {k}")
        if k > self.K:
            raise errors.OrderUnderflow(f"Coefficient {k} is beyond the truncation order {self.K}",
                                        K=self.K, requested=k)
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self):
        head = ', '.join(mpmath.nstr(c, 8) for c in self.coeffs[:4])
        tail = ', ...' if self.K > 3 else ''
        return f"FormalSeries(mu={self.mu}, K={self.K}, [{head}{tail}])"

    def truncate(self, K):
        if K < 0:
            raise errors.OrderUnderflow(f"Cannot truncate to negative order {K}", K=K)
        if K > self.K:
            raise errors.OrderUnderflow(f"Cannot extend order {self.K} to {K}", K=self.K, requested=K)
        return FormalSeries(self.coeffs[:K + 1], self.mu)

    def shift_mu(self, delta):
        return FormalSeries(self.coeffs, self.mu + Fraction(delta))

    def scale(self, factor):
        factor = mpmath.mpc(factor)
        return FormalSeries([factor * c for c in self.coeffs], self.mu)

    def _aligned(self, other):
        """Both coefficient lists with a common prefactor exponent, and that exponent."""
        delta = self.mu - other.mu
        assert delta.denominator == 1, \
            f"Cannot add series with prefactors hbar^{self.mu} and hbar^{other.mu}"
        delta = int(delta)
        if delta >= 0:
            left, right, mu = [0] * delta + list(self.coeffs), list(other.coeffs), other.mu
        else:
            left, right, mu = list(self.coeffs), [0] * (-delta) + list(other.coeffs), self.mu
        return left, right, mu

    def __add__(self, other):
        if not isinstance(other, FormalSeries):
            if self.mu != 0:
                return NotImplemented
            coeffs = list(self.coeffs)
            coeffs[0] += other
            return FormalSeries(coeffs)
        left, right, mu = self._aligned(other)
        K = min(len(left), len(right)) - 1
        return FormalSeries([left[k] + right[k] for k in range(K + 1)], mu)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, FormalSeries):
            return self.scale(other)
        K = min(self.K, other.K)
        a, b = self.coeffs, other.coeffs
        coeffs = [mpmath.fsum(a[i] * b[n - i] for i in range(n + 1)) for n in range(K + 1)]
        return FormalSeries(coeffs, self.mu + other.mu)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, FormalSeries):
            return self.scale(1 / mpmath.mpc(other))
        return self * other.reciprocal()

    def __pow__(self, exponent):
        if isinstance(exponent, int) and exponent >= 0:
            result = FormalSeries.constant(1, self.K)
            base = self
            while exponent:
                if exponent & 1:
                    result = result * base
                base = base * base
                exponent >>= 1
            return result
        return self.power(exponent)

    def _require_unit(self, operation):
        if self.coeffs[0] == 0:
            raise errors.ZeroLeadingCoefficient(f"{operation} needs a nonzero constant term",
                                                operation=operation)

    def reciprocal(self):
        self._require_unit('reciprocal')
        a = self.coeffs
        inv = 1 / a[0]
        b = [inv]
        for n in range(1, self.K + 1):
            b.append(-inv * mpmath.fsum(a[k] * b[n - k] for k in range(1, n + 1)))
        return FormalSeries(b, -self.mu)

    def power(self, alpha):
        """Raises a series with nonzero constant term to an arbitrary complex power."""
        self._require_unit('power')
        if isinstance(alpha, (int, Fraction)):
            mu = self.mu * Fraction(alpha)
            alpha = mpmath.mpf(Fraction(alpha).numerator) / Fraction(alpha).denominator
        else:
            assert self.mu == 0, "Only rational powers are defined for series with a prefactor"
            mu = 0
            alpha = mpmath.mpc(alpha)
        a = self.coeffs
        b = [mpmath.power(a[0], alpha)]
        for n in range(1, self.K + 1):
            total = mpmath.fsum(((alpha + 1) * k - n) * a[k] * b[n - k] for k in range(1, n + 1))
            b.append(total / (n * a[0]))
        return FormalSeries(b, mu)

    def sqrt(self):
        self._require_unit('sqrt')
        a = self.coeffs
        b = [mpmath.sqrt(a[0])]
        for n in range(1, self.K + 1):
            b.append((a[n] - mpmath.fsum(b[k] * b[n - k] for k in range(1, n))) / (2 * b[0]))
        return FormalSeries(b, self.mu / 2)

    def exp(self):
        assert self.mu == 0, "exp is only defined for series without prefactor"
        a = self.coeffs
        b = [mpmath.exp(a[0])]
        for n in range(1, self.K + 1):
            b.append(mpmath.fsum(k * a[k] * b[n - k] for k in range(1, n + 1)) / n)
        return FormalSeries(b)

    def log(self):
        assert self.mu == 0, "log is only defined for series without prefactor"
        self._require_unit('log')
        a = self.coeffs
        b = [mpmath.log(a[0])]
        for n in range(1, self.K + 1):
            total = n * a[n] - mpmath.fsum(k * b[k] * a[n - k] for k in range(1, n))
            b.append(total / (n * a[0]))
        return FormalSeries(b)

    def derivative(self):
        assert self.mu == 0, "derivative is only defined for series without prefactor"
        if self.K == 0:
            raise errors.OrderUnderflow("Derivative of an order-0 series has no known terms", K=-1)
        return FormalSeries([k * self.coeffs[k] for k in range(1, self.K + 1)])

    def integral(self):
        assert self.mu == 0, "integral is only defined for series without prefactor"
        return FormalSeries([0] + [c / (k + 1) for k, c in enumerate(self.coeffs)])

    def compose(self, inner):
        """self(inner(hbar)) for an inner series with zero constant term."""
        assert self.mu == 0 and inner.mu == 0, "compose needs series without prefactor"
        if inner.coeffs[0] != 0:
            raise errors.ZeroLeadingCoefficient(
                "compose needs an inner series with zero constant term", operation='compose')
        K = min(self.K, inner.K)
        inner = inner.truncate(K)
        result = FormalSeries.constant(self.coeffs[K], K)
        for k in range(K - 1, -1, -1):
            result = result * inner + self.coeffs[k]
        return result

    def reversion(self):
        """Compositional inverse by Lagrange inversion: b_n = [x^(n-1)] (x/f)^n / n."""
        assert self.mu == 0, "reversion needs a series without prefactor"
        if self.coeffs[0] != 0:
            raise errors.ZeroLeadingCoefficient(
                "reversion needs a series with zero constant term", operation='reversion')
        if self.K < 1 or self.coeffs[1] == 0:
            raise errors.ZeroLeadingCoefficient(
                "reversion needs a nonzero linear coefficient", operation='reversion')
        K = self.K
        quotient = FormalSeries(self.coeffs[1:]).reciprocal()
        power = quotient
        b = [mpmath.mpc(0)]
        for n in range(1, K + 1):
            b.append(power.coeffs[n - 1] / n)
            if n < K:
                power = power * quotient
        return FormalSeries(b)

    def evaluate(self, t):
        """The truncated sum t^mu * sum_k c_k t^k."""
        t = mpmath.mpc(t)
        total = mpmath.polyval(list(reversed(self.coeffs)), t)
        if self.mu:
            total *= mpmath.power(t, mpmath.mpf(self.mu.numerator) / self.mu.denominator)
        return total

    def distance(self, other):
        """Largest coefficient difference over the common order."""
        left, right, _ = self._aligned(other)
        K = min(len(left), len(right))
        return max(abs(left[k] - right[k]) for k in range(K))

    def borel_coefficients(self):
        """c_k / k!, the Taylor coefficients of the Borel transform."""
        return [c / mpmath.factorial(k) for k, c in enumerate(self.coeffs)]

    def to_json(self):
        return {'mu': str(self.mu), 'K': self.K, 'coeffs': list(self.coeffs)}

    @classmethod
    def from_json(cls, data):
        """Inverse of to_json after encoding; coefficients may also be plain numbers or strings."""
        coeffs = [utils.complex_from_dict(c) if isinstance(c, dict) else mpmath.mpmathify(c)
                  for c in data['coeffs']]
        return cls(coeffs, Fraction(data.get('mu', 0)))


_UNARY = {
    'reciprocal': FormalSeries.reciprocal,
    'exp': FormalSeries.exp,
    'log': FormalSeries.log,
    'sqrt': FormalSeries.sqrt,
    'reversion': FormalSeries.reversion,
}


def series_arith(op, *args):
    """Applies one of add, mul, compose, reciprocal, exp, log, sqrt, reversion."""
    logging.debug(f"series_arith {op} on {len(args)} argument(s)")
    if op in _UNARY:
        assert len(args) == 1, f"{op} takes one series, got {len(args)}"
        return _UNARY[op](args[0])
    if op == 'add':
        assert args, "add needs at least one series"
        result = args[0]
        for arg in args[1:]:
            result = result + arg
        return result
    if op == 'mul':
        assert args, "mul needs at least one series"
        result = args[0]
        for arg in args[1:]:
            result = result * arg
        return result
    if op == 'compose':
        assert len(args) == 2, f"compose takes outer and inner series, got {len(args)}"
        return args[0].compose(args[1])
    raise ValueError(f"Unknown series operation {op!r}")
