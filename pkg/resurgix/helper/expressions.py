"""Holomorphic expression trees over n complex variables.

Expressions are parsed from text such as

    z^3/3 - u*z + w^2
    -li2[0,0](x) + log[1](x)^2 + 2.5i*pi

(log[k](u) = Log u + 2 pi i k and li2[m,n](u) = Li2 u + m 2 pi i Log u + n (2 pi i)^2 carry
their branch offsets explicitly) and differentiated with forward-mode multivariate jets.
"""
import dataclasses
import functools
import itertools
import logging
import re

import mpmath
import sympy

from resurgix.helper import errors
from resurgix.helper.precision import DEFAULT_TOLERANCES

RESERVED = ('exp', 'log', 'li2', 'pi', 'i')


def _two_pi_i():
    return 2j * mpmath.pi


class Jet:
    """Truncated multivariate Taylor polynomial: multi-index -> coefficient, total degree <= order."""
    __slots__ = ('nvars', 'order', 'coeffs')

    def __init__(self, nvars, order, coeffs):
        self.nvars = nvars
        self.order = order
        self.coeffs = coeffs

    @classmethod
    def constant(cls, value, nvars, order):
        return cls(nvars, order, {(0,) * nvars: mpmath.mpc(value)})

    @classmethod
    def variable(cls, index, value, nvars, order):
        coeffs = {(0,) * nvars: mpmath.mpc(value)}
        if order >= 1:
            unit = [0] * nvars
            unit[index] = 1
            coeffs[tuple(unit)] = mpmath.mpc(1)
        return cls(nvars, order, coeffs)

    @property
    def value(self):
        return self.coeffs.get((0,) * self.nvars, mpmath.mpc(0))

    def __getitem__(self, multi_index):
        return self.coeffs.get(tuple(multi_index), mpmath.mpc(0))

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = Jet.constant(other, self.nvars, self.order)
        coeffs = dict(self.coeffs)
        for key, value in other.coeffs.items():
            coeffs[key] = coeffs.get(key, 0) + value
        return Jet(self.nvars, self.order, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.nvars, self.order, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = mpmath.mpc(other)
            return Jet(self.nvars, self.order, {k: v * other for k, v in self.coeffs.items()})
        coeffs = {}
        for (k1, v1), (k2, v2) in itertools.product(self.coeffs.items(), other.coeffs.items()):
            if sum(k1) + sum(k2) > self.order:
                continue
            key = tuple(a + b for a, b in zip(k1, k2))
            coeffs[key] = coeffs.get(key, 0) + v1 * v2
        return Jet(self.nvars, self.order, coeffs)

    __rmul__ = __mul__

    def compose(self, taylor_coeffs):
        """F(self) given the Taylor coefficients of F at self.value."""
        h = self - self.value
        degree = min(self.order, len(taylor_coeffs) - 1)
        result = Jet.constant(taylor_coeffs[degree], self.nvars, self.order)
        for k in range(degree - 1, -1, -1):
            result = result * h + taylor_coeffs[k]
        return result

    def derivative(self, multi_index):
        """Partial derivative d^alpha at the base point."""
        scale = 1
        for a in multi_index:
            scale *= mpmath.factorial(a)
        return self[multi_index] * scale

    def univariate(self):
        """Coefficient list of a one-variable jet."""
        assert self.nvars == 1, f"Jet has {self.nvars} variables"
        return [self[(k,)] for k in range(self.order + 1)]


class _Context:
    def __init__(self, point, order, eps_branch):
        self.nvars = len(point)
        self.order = order
        self.eps_branch = eps_branch
        self.point = point
        self.memo = {}


class Node:
    """Base class of expression nodes; subclasses are frozen dataclasses."""

    def jet(self, ctx):
        if self not in ctx.memo:
            ctx.memo[self] = self._jet(ctx)
        return ctx.memo[self]

    def variables(self):
        return frozenset().union(*[child.variables() for child in self.children()])

    def children(self):
        return ()


@dataclasses.dataclass(frozen=True)
class Var(Node):
    index: int
    name: str

    def _jet(self, ctx):
        return Jet.variable(self.index, ctx.point[self.index], ctx.nvars, ctx.order)

    def variables(self):
        return frozenset([self.index])

    def to_sympy(self, symbols):
        return symbols[self.index]

    def __str__(self):
        return self.name


@dataclasses.dataclass(frozen=True)
class Const(Node):
    """A complex constant kept as decimal strings, evaluated at the working precision."""
    re: str
    im: str = '0'

    @property
    def value(self):
        return mpmath.mpc(mpmath.mpf(self.re), mpmath.mpf(self.im))

    def _jet(self, ctx):
        return Jet.constant(self.value, ctx.nvars, ctx.order)

    def to_sympy(self, symbols):
        return sympy.Rational(self.re) + sympy.I * sympy.Rational(self.im)

    def __str__(self):
        if self.im == '0':
            return f"({self.re})"
        return f"({self.re}+{self.im}i)"


@dataclasses.dataclass(frozen=True)
class Pi(Node):
    def _jet(self, ctx):
        return Jet.constant(mpmath.pi, ctx.nvars, ctx.order)

    def to_sympy(self, symbols):
        return sympy.pi

    def __str__(self):
        return 'pi'


@dataclasses.dataclass(frozen=True)
class Add(Node):
    terms: tuple

    def _jet(self, ctx):
        result = self.terms[0].jet(ctx)
        for term in self.terms[1:]:
            result = result + term.jet(ctx)
        return result

    def children(self):
        return self.terms

    def to_sympy(self, symbols):
        return sympy.Add(*[t.to_sympy(symbols) for t in self.terms])

    def __str__(self):
        return '(' + ' + '.join(str(t) for t in self.terms) + ')'


@dataclasses.dataclass(frozen=True)
class Mul(Node):
    factors: tuple

    def _jet(self, ctx):
        result = self.factors[0].jet(ctx)
        for factor in self.factors[1:]:
            result = result * factor.jet(ctx)
        return result

    def children(self):
        return self.factors

    def to_sympy(self, symbols):
        return sympy.Mul(*[f.to_sympy(symbols) for f in self.factors])

    def __str__(self):
        return '(' + '*'.join(str(f) for f in self.factors) + ')'


@dataclasses.dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int

    def _jet(self, ctx):
        inner = self.base.jet(ctx)
        u0 = inner.value
        if self.exponent >= 0:
            coeffs = [mpmath.binomial(self.exponent, j) * u0 ** (self.exponent - j)
                      if j <= self.exponent else 0 for j in range(ctx.order + 1)]
        else:
            if abs(u0) < ctx.eps_branch:
                raise errors.BranchPointProximity(
                    f"Negative power {self.exponent} evaluated at a pole", node=str(self),
                    distance=float(abs(u0)))
            coeffs = [mpmath.binomial(self.exponent, j) * u0 ** (self.exponent - j)
                      for j in range(ctx.order + 1)]
        return inner.compose(coeffs)

    def children(self):
        return (self.base,)

    def to_sympy(self, symbols):
        return self.base.to_sympy(symbols) ** self.exponent

    def __str__(self):
        return f"{self.base}^({self.exponent})"


@dataclasses.dataclass(frozen=True)
class Exp(Node):
    arg: Node

    def _jet(self, ctx):
        inner = self.arg.jet(ctx)
        e0 = mpmath.exp(inner.value)
        return inner.compose([e0 / mpmath.factorial(j) for j in range(ctx.order + 1)])

    def children(self):
        return (self.arg,)

    def to_sympy(self, symbols):
        return sympy.exp(self.arg.to_sympy(symbols))

    def __str__(self):
        return f"exp({self.arg})"


@dataclasses.dataclass(frozen=True)
class Log(Node):
    """Principal logarithm plus 2 pi i * branch."""
    arg: Node
    branch: int = 0

    def _jet(self, ctx):
        inner = self.arg.jet(ctx)
        u0 = inner.value
        if abs(u0) < ctx.eps_branch:
            raise errors.BranchPointProximity("log evaluated at its branch point 0",
                                              node=str(self), distance=float(abs(u0)))
        coeffs = [mpmath.log(u0) + self.branch * _two_pi_i()]
        coeffs += [(-1) ** (j + 1) / (j * u0 ** j) for j in range(1, ctx.order + 1)]
        return inner.compose(coeffs)

    def children(self):
        return (self.arg,)

    def to_sympy(self, symbols):
        return sympy.log(self.arg.to_sympy(symbols)) + 2 * sympy.pi * sympy.I * self.branch

    def __str__(self):
        return f"log[{self.branch}]({self.arg})"


def li2_taylor(u0, order, eps_branch=DEFAULT_TOLERANCES.eps_branch):
    """Taylor coefficients of the principal dilogarithm at u0, up to the given order.

    Higher coefficients integrate the expansion of Li2'(u) = -log(1-u)/u.
    """
    if order == 0:
        if abs(u0 - 1) < eps_branch:
            return [mpmath.zeta(2)]
        return [mpmath.polylog(2, u0)]
    if abs(u0 - 1) < eps_branch:
        raise errors.BranchPointProximity("Derivatives of li2 at its branch point 1",
                                          distance=float(abs(u0 - 1)))
    if u0 == 0:
        return [mpmath.mpc(0)] + [mpmath.mpf(1) / k ** 2 for k in range(1, order + 1)]
    w = 1 - u0
    minus_log = [-mpmath.log(w)] + [1 / (j * w ** j) for j in range(1, order)]
    reciprocal = [(-1) ** j / u0 ** (j + 1) for j in range(order)]
    derivative = [mpmath.fsum(minus_log[i] * reciprocal[k - i] for i in range(k + 1))
                  for k in range(order)]
    return [mpmath.polylog(2, u0)] + [derivative[k - 1] / k for k in range(1, order + 1)]


@dataclasses.dataclass(frozen=True)
class Li2(Node):
    """Principal dilogarithm plus m 2 pi i Log + n (2 pi i)^2."""
    arg: Node
    m: int = 0
    n: int = 0

    def _jet(self, ctx):
        inner = self.arg.jet(ctx)
        u0 = inner.value
        coeffs = li2_taylor(u0, ctx.order, ctx.eps_branch)
        coeffs[0] += self.n * _two_pi_i() ** 2
        if self.m:
            if abs(u0) < ctx.eps_branch:
                raise errors.BranchPointProximity("li2 branch offset evaluated at 0",
                                                  node=str(self), distance=float(abs(u0)))
            coeffs[0] += self.m * _two_pi_i() * mpmath.log(u0)
            for j in range(1, ctx.order + 1):
                coeffs[j] += self.m * _two_pi_i() * (-1) ** (j + 1) / (j * u0 ** j)
        return inner.compose(coeffs)

    def children(self):
        return (self.arg,)

    def to_sympy(self, symbols):
        u = self.arg.to_sympy(symbols)
        two_pi_i = 2 * sympy.pi * sympy.I
        return sympy.polylog(2, u) + self.m * two_pi_i * sympy.log(u) + self.n * two_pi_i ** 2

    def __str__(self):
        return f"li2[{self.m},{self.n}]({self.arg})"


@dataclasses.dataclass(frozen=True)
class HoloExpr:
    """An expression together with its ordered variable names."""
    root: Node
    variables: tuple
    text: str = ''

    @property
    def n(self):
        return len(self.variables)

    def __str__(self):
        return self.text or str(self.root)

    def __call__(self, *x):
        return expr_eval(self, x)

    def to_sympy(self):
        symbols = [sympy.Symbol(name) for name in self.variables]
        return self.root.to_sympy(symbols)

    def to_json(self):
        return {'expr': str(self), 'vars': list(self.variables)}

    def additive_components(self):
        """Splits a top-level sum into summands grouped by disjoint sets of variables.

        Returns a list of (variable indices, HoloExpr) in order of first variable; summands
        without variables are attached to the first group.
        """
        terms = self.root.terms if isinstance(self.root, Add) else (self.root,)
        groups = []
        constants = []
        for term in terms:
            used = set(term.variables())
            if not used:
                constants.append(term)
                continue
            merged = [g for g in groups if g[0] & used]
            for group in merged:
                groups.remove(group)
                used |= group[0]
            groups.append((used, [t for g in merged for t in g[1]] + [term]))
        if not groups:
            return [(frozenset(), self)]
        groups.sort(key=lambda g: min(g[0]))
        groups[0] = (groups[0][0], constants + groups[0][1])
        return [(frozenset(used), HoloExpr(Add(tuple(members)) if len(members) > 1 else members[0],
                                           self.variables))
                for used, members in groups]


class _Parser:
    """Recursive-descent parser; errors report the byte offset of the offending token."""
    TOKEN = re.compile(r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9_]))?"
                       r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^()\[\],]))")

    def __init__(self, text, variables):
        self.text = text
        self.variables = list(variables) if variables is not None else None
        self.tokens = self._tokenize()
        self.pos = 0

    def _offset(self, char_index):
        return len(self.text[:char_index].encode('utf-8'))

    def _tokenize(self):
        tokens = []
        index = 0
        while index < len(self.text):
            if self.text[index:].strip() == '':
                break
            match = self.TOKEN.match(self.text, index)
            if not match:
                bad = index + len(self.text[index:]) - len(self.text[index:].lstrip())
                raise errors.ExpressionSyntaxError(f"Unexpected character {self.text[bad]!r}",
                                                   self._offset(bad))
            if match.group('number') is not None:
                kind, value = 'number', (match.group('number'), bool(match.group('imag')))
                start = match.start('number')
            elif match.group('name') is not None:
                kind, value = 'name', match.group('name')
                start = match.start('name')
            else:
                kind, value = 'op', match.group('op')
                start = match.start('op')
            tokens.append((kind, value, self._offset(start)))
            index = match.end()
        tokens.append(('end', None, self._offset(len(self.text))))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, op):
        kind, value, offset = self.take()
        if kind != 'op' or value != op:
            found = value if value is not None else 'end of input'
            raise errors.ExpressionSyntaxError(f"Expected {op!r} but found {found!r}", offset)

    def at_op(self, *ops):
        kind, value, _ = self.peek()
        return kind == 'op' and value in ops

    def parse(self):
        node = self.expression()
        kind, value, offset = self.peek()
        if kind != 'end':
            raise errors.ExpressionSyntaxError(f"Unexpected {value!r}", offset)
        return node

    def expression(self):
        terms = [self.term()]
        while self.at_op('+', '-'):
            _, op, _ = self.take()
            term = self.term()
            terms.append(term if op == '+' else Mul((Const('-1'), term)))
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self):
        factors = [self.unary()]
        while self.at_op('*', '/'):
            _, op, _ = self.take()
            factor = self.unary()
            if op == '/':
                factor = Pow(factor, -1)
            factors.append(factor)
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def unary(self):
        if self.at_op('-'):
            self.take()
            return Mul((Const('-1'), self.unary()))
        if self.at_op('+'):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.at_op('^', '**'):
            self.take()
            return Pow(base, self.integer())
        return base

    def integer(self):
        sign = 1
        while self.at_op('-', '+'):
            _, op, _ = self.take()
            sign = -sign if op == '-' else sign
        if self.at_op('('):
            self.take()
            value = sign * self.integer()
            self.expect(')')
            return value
        kind, value, offset = self.take()
        if kind != 'number' or value[1] or not value[0].isdigit():
            raise errors.ExpressionSyntaxError("Exponents must be integers", offset)
        return sign * int(value[0])

    def branch_indices(self, count):
        if not self.at_op('['):
            return (0,) * count
        self.take()
        indices = [self.integer()]
        while self.at_op(','):
            self.take()
            indices.append(self.integer())
        _, _, offset = self.peek()
        self.expect(']')
        if len(indices) != count:
            raise errors.ExpressionSyntaxError(f"Expected {count} branch indices, got {len(indices)}",
                                               offset)
        return tuple(indices)

    def call_argument(self):
        self.expect('(')
        arg = self.expression()
        self.expect(')')
        return arg

    def atom(self):
        kind, value, offset = self.take()
        if kind == 'number':
            text, imaginary = value
            return Const('0', text) if imaginary else Const(text)
        if kind == 'op' and value == '(':
            node = self.expression()
            self.expect(')')
            return node
        if kind == 'name':
            if value == 'pi':
                return Pi()
            if value == 'i':
                return Const('0', '1')
            if value == 'exp':
                return Exp(self.call_argument())
            if value == 'log':
                (branch,) = self.branch_indices(1)
                return Log(self.call_argument(), branch)
            if value == 'li2':
                m, n = self.branch_indices(2)
                return Li2(self.call_argument(), m, n)
            return self.variable(value, offset)
        found = value if value is not None else 'end of input'
        raise errors.ExpressionSyntaxError(f"Unexpected {found!r}", offset)

    def variable(self, name, offset):
        if self.variables is None:
            raise errors.ExpressionSyntaxError(f"Unknown variable {name!r}", offset)
        if name not in self.variables:
            raise errors.ExpressionSyntaxError(
                f"Unknown variable {name!r}, expected one of {self.variables}", offset)
        return Var(self.variables.index(name), name)


def find_identifiers(text):
    """Identifiers in an expression text, in order of appearance, excluding function names."""
    seen = []
    for match in re.finditer(r"(?<![0-9.])[A-Za-z_][A-Za-z0-9_]*", text):
        name = match.group(0)
        if name not in RESERVED and name not in seen:
            seen.append(name)
    return seen


def parse_expression(text, variables=None):
    """Parses text into a HoloExpr. Without explicit variables, identifiers are taken in
    alphabetical order."""
    if variables is None:
        variables = sorted(find_identifiers(text))
    variables = tuple(variables)
    for name in variables:
        assert name not in RESERVED, f"{name!r} is reserved and cannot be a variable"
    root = _Parser(text, variables).parse()
    return HoloExpr(root, variables, text)


def _check_order(order):
    if order > mpmath.mp.prec // 2:
        raise errors.PrecisionExhausted(
            f"Derivative order {order} needs more than {mpmath.mp.prec} bits of precision",
            order=order, precision=mpmath.mp.prec)


def taylor(e, x, order, eps_branch=DEFAULT_TOLERANCES.eps_branch):
    """The jet of e at x up to total degree `order`."""
    assert len(x) == e.n, f"Expression has {e.n} variables, point has {len(x)}"
    _check_order(order)
    ctx = _Context([mpmath.mpc(v) for v in x], order, eps_branch)
    return e.root.jet(ctx)


def expr_eval(e, x, deriv_multi_index=None, eps_branch=DEFAULT_TOLERANCES.eps_branch):
    """Value of the partial derivative d^alpha e at x (alpha defaults to no derivative)."""
    if deriv_multi_index is None:
        deriv_multi_index = (0,) * e.n
    deriv_multi_index = tuple(deriv_multi_index)
    assert len(deriv_multi_index) == e.n, \
        f"Multi-index {deriv_multi_index} does not match {e.n} variables"
    jet = taylor(e, x, sum(deriv_multi_index), eps_branch)
    return jet.derivative(deriv_multi_index)


def gradient_hessian(e, x, eps_branch=DEFAULT_TOLERANCES.eps_branch):
    """Value, gradient (list) and Hessian (mpmath matrix) of e at x from one order-2 jet."""
    jet = taylor(e, x, 2, eps_branch)
    n = e.n
    units = [tuple(1 if k == i else 0 for k in range(n)) for i in range(n)]
    gradient = [jet[unit] for unit in units]
    hessian = mpmath.matrix(n, n)
    for i, j in itertools.product(range(n), repeat=2):
        index = tuple(a + b for a, b in zip(units[i], units[j]))
        hessian[i, j] = jet.derivative(index)
    return jet.value, gradient, hessian


@functools.lru_cache(maxsize=64)
def _cached_parse(text, variables):
    return parse_expression(text, variables)


def as_expression(value, variables):
    """Accepts a HoloExpr or expression text."""
    if isinstance(value, HoloExpr):
        return value
    logging.debug(f"Parsing expression {value!r} in {variables}")
    return _cached_parse(value, tuple(variables))
