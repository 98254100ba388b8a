"""Exactly computable quantum wave function formulas.

Moyal products of polynomial observables, the formal pairing of q- and p-series, WKB
expansions of -(hbar d/dx)^2 + V with their quantum periods, and asymptotics of lattice sums
over the ray [0, +inf) (Euler-Maclaurin, interior saddles, the boundary point).

Observables and WKB data are exact sympy expressions; the symbol h stands for hbar.
"""
import dataclasses
from fractions import Fraction
import functools
import logging
import math

import mpmath
import numpy as np
import sympy

from resurgix.helper import errors, landscape
from resurgix.helper.expressions import as_expression, expr_eval, taylor
from resurgix.helper.precision import DEFAULT_TOLERANCES
from resurgix.helper.saddle import local_expansion_1d
from resurgix.helper.scenes import make_scene
from resurgix.helper.series import FormalSeries

HBAR = sympy.Symbol('h')
X = sympy.Symbol('x')
P = sympy.Symbol('p')
# Gauss-Legendre degree per polyline segment (3 * 2^(degree-1) nodes)
PERIOD_DEGREE = 4
TURNING_POINT_MARGIN = 1e-3
CONDITION_TOL = 1e-8
DECAY_GRID = (10, 20, 40, 80)
DECAY_RATIO = 0.9


def _mpc(value):
    value = sympy.N(value, mpmath.mp.dps + 5)
    real, imag = value.as_real_imag()
    return mpmath.mpc(mpmath.mpf(str(real)), mpmath.mpf(str(imag)))


def phase_space_symbols(n):
    if n == 1:
        return (sympy.Symbol('q'),), (sympy.Symbol('p'),)
    return (tuple(sympy.Symbol(f'q{i}') for i in range(1, n + 1)),
            tuple(sympy.Symbol(f'p{i}') for i in range(1, n + 1)))


def truncate_hbar(expr, K):
    """Drops every term of hbar-degree above K from a polynomial expression."""
    expr = sympy.expand(expr)
    return sympy.Add(*[term for term in sympy.Add.make_args(expr)
                       if sympy.degree(term, HBAR) <= K])


@dataclasses.dataclass(frozen=True)
class PolyObservable:
    """A polynomial in q_1..q_n, p_1..p_n whose coefficients are polynomials in hbar up to K."""
    expr: sympy.Expr
    n: int = 1
    K: int = 8

    def __post_init__(self):
        qs, ps = phase_space_symbols(self.n)
        allowed = set(qs) | set(ps) | {HBAR}
        extra = self.expr.free_symbols - allowed
        assert not extra, f"Observable uses unknown symbols {sorted(map(str, extra))}"
        assert self.expr.is_polynomial(*allowed), f"Observable {self.expr} is not a polynomial"
        object.__setattr__(self, 'expr', truncate_hbar(self.expr, self.K))

    @classmethod
    def from_string(cls, text, n=1, K=8):
        qs, ps = phase_space_symbols(n)
        names = {str(s): s for s in qs + ps + (HBAR,)}
        return cls(sympy.sympify(text.replace('^', '**'), locals=names), n, K)

    @property
    def symbols(self):
        return phase_space_symbols(self.n)

    def __eq__(self, other):
        return (isinstance(other, PolyObservable) and self.n == other.n
                and sympy.expand(self.expr - other.expr) == 0)

    def __hash__(self):
        return hash((self.n, sympy.srepr(sympy.expand(self.expr))))

    def __sub__(self, other):
        return PolyObservable(self.expr - other.expr, self.n, min(self.K, other.K))

    def __add__(self, other):
        return PolyObservable(self.expr + other.expr, self.n, min(self.K, other.K))

    def __str__(self):
        return str(self.expr)

    def to_json(self):
        return {'expr': str(self.expr), 'n': self.n, 'K': self.K}


def _poisson_power(f, g, qs, ps, m):
    """Pi^m(f, g) with Pi = sum_i (d_qi x d_pi - d_pi x d_qi), through doubled variables."""
    Qs = [sympy.Dummy(f'Q{i}') for i in range(len(qs))]
    Ps = [sympy.Dummy(f'P{i}') for i in range(len(ps))]
    term = f * g.subs(dict(zip(qs + ps, Qs + Ps)), simultaneous=True)
    for _ in range(m):
        term = sympy.Add(*[sympy.diff(term, q, Pp) - sympy.diff(term, p, Q)
                           for q, p, Q, Pp in zip(qs, ps, Qs, Ps)])
        if term == 0:
            return sympy.Integer(0)
    return sympy.expand(term.subs(dict(zip(Qs + Ps, qs + ps)), simultaneous=True))


def moyal(f, g, K=None):
    """f * g = sum_m (hbar/2)^m / m! Pi^m(f, g), truncated at hbar^K."""
    assert f.n == g.n, f"Observables live on different spaces ({f.n} and {g.n} pairs)"
    K = min(f.K, g.K) if K is None else K
    qs, ps = f.symbols
    total = sympy.Integer(0)
    for m in range(K + 1):
        term = _poisson_power(f.expr, g.expr, qs, ps, m)
        if term == 0:
            break
        total += (HBAR / 2) ** m / sympy.factorial(m) * term
    return PolyObservable(truncate_hbar(total, K), f.n, K)


def commutator(f, g, K=None):
    return moyal(f, g, K) - moyal(g, f, K)


def symplectic_form(n):
    identity = sympy.eye(n)
    return sympy.Matrix(sympy.BlockMatrix([[sympy.zeros(n), identity],
                                           [-identity, sympy.zeros(n)]]))


def transform(obs, matrix, shift=None):
    """obs o T for the affine map T(v) = M v + shift on v = (q_1..q_n, p_1..p_n)."""
    matrix = sympy.Matrix(matrix)
    J = symplectic_form(obs.n)
    assert matrix.shape == J.shape, f"Need a {J.shape} matrix, got {matrix.shape}"
    assert (matrix.T * J * matrix - J).is_zero_matrix, "Transformation is not symplectic"
    qs, ps = obs.symbols
    coords = sympy.Matrix(qs + ps)
    image = matrix * coords
    if shift is not None:
        image += sympy.Matrix(shift)
    return PolyObservable(obs.expr.subs(dict(zip(qs + ps, image)), simultaneous=True),
                          obs.n, obs.K)


def _hbar_poly(expr, variables):
    return sympy.Poly(sympy.expand(expr), *variables, HBAR)


def formal_pairing(left, right, K=None, factorial='total'):
    """<sum a_{I,k} q^I hbar^k, sum b_{J,k} p^J hbar^k> = sum_I a_{I,k1} b_{I,k2} |I|! hbar^(k1+k2).

    With factorial='total' the weight is (total degree of I)!; factorial='multi' uses
    prod_j I_j!, the weight of the Weyl algebra pairing of q^I against p^I.
    """
    assert factorial in ('total', 'multi'), f"Unknown factorial weight {factorial!r}"
    assert left.n == right.n, "Pairing needs observables on the same space"
    qs, ps = left.symbols
    assert not left.expr.free_symbols & set(ps), "The left argument may only contain q"
    assert not right.expr.free_symbols & set(qs), "The right argument may only contain p"
    a = _hbar_poly(left.expr, qs).as_dict()
    b = _hbar_poly(right.expr, ps).as_dict()
    if K is None:
        K = max([m[-1] for m in a] + [0]) + max([m[-1] for m in b] + [0])
    coeffs = [sympy.Integer(0)] * (K + 1)
    for left_key, left_coeff in a.items():
        index, k1 = left_key[:-1], left_key[-1]
        for right_key, right_coeff in b.items():
            if right_key[:-1] != index or k1 + right_key[-1] > K:
                continue
            if factorial == 'total':
                weight = sympy.factorial(sum(index))
            else:
                weight = sympy.Mul(*[sympy.factorial(i) for i in index])
            coeffs[k1 + right_key[-1]] += left_coeff * right_coeff * weight
    return FormalSeries([_mpc(c) for c in coeffs])


def _pair_mul(u, v, V):
    """(A1 + B1 r)(A2 + B2 r) with r^2 = V."""
    return (u[0] * v[0] + u[1] * v[1] * V, u[0] * v[1] + u[1] * v[0])


def _pair_add(u, v):
    return (u[0] + v[0], u[1] + v[1])


def _pair_diff(u, V, dV):
    """d/dx (A + B r) with r' = V' r / (2 V)."""
    return (sympy.diff(u[0], X), sympy.diff(u[1], X) + u[1] * dV / (2 * V))


def _pair_cancel(u):
    return (sympy.cancel(u[0]), sympy.cancel(u[1]))


def wkb_derivatives(V, K):
    """F_g' as pairs (A, B) meaning A + B sqrt(V), for g = 0..K."""
    dV = sympy.diff(V, X)
    dF = [(sympy.Integer(0), sympy.Integer(-1))]
    for g in range(1, K + 1):
        total = _pair_diff(dF[g - 1], V, dV)
        for i in range(1, g):
            total = _pair_add(total, _pair_mul(dF[i], dF[g - i], V))
        # F_g' = -total / (2 F_0') = total / (2 r)
        dF.append(_pair_cancel((total[1] / 2, total[0] / (2 * V))))
    return dF


def riccati_residuals(V, derivatives):
    """hbar^g coefficients of S'^2 + hbar S'' - V for S = sum hbar^g F_g; all vanish."""
    dV = sympy.diff(V, X)
    K = len(derivatives) - 1
    residuals = []
    for g in range(K + 1):
        total = (-V, sympy.Integer(0)) if g == 0 else _pair_diff(derivatives[g - 1], V, dV)
        for i in range(g + 1):
            total = _pair_add(total, _pair_mul(derivatives[i], derivatives[g - i], V))
        residuals.append(_pair_cancel(total))
    return residuals


def parse_potential(V):
    if isinstance(V, sympy.Expr):
        return V
    return as_expression(V, ('x',)).to_sympy().subs(sympy.Symbol('x'), X)


def _turning_points(V):
    coeffs = [complex(_mpc(c)) for c in sympy.Poly(V, X).all_coeffs()]
    if len(coeffs) < 2:
        return []
    return [mpmath.mpc(root) for root in np.roots(coeffs)]


def _segment_distance(point, a, b):
    direction = b - a
    if direction == 0:
        return abs(point - a)
    s = ((point - a) * mpmath.conj(direction)).real / abs(direction) ** 2
    s = min(max(s, 0), 1)
    return abs(point - (a + s * direction))


def _ray_distance(point, a):
    """Distance from point to the ray a + [0, inf)."""
    if (point - a).real <= 0:
        return abs(point - a)
    return abs((point - a).imag)


def _lambdify(expr):
    return sympy.lambdify(X, expr, 'mpmath')


@dataclasses.dataclass(frozen=True, eq=False)
class WkbSolution:
    potential: sympy.Expr
    K: int
    anchor: object
    derivatives: tuple
    sheet: int = 1
    turning_points: tuple = ()
    _numeric: tuple = dataclasses.field(default=(), repr=False)
    _second: tuple = dataclasses.field(default=(), repr=False)

    def V(self, x):
        return self._numeric[0](mpmath.mpc(x))

    def root(self, x, reference=None):
        """sqrt(V(x)) on the chosen sheet, or the root closest to a reference value."""
        value = mpmath.sqrt(self.V(x))
        if reference is None:
            return self.sheet * value
        return value if abs(value - reference) <= abs(value + reference) else -value

    def derivative(self, g, x, root=None):
        """F_g'(x); `root` selects the branch of sqrt(V)."""
        root = self.root(x) if root is None else root
        A, B = self._numeric[1][g]
        return A(x) + B(x) * root

    def second_derivative(self, g, x, root=None):
        root = self.root(x) if root is None else root
        A, B = self._second[g]
        return A(x) + B(x) * root

    def _check_path(self, distance):
        for point in self.turning_points:
            if distance(point) < TURNING_POINT_MARGIN:
                raise errors.TurningPointOnPath(
                    f"Integration path passes the turning point {mpmath.nstr(point, 8)}",
                    turning_point=point)

    def _divergent_part(self):
        """Coefficients w_k and exponents e_k of sqrt(V) ~ sum w_k x^e_k with e_k >= -1."""
        d = sympy.degree(self.potential, X)
        u = sympy.Dummy('u')
        W = sympy.expand(u ** d * self.potential.subs(X, 1 / u))
        count = d // 2 + 2
        expansion = sympy.series(sympy.sqrt(W), u, 0, count).removeO()
        terms = []
        for k in range(count):
            exponent = sympy.Rational(d, 2) - k
            if exponent < -1:
                break
            terms.append((_mpc(expansion.coeff(u, k)), mpmath.mpf(exponent.p) / exponent.q,
                          bool(exponent == -1)))
        return terms

    def _f0_at_infinity(self, x):
        terms = [(self.sheet * w, e, is_log) for w, e, is_log in self._divergent_part()]

        def divergent(t):
            return mpmath.fsum(w * mpmath.power(t, e) for w, e, _ in terms)

        def antiderivative(t):
            return mpmath.fsum(w * mpmath.log(t) if is_log else w * mpmath.power(t, e + 1) / (e + 1)
                               for w, e, is_log in terms)

        def tail(s):
            t = x + s
            return self.sheet * mpmath.sqrt(self.V(t)) - divergent(t)
        return -(antiderivative(x) - mpmath.quad(tail, [0, mpmath.inf]))

    def value(self, g, x):
        """F_g(x) with the constant fixed by the anchor."""
        assert 0 <= g <= self.K, f"F_{g} is not computed (K = {self.K})"
        x = mpmath.mpc(x)
        if self.anchor == 'infinity':
            self._check_path(lambda point: _ray_distance(point, x))
            if g == 0:
                return self._f0_at_infinity(x)
            if g == 1:
                return -mpmath.log(self.V(x)) / 4
            return -mpmath.quad(lambda s: self.derivative(g, x + s), [0, mpmath.inf])
        x0 = mpmath.mpc(self.anchor)
        self._check_path(lambda point: _segment_distance(point, x0, x))
        return _integrate_polyline(self, [x0, x], [g])[0]

    def residual(self, x, hbar):
        """S'^2 + hbar S'' - V at x for the truncated S = sum_{g<=K} hbar^g F_g."""
        root = self.root(x)
        dS = mpmath.fsum(hbar ** g * self.derivative(g, x, root) for g in range(self.K + 1))
        d2S = mpmath.fsum(hbar ** g * self.second_derivative(g, x, root)
                          for g in range(self.K + 1))
        return dS ** 2 + hbar * d2S - self.V(x)

    def to_json(self):
        return {'potential': str(self.potential), 'K': self.K, 'anchor': str(self.anchor),
                'sheet': self.sheet,
                'derivatives': [{'A': str(A), 'B': str(B)} for A, B in self.derivatives]}


def wkb_expand(V, K, anchor='infinity', sheet=1):
    """WKB series S = sum_g hbar^g F_g of psi = exp(S / hbar) for hbar^2 psi'' = V psi."""
    V = parse_potential(V)
    assert V.is_polynomial(X), f"Potential {V} is not a polynomial in x"
    assert sheet in (1, -1), f"Sheet must be +1 or -1, got {sheet}"
    derivatives = wkb_derivatives(V, K)
    dV = sympy.diff(V, X)
    second = [_pair_cancel(_pair_diff(u, V, dV)) for u in derivatives]
    numeric = (_lambdify(V), tuple((_lambdify(A), _lambdify(B)) for A, B in derivatives))
    second_numeric = tuple((_lambdify(A), _lambdify(B)) for A, B in second)
    if anchor != 'infinity':
        anchor = mpmath.mpc(anchor)
    logging.info(f"WKB expansion of V = {V} to order {K}, anchored at {anchor}")
    return WkbSolution(V, K, anchor, tuple(derivatives), sheet, tuple(_turning_points(V)),
                       numeric, second_numeric)


def _integrate_polyline(wkb, points, orders):
    """Integrals of F_g' for each g in orders along a polyline, continuing sqrt(V)."""
    rule = mpmath.calculus.quadrature.GaussLegendre(mpmath.mp)
    nodes = rule.get_nodes(-1, 1, PERIOD_DEGREE, mpmath.mp.prec)
    nodes = sorted(nodes, key=lambda node: node[0])
    root = wkb.root(points[0])
    totals = [mpmath.mpc(0)] * len(orders)
    for a, b in zip(points[:-1], points[1:]):
        half = (b - a) / 2
        for t, w in nodes:
            x = a + half * (t + 1)
            root = wkb.root(x, root)
            for k, g in enumerate(orders):
                totals[k] += w * half * wkb.derivative(g, x, root)
        root = wkb.root(b, root)
    return totals


def quantum_period(wkb, cycle, K=None):
    """(1 / 4 pi i) times the loop integral of sum_g hbar^g p_g dq, p_g = -F_g'.

    `cycle` is a polyline of complex points, closed automatically, along which sqrt(V) is
    continued from the sheet of `wkb` at the first point.
    """
    K = wkb.K if K is None else K
    assert K <= wkb.K, f"Period order {K} exceeds the WKB order {wkb.K}"
    points = [mpmath.mpc(c) for c in cycle]
    assert len(points) >= 3, "A cycle needs at least three points"
    if points[-1] != points[0]:
        points.append(points[0])
    for a, b in zip(points[:-1], points[1:]):
        wkb._check_path(lambda point, a=a, b=b: _segment_distance(point, a, b))
    totals = _integrate_polyline(wkb, points, list(range(K + 1)))
    coeffs = [-total / (4j * mpmath.pi) for total in totals]
    logging.info(f"Quantum period to order {K}: classical part {mpmath.nstr(coeffs[0], 10)}")
    return FormalSeries(coeffs)


def circle(center, radius, vertices=64, turns=1):
    """Polyline approximating a counterclockwise circle traversed `turns` times."""
    center = mpmath.mpc(center)
    return [center + radius * mpmath.expjpi(2 * mpmath.mpf(k) / vertices)
            for k in range(vertices * turns + 1)]


@functools.lru_cache(maxsize=8)
def combined_wave_coefficients(order):
    """Taylor coefficients of 1/p + 1/(1 - e^p) at p = 0 up to p^order, exact."""
    expansion = sympy.series(1 / P + 1 / (1 - sympy.exp(P)), P, 0, order + 1).removeO()
    return tuple(expansion.coeff(P, m) for m in range(order + 1))


def _expr(g):
    return as_expression(g, ('x',)) if isinstance(g, str) else g


def _check_decay(g):
    """|g| must be non-increasing along DECAY_GRID and x |g| must shrink by DECAY_RATIO per doubling."""
    values = [abs(expr_eval(g, (mpmath.mpf(x),))) for x in DECAY_GRID]
    weighted = [x * v for x, v in zip(DECAY_GRID, values)]
    decaying = all(after <= before for before, after in zip(values[1:], values[2:]))
    decaying = decaying and all(after <= DECAY_RATIO * before
                                for before, after in zip(weighted[1:], weighted[2:]) if before)
    if not decaying:
        raise errors.NoDecay(f"{g} does not decay on [0, +inf)",
                             samples={x: mpmath.nstr(v, 5) for x, v in zip(DECAY_GRID, values)})


def euler_maclaurin(g, K, correction_only=False):
    """hbar sum_{k>=0} g(k hbar) ~ int_0^inf g + hbar g(0)/2 + sum_{n odd} hbar^(n+1)
    zeta(-n)/n! g^(n)(0), as a series to order max(K, 1)."""
    g = _expr(g)
    assert g.n == 1, f"euler_maclaurin needs a function of one variable, got {g.n}"
    _check_decay(g)
    order = max(K, 1)
    derivatives = taylor(g, (mpmath.mpf(0),), order - 1).univariate()
    wave = combined_wave_coefficients(order - 1)
    coeffs = [mpmath.mpc(0) if correction_only else
              mpmath.quad(lambda x: expr_eval(g, (x,)), [0, mpmath.inf])]
    for n in range(order):
        # univariate() holds g^(n)(0) / n!, and [p^n] of the wave function is zeta(-n) / n!
        coeffs.append(_mpc(wave[n]) * derivatives[n] * mpmath.factorial(n))
    return FormalSeries(coeffs)


def euler_maclaurin_sum(g, hbar):
    """hbar sum_{k>=0} g(k hbar) by direct summation."""
    g = _expr(g)
    hbar = mpmath.mpf(hbar)
    return hbar * mpmath.nsum(lambda k: expr_eval(g, (k * hbar,)), [0, mpmath.inf])


@dataclasses.dataclass(frozen=True)
class PolytopeExpansion:
    """hbar S_P(hbar) ~ exp(exponent / hbar) * series."""
    case: str
    series: FormalSeries
    exponent: mpmath.mpc
    point: mpmath.mpc = None
    mode: int = None

    def evaluate(self, hbar):
        return mpmath.exp(self.exponent / hbar) * self.series.evaluate(hbar)

    def to_json(self):
        return {'case': self.case, 'exponent': self.exponent, 'point': self.point,
                'mode': self.mode, 'series': self.series.to_json()}


def _interior(F0, g, K, seed, tolerances):
    seed = mpmath.mpc(seed)
    slope = expr_eval(F0, (seed,), (1,))
    mode = int(mpmath.nint(slope.imag / (2 * mpmath.pi)))
    text = f"({F0}) - 2*pi*i*({mode})*q"
    scene = make_scene(text, ('q',), str(g), name='polytope')
    try:
        root = landscape.newton_from_seed(scene.f, (seed,), (), tolerances)
    except errors.NoConvergence as err:
        raise errors.ConditionViolated(f"No critical point of the mode {mode} phase near "
                                       f"{mpmath.nstr(seed, 8)}: {err.message}", condition=3)
    q0 = root[0]
    slope = expr_eval(F0, (q0,), (1,))
    if abs(slope - 2j * mpmath.pi * mode) > CONDITION_TOL:
        raise errors.ConditionViolated(f"F0'(q0) = {mpmath.nstr(slope, 8)} is not in 2 pi i Z",
                                       condition=3)
    if abs(q0.imag) > CONDITION_TOL or q0.real <= 0:
        raise errors.ConditionViolated(f"Critical point {mpmath.nstr(q0, 8)} is not inside "
                                       "the polytope", condition=1)
    curvature = expr_eval(F0, (q0,), (2,))
    if curvature.real >= 0 or expr_eval(F0, (q0,)).real <= expr_eval(F0, (mpmath.mpf(0),)).real:
        raise errors.ConditionViolated(f"Re F0 is not maximal at {mpmath.nstr(q0, 8)}",
                                       condition=2)
    crit = landscape.make_critical_point(scene.f, root, tolerances)
    series = local_expansion_1d(scene, crit, K, tolerances).series
    series = series.scale(mpmath.sqrt(2 * mpmath.pi)).shift_mu(Fraction(1, 2))
    return PolytopeExpansion('interior_saddle', series, crit.z, q0, mode)


def _graded_mul(a, b, K):
    result = [dict() for _ in range(K + 1)]
    for i, left in enumerate(a):
        for j, right in enumerate(b[:K + 1 - i]):
            for m, c in left.items():
                for n, d in right.items():
                    result[i + j][m + n] = result[i + j].get(m + n, 0) + c * d
    return result


@functools.lru_cache(maxsize=8)
def _boundary_wave_derivatives(order):
    return tuple(sympy.lambdify(P, sympy.diff(1 / (1 - sympy.exp(P)), P, j), 'mpmath')
                 for j in range(order + 1))


def _boundary(F0, g, K):
    zero = (mpmath.mpf(0),)
    p0 = expr_eval(F0, zero, (1,))
    if abs(p0 - 2j * mpmath.pi * mpmath.nint(p0.imag / (2 * mpmath.pi))) < CONDITION_TOL:
        raise errors.ConditionViolated("F0'(0) lies in 2 pi i Z", condition=3)
    if p0.real >= 0:
        raise errors.ConditionViolated(f"Re F0 is not maximal at the vertex 0 "
                                       f"(F0'(0) = {mpmath.nstr(p0, 8)})", condition=2)
    f_jet = taylor(F0, zero, K + 1).univariate()
    g_jet = taylor(g, zero, K).univariate()
    # g(k hbar) exp((F0(k hbar) - F0(0) - p0 k hbar) / hbar), graded by hbar, polynomial in k
    inner = [{a: g_jet[a]} for a in range(K + 1)]
    exponent = [dict() for _ in range(K + 1)]
    for m in range(2, K + 2):
        exponent[m - 1] = {m: f_jet[m]}
    power = [{0: mpmath.mpc(1)}] + [dict() for _ in range(K)]
    factor = [{0: mpmath.mpc(1)}] + [dict() for _ in range(K)]
    for j in range(1, K + 1):
        power = _graded_mul(power, exponent, K)
        for i in range(K + 1):
            for m, c in power[i].items():
                factor[i][m] = factor[i].get(m, 0) + c / mpmath.factorial(j)
    graded = _graded_mul(inner, factor, K)
    waves = _boundary_wave_derivatives(2 * K)
    coeffs = [mpmath.fsum(c * waves[m](p0) for m, c in level.items()) for level in graded]
    return PolytopeExpansion('boundary', FormalSeries(coeffs, 1), f_jet[0], mpmath.mpc(0))


def polytope_sum_asymptotics(F0, g='1', case='boundary', K=4, seed=None,
                             tolerances=DEFAULT_TOLERANCES):
    """Asymptotics of hbar S_P(hbar) = hbar sum_{k>=0} g(k hbar) exp(F0(k hbar) / hbar) at
    hbar = 1/N.

    `case` is 'interior_saddle' (needs a seed near the saddle q0 with F0'(q0) in 2 pi i Z) or
    'boundary' (the vertex 0); a boundary F0 identically zero gives the Euler-Maclaurin series.
    """
    F0 = as_expression(F0, ('q',))
    g = as_expression(g, ('q',))
    if case == 'interior_saddle':
        assert seed is not None, "The interior case needs a seed near the saddle"
        result = _interior(F0, g, K, seed, tolerances)
    elif case == 'boundary':
        if sympy.simplify(F0.to_sympy()) == 0:
            result = PolytopeExpansion('degenerate', euler_maclaurin(g, K), mpmath.mpc(0),
                                       mpmath.mpc(0))
        else:
            result = _boundary(F0, g, K)
    else:
        raise ValueError(f"Unknown polytope case {case!r}")
    logging.info(f"Polytope sum ({result.case}) to order {K}: leading coefficient "
                 f"{mpmath.nstr(result.series[0], 12)}")
    return result


def product_polytope_sum(expansions):
    """The expansion of a product of 1D lattice sums."""
    assert expansions, "Need at least one factor"
    series, exponent = expansions[0].series, expansions[0].exponent
    for item in expansions[1:]:
        series = series * item.series
        exponent += item.exponent
    return PolytopeExpansion('product', series, exponent)


def lattice_sum(F0, g, N, max_terms=10 ** 6):
    """hbar sum_{k>=0} g(k/N) exp(N F0(k/N)) at hbar = 1/N by direct summation."""
    F0 = as_expression(F0, ('q',))
    g = as_expression(g, ('q',))
    hbar = mpmath.mpf(1) / N
    total, peak, quiet = mpmath.mpc(0), mpmath.mpf(0), 0
    for k in range(max_terms):
        q = k * hbar
        term = expr_eval(g, (q,)) * mpmath.exp(expr_eval(F0, (q,)) / hbar)
        total += term
        peak = max(peak, abs(term))
        if abs(term) < mpmath.eps * peak:
            quiet += 1
            if quiet > 20:
                break
        else:
            quiet = 0
    return hbar * total


def polytope_sum_check(expansion, F0, g='1', Ns=(200, 400)):
    """Relative truncation errors at hbar = 1/N and the ratio of consecutive errors."""
    rows = []
    for N in Ns:
        hbar = mpmath.mpf(1) / N
        direct = lattice_sum(F0, g, N) * mpmath.exp(-expansion.exponent / hbar)
        scale = mpmath.power(hbar, mpmath.mpf(expansion.series.mu.numerator) /
                             expansion.series.mu.denominator)
        series = expansion.series.evaluate(hbar)
        rows.append(abs(direct - series) / scale)
    ratios = [float(a / b) if b else math.inf for a, b in zip(rows[:-1], rows[1:])]
    return {'N': list(Ns), 'errors': [float(e) for e in rows], 'ratios': ratios}
