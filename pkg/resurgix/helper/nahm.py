"""Generalized Nahm sums at roots of unity.

For data (P, b, a, c, chi) and q = exp(2 pi i / N),

    Z_N = sum over j in [0, N-1]^d with j/N in P of
          chi^j q^(j.b.j/2 + c.j) prod_i ((j_i)_q!)^(a_i),

where (j)_q! = (1 - q)...(1 - q^j), q^lambda = exp(2 pi i lambda / N) for rational lambda and
chi_i = exp(2 pi i alpha_i). Saddle data use logarithmic coordinates u_i, x_i = exp(u_i), with
Im u_i in [0, 2 pi); at hbar = 2 pi i / N the lattice point j sits at u = j hbar.
"""
import configparser
import dataclasses
from fractions import Fraction
import functools
import itertools
import logging
import math
import os

import mpmath
import numpy as np
import sympy

from resurgix.helper import errors, landscape, qwf, utils
from resurgix.helper.expressions import parse_expression
from resurgix.helper.parallel import parallel_map
from resurgix.helper.precision import DEFAULT_TOLERANCES, HIGH_PRECISION, at_least
from resurgix.helper.saddle import local_expansion_wick
from resurgix.helper.scenes import make_scene

Y = sympy.Symbol('y')
H = sympy.Symbol('h')

SEED_MODULI = (0.2, 0.4, 0.7, 1.0, 1.5, 2.5, 5.0)
SEED_ARGUMENTS = 12
MAX_SEEDS = 400
MAX_NEWTON_ITERATIONS = 80
MODE_TOL = 1e-8
SLABS = 16
DFT_FRACTIONS = (0.15, 0.2, 0.25, 0.3, 0.35)
MATCH_BOUND = 3


def _fraction(value):
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


def _rational(value):
    return sympy.Rational(value.numerator, value.denominator)


def _cube(d):
    rows = []
    for i in range(d):
        unit = tuple(Fraction(1 if k == i else 0) for k in range(d))
        rows.append((unit, Fraction(1)))
        rows.append((tuple(-c for c in unit), Fraction(0)))
    return tuple(rows)


def _satisfies(rows, point, scale=1):
    return all(sum(c * x for c, x in zip(coeffs, point)) <= rhs * scale for coeffs, rhs in rows)


def polyhedron_vertices(inequalities, d, outer=(-1, 2)):
    """Vertices of {t : A t <= r} intersected with the box outer^d, by exact enumeration of
    d-subsets of active constraints."""
    rows = list(inequalities)
    lo, hi = outer
    for i in range(d):
        unit = tuple(Fraction(1 if k == i else 0) for k in range(d))
        rows.append((unit, Fraction(hi)))
        rows.append((tuple(-c for c in unit), Fraction(-lo)))
    found = set()
    for subset in itertools.combinations(rows, d):
        matrix = sympy.Matrix([[_rational(c) for c in coeffs] for coeffs, _ in subset])
        if matrix.det() == 0:
            continue
        solution = matrix.LUsolve(sympy.Matrix([_rational(rhs) for _, rhs in subset]))
        point = tuple(Fraction(int(v.p), int(v.q)) for v in solution)
        if _satisfies(rows, point):
            found.add(point)
    return sorted(found)


@dataclasses.dataclass(frozen=True)
class NahmData:
    """The data of a generalized Nahm sum. P is {t : A t <= r}, given as pairs (row of A, r);
    chi holds the angles alpha_i of chi_i = exp(2 pi i alpha_i), reduced to [0, 1)."""
    b: tuple
    a: tuple
    c: tuple
    chi: tuple
    inequalities: tuple = None
    name: str = 'nahm'

    def __post_init__(self):
        d = len(self.a)
        assert d >= 1, "Nahm data need at least one variable"
        assert len(self.b) == d and all(len(row) == d for row in self.b), f"b must be {d} x {d}"
        assert len(self.c) == d and len(self.chi) == d, \
            f"a, c and chi must all have length {d}, got {len(self.c)} and {len(self.chi)}"
        assert all(Fraction(v).denominator == 1 for v in self.a), f"a must be integral, got {self.a}"
        object.__setattr__(self, 'b', tuple(tuple(_fraction(v) for v in row) for row in self.b))
        object.__setattr__(self, 'a', tuple(int(v) for v in self.a))
        object.__setattr__(self, 'c', tuple(_fraction(v) for v in self.c))
        object.__setattr__(self, 'chi', tuple(_fraction(v) % 1 for v in self.chi))
        if self.inequalities is None:
            object.__setattr__(self, 'inequalities', _cube(d))
        else:
            rows = []
            for coeffs, rhs in self.inequalities:
                assert len(coeffs) == d, f"Inequality {coeffs} does not have {d} coefficients"
                rows.append((tuple(_fraction(v) for v in coeffs), _fraction(rhs)))
            object.__setattr__(self, 'inequalities', tuple(rows))
        for i in range(d):
            for j in range(i):
                if self.b[i][j] != self.b[j][i]:
                    raise errors.ResurgixError(f"b is not symmetric: b[{i}][{j}] = {self.b[i][j]} "
                                               f"but b[{j}][{i}] = {self.b[j][i]}", name=self.name)
        for vertex in self.vertices():
            if not all(0 <= t <= 1 for t in vertex):
                raise errors.ResurgixError(f"P is not contained in [0, 1]^{d}: vertex "
                                           f"{[str(t) for t in vertex]}", name=self.name)

    @property
    def d(self):
        return len(self.a)

    @property
    def variables(self):
        return ('u',) if self.d == 1 else tuple(f'u{i + 1}' for i in range(self.d))

    def vertices(self):
        return polyhedron_vertices(self.inequalities, self.d)

    def is_empty(self):
        return not self.vertices()

    def contains(self, j, N):
        """Whether j/N lies in P."""
        return _satisfies(self.inequalities, j, N)

    def residue_period(self):
        """M, the lcm of every denominator in b, c and the chi angles."""
        denominators = [v.denominator for row in self.b for v in row]
        denominators += [v.denominator for v in self.c + self.chi]
        return functools.reduce(math.lcm, denominators, 1)

    def permuted(self, order):
        """The same sum with variable k of the result being variable order[k] of self."""
        assert sorted(order) == list(range(self.d)), f"{order} is not a permutation"
        return NahmData(tuple(tuple(self.b[i][j] for j in order) for i in order),
                        tuple(self.a[i] for i in order), tuple(self.c[i] for i in order),
                        tuple(self.chi[i] for i in order),
                        tuple((tuple(coeffs[i] for i in order), rhs)
                              for coeffs, rhs in self.inequalities),
                        f'{self.name}-permuted')

    def with_inequalities(self, inequalities, name=None):
        return NahmData(self.b, self.a, self.c, self.chi, inequalities, name or self.name)

    def to_json(self):
        return {'name': self.name, 'd': self.d, 'a': list(self.a),
                'b': [[str(v) for v in row] for row in self.b],
                'c': [str(v) for v in self.c], 'chi': [str(v) for v in self.chi],
                'P': [[[str(v) for v in coeffs], str(rhs)] for coeffs, rhs in self.inequalities]}


def _vector(text):
    return [item.strip() for item in text.split(',')]


def parse_inequalities(text, d):
    """Parses 'A_1 <= r_1; A_2 <= r_2' with each A_k a comma-separated row; '>=' is negated."""
    rows = []
    for item in text.split(';'):
        if not item.strip():
            continue
        if '<=' in item:
            left, right, sign = *item.split('<='), 1
        elif '>=' in item:
            left, right, sign = *item.split('>='), -1
        else:
            raise errors.ResurgixError(f"Inequality {item!r} has neither '<=' nor '>='")
        coeffs = [sign * _fraction(v) for v in _vector(left)]
        if len(coeffs) != d:
            raise errors.ResurgixError(f"Inequality {item!r} does not have {d} coefficients")
        rows.append((tuple(coeffs), sign * _fraction(right)))
    return tuple(rows)


def read_nahm(filename):
    """Reads Nahm data from an INI file with a [nahm] section. A bare name such as 'golden'
    refers to a bundled fixture."""
    if not os.path.exists(filename):
        bundled = utils.fixture_path(filename if filename.endswith('.nahm') else filename + '.nahm')
        if not os.path.exists(bundled):
            raise FileNotFoundError(f"No Nahm data file {filename}")
        filename = bundled
    config = configparser.ConfigParser()
    config.read(filename)
    if 'nahm' not in config:
        raise errors.ResurgixError(f"Nahm data file {filename} has no [nahm] section")
    section = config['nahm']
    name = os.path.splitext(os.path.basename(filename))[0]
    try:
        a = [int(v) for v in _vector(section['a'])]
        d = section.getint('d', len(a))
        b = [[_fraction(v) for v in _vector(row)] for row in section['b'].split(';')]
        c = [_fraction(v) for v in _vector(section.get('c', ','.join(['0'] * d)))]
        chi = [_fraction(v) for v in _vector(section.get('chi', ','.join(['0'] * d)))]
    except (KeyError, ValueError, ZeroDivisionError) as err:
        raise errors.ResurgixError(f"Malformed Nahm data file {filename}: {err}")
    if len(a) != d:
        raise errors.ResurgixError(f"Nahm data file {filename} declares d = {d} but a has {len(a)} entries")
    inequalities = parse_inequalities(section['P'], d) if 'P' in section else None
    data = NahmData(tuple(map(tuple, b)), tuple(a), tuple(c), tuple(chi), inequalities, name)
    logging.info(f"Read Nahm data {name} with d = {d}, a = {data.a}")
    return data


def bundled_nahm():
    return sorted(os.path.splitext(name)[0] for name in os.listdir(utils.DATA_DIR)
                  if name.endswith('.nahm'))


def factorize(data):
    """Splits data with diagonal b and a box P into 1D factors whose sums multiply; None if the
    sum does not factorize."""
    d = data.d
    if any(data.b[i][j] for i in range(d) for j in range(d) if i != j):
        return None
    bounds = [[] for _ in range(d)]
    for coeffs, rhs in data.inequalities:
        support = [k for k, v in enumerate(coeffs) if v]
        if not support and rhs < 0:
            return None
        if len(support) > 1:
            return None
        if support:
            k = support[0]
            bounds[k].append(((coeffs[k],), rhs))
    return [NahmData(((data.b[k][k],),), (data.a[k],), (data.c[k],), (data.chi[k],),
                     tuple(bounds[k]), f'{data.name}-{k + 1}') for k in range(d)]


def q_factorials(N):
    """(j)_q! for j = 0..N-1 at q = exp(2 pi i / N)."""
    values = [mpmath.mpc(1)]
    for j in range(1, N):
        values.append(values[-1] * (1 - mpmath.expjpi(mpmath.mpf(2 * j) / N)))
    return values


def _phase(data, j, N):
    """The exponent of chi^j q^(j.b.j/2 + c.j) as an exact fraction of a full turn, in [0, 1)."""
    d = data.d
    quadratic = sum(data.b[i][k] * j[i] * j[k] for i in range(d) for k in range(d)) / 2
    linear = sum(c * ji for c, ji in zip(data.c, j))
    return ((quadratic + linear) / N + sum(alpha * ji for alpha, ji in zip(data.chi, j))) % 1


def _term(data, N, factorials, j):
    factor = mpmath.mpc(1)
    for ji, ai in sorted(zip(j, data.a)):
        if ai < 0 and factorials[ji] == 0:
            raise errors.ZeroQFactorialDivision(f"(j)_q! vanishes at j = {ji} with a negative "
                                                "exponent", j=list(j), N=N)
        factor *= factorials[ji] ** ai
    turn = _phase(data, j, N)
    return mpmath.expjpi(2 * mpmath.mpf(turn.numerator) / turn.denominator) * factor


def _slab_terms(data, N, factorials, first):
    terms = []
    for rest in itertools.product(range(N), repeat=data.d - 1):
        for j0 in first:
            j = (j0,) + rest
            if data.contains(j, N):
                terms.append(_term(data, N, factorials, j))
    return terms


def nahm_sum(data, N):
    """Z_N by direct summation at no less than 256 bits. Lattice slabs (ranges of j_1) are
    mapped over the worker pool; the terms are added with a single exactly rounded fsum so the
    value does not depend on the order of the variables."""
    assert N >= 1, f"N must be positive, got {N}"
    with at_least(HIGH_PRECISION):
        if data.is_empty():
            return mpmath.mpc(0)
        factorials = q_factorials(N)
        size = -(-N // SLABS)
        slabs = [range(start, min(start + size, N)) for start in range(0, N, size)]
        worker = functools.partial(_slab_terms, data, N, factorials)
        terms = [term for slab in parallel_map(worker, slabs) for term in slab]
        total = mpmath.mpc(mpmath.fsum(t.real for t in terms), mpmath.fsum(t.imag for t in terms))
    logging.debug(f"Z_{N} of {data.name} from {len(terms)} lattice points")
    return total


def z_sum_partial(data, N_max, w):
    """Partial sums sum_{N <= M} Z_N w^N for M = 1..N_max, emitted for inspection only."""
    with at_least(HIGH_PRECISION):
        w = mpmath.mpc(w)
        partial, sums = mpmath.mpc(0), []
        for N in range(1, N_max + 1):
            partial += nahm_sum(data, N) * w ** N
            sums.append(partial)
    return sums


# Critical points


@functools.lru_cache(maxsize=16)
def _product_system(data):
    """chi_i (1 - x_i)^a_i prod_j x_j^b_ij = 1, cleared of negative powers after raising to the
    common denominator D of b, as mpmath callables for the values and the Jacobian."""
    d = data.d
    D = functools.reduce(math.lcm, [v.denominator for row in data.b for v in row], 1)
    xs = sympy.symbols(f'x1:{d + 1}')
    equations = []
    for i in range(d):
        left = sympy.exp(2 * sympy.pi * sympy.I * _rational(data.chi[i]) * D)
        right = sympy.Integer(1)
        powers = [(1 - xs[i], data.a[i] * D)] + [(xs[j], data.b[i][j] * D) for j in range(d)]
        for base, exponent in powers:
            exponent = int(exponent)
            if exponent > 0:
                left *= base ** exponent
            elif exponent < 0:
                right *= base ** -exponent
        equations.append(sympy.expand(left - right))
    jacobian = sympy.Matrix(equations).jacobian(xs)
    return (sympy.lambdify(xs, equations, 'mpmath'), sympy.lambdify(xs, jacobian, 'mpmath'), D)


def torus_seeds(d):
    ring = [mpmath.mpf(r) * mpmath.expjpi(mpmath.mpf(2 * k + 1) / SEED_ARGUMENTS)
            for r in SEED_MODULI for k in range(SEED_ARGUMENTS)]
    seeds = list(itertools.product(ring, repeat=d))
    if len(seeds) > MAX_SEEDS:
        rng = np.random.default_rng(0)
        chosen = sorted(rng.choice(len(seeds), MAX_SEEDS, replace=False))
        seeds = [seeds[k] for k in chosen]
    return seeds


def _newton_product(data, tolerances, seed):
    values_of, jacobian_of, _ = _product_system(data)
    x = [mpmath.mpc(v) for v in seed]
    for _ in range(MAX_NEWTON_ITERATIONS):
        values = values_of(*x)
        if max(abs(v) for v in values) < tolerances.tol_newton:
            return tuple(x)
        try:
            step = mpmath.lu_solve(mpmath.matrix(jacobian_of(*x)),
                                   mpmath.matrix([-v for v in values]))
        except ZeroDivisionError:
            return None
        x = [v + step[k] for k, v in enumerate(x)]
    logging.debug(f"Seed {seed} did not converge")
    return None


def _lift(x):
    """u with exp(u) = x and Im u in [0, 2 pi), and the log branch k with u = Log x + 2 pi i k."""
    u, branches = [], []
    for value in x:
        log = mpmath.log(value)
        branch = 1 if log.imag < 0 else 0
        u.append(log + 2j * mpmath.pi * branch)
        branches.append(branch)
    return tuple(u), tuple(branches)


def _modes(data, x, u):
    """Poisson modes n_i with a_i log(1 - x_i) + (b u)_i + 2 pi i alpha_i = 2 pi i n_i, or None
    when some n_i is not an integer."""
    modes = []
    for i in range(data.d):
        total = data.a[i] * mpmath.log(1 - x[i]) + 2j * mpmath.pi * _mpf(data.chi[i])
        total += mpmath.fsum(_mpf(data.b[i][j]) * u[j] for j in range(data.d))
        mode = total / (2j * mpmath.pi)
        if abs(mode - mpmath.nint(mode.real)) > MODE_TOL:
            return None
        modes.append(int(mpmath.nint(mode.real)))
    return tuple(modes)


def _mpf(value):
    return mpmath.mpf(value.numerator) / value.denominator


def _text(value):
    return f'({value})'


def exponent_text(data, modes, u=None):
    """Phi_n(u) = -sum a_i (Li2(exp(u_i)) - pi^2/6) + u.b.u/2 + 2 pi i (alpha - n).u as text,
    with u the texts standing for the variables."""
    u = u or data.variables
    terms = []
    for i in range(data.d):
        if data.a[i]:
            terms.append(f'-{_text(data.a[i])}*(li2(exp({u[i]})) - pi^2/6)')
        for j in range(data.d):
            if data.b[i][j]:
                terms.append(f'{_text(data.b[i][j] / 2)}*({u[i]})*({u[j]})')
        turn = data.chi[i] - modes[i]
        if turn:
            terms.append(f'2*pi*i*{_text(turn)}*({u[i]})')
    return ' + '.join(terms) or '0'


@functools.lru_cache(maxsize=16)
def _wave_rational(m):
    """R_m(x) = (x d/dx)^m (x/(1 - x)) as text in x."""
    x = sympy.Symbol('x')
    result = x / (1 - x)
    for _ in range(m):
        result = sympy.cancel(x * sympy.diff(result, x))
    return str(result)


def log_density_texts(data, K, u=None):
    """L_0..L_K with prod ((j_i)_q!)^a_i q^(c.j) ~ (iN)^(A/2) exp(Phi/hbar + sum_l hbar^l L_l)."""
    u = u or data.variables
    levels = []
    for level in range(K + 1):
        terms = []
        for i in range(data.d):
            if level == 0:
                if data.a[i]:
                    terms.append(f'{_text(Fraction(data.a[i], 2))}*log(1 - exp({u[i]}))')
                if data.c[i]:
                    terms.append(f'{_text(data.c[i])}*({u[i]})')
            elif level % 2 == 1 and data.a[i]:
                coeff = data.a[i] * sympy.zeta(-level) / sympy.factorial(level)
                rational = _wave_rational(level - 1).replace('x', f'exp({u[i]})')
                terms.append(f'{_text(coeff)}*({rational})')
        if level == 1 and sum(data.a):
            terms.append(_text(Fraction(-sum(data.a), 24)))
        levels.append(' + '.join(terms) or '0')
    return levels


@dataclasses.dataclass(frozen=True, eq=False)
class NahmCritical:
    """A solution of the critical equations, lifted to u with explicit log branches. f_value is
    Phi_n(u), defined modulo (2 pi i)^2."""
    x: tuple
    u: tuple
    modes: tuple
    log_branches: tuple
    f_value: mpmath.mpc
    crit: landscape.CriticalPoint
    face: str = 'interior'

    @property
    def growth(self):
        """Im f / 2 pi: |exp(f / hbar)| = exp(N growth)."""
        return self.f_value.imag / (2 * mpmath.pi)

    @property
    def index(self):
        return self.crit.index

    def to_json(self):
        return {'index': self.index, 'x': list(self.x), 'u': list(self.u),
                'modes': list(self.modes), 'log_branches': list(self.log_branches),
                'f_value': self.f_value, 'growth': self.growth, 'face': self.face,
                'hess_det': self.crit.hess_det, 'morse': self.crit.morse}


def _is_new(x, found, tol):
    return all(max(abs(a - b) for a, b in zip(x, other)) >= tol for other in found)


def _product_residual(data, x, u):
    worst = mpmath.mpf(0)
    for i in range(data.d):
        log = data.a[i] * mpmath.log(1 - x[i]) + 2j * mpmath.pi * _mpf(data.chi[i])
        log += mpmath.fsum(_mpf(data.b[i][j]) * u[j] for j in range(data.d))
        worst = max(worst, abs(mpmath.exp(log) - 1))
    return worst


def critical_solve(data, tolerances=DEFAULT_TOLERANCES, allow_degenerate=False):
    """Solutions of chi_i (1 - x_i)^a_i prod_j x_j^b_ij = 1 by multi-start Newton over a torus
    grid, each verified as a critical point of Phi_n for its Poisson mode n.

    Solutions with some x_i in {0, 1} raise DegenerateSolution unless allow_degenerate, which
    skips them with a warning.
    """
    with at_least(HIGH_PRECISION):
        seeds = torus_seeds(data.d)
        worker = functools.partial(_newton_product, data, tolerances)
        found = []
        for root in parallel_map(worker, seeds):
            if root is not None and _is_new(root, found, tolerances.tol_dedup):
                found.append(root)
        logging.info(f"{len(found)} distinct solutions of the {data.name} critical equations "
                     f"from {len(seeds)} seeds")
        result = []
        for x in found:
            if any(abs(v) < tolerances.tol_dedup or abs(1 - v) < tolerances.tol_dedup for v in x):
                if not allow_degenerate:
                    raise errors.DegenerateSolution(f"Critical solution with x_i in {{0, 1}}: "
                                                    f"{[mpmath.nstr(v, 8) for v in x]}",
                                                    name=data.name)
                logging.warning(f"Skipping degenerate solution {[mpmath.nstr(v, 8) for v in x]}")
                continue
            critical = _verified(data, x, tolerances)
            if critical is not None:
                result.append(critical)
        result.sort(key=lambda c: (-c.growth, tuple((float(v.real), float(v.imag)) for v in c.x)))
        result = [dataclasses.replace(c, crit=dataclasses.replace(c.crit, index=k))
                  for k, c in enumerate(result)]
    for c in result:
        logging.info(f"Critical point {c.index}: x = {[mpmath.nstr(v, 12) for v in c.x]}, "
                     f"mode {c.modes}, f = {mpmath.nstr(c.f_value, 12)}")
    return result


def _verified(data, x, tolerances):
    u, branches = _lift(x)
    modes = _modes(data, x, u)
    if modes is None:
        # a root of the cleared polynomial system only
        logging.debug(f"Discarding spurious solution {[mpmath.nstr(v, 8) for v in x]}")
        return None
    f = parse_expression(exponent_text(data, modes), data.variables)
    u = landscape.newton_from_seed(f, u, (), tolerances)
    crit = landscape.make_critical_point(f, u, tolerances)
    x = tuple(mpmath.exp(v) for v in u)
    residual = _product_residual(data, x, u)
    if residual >= tolerances.tol_newton:
        raise errors.NoConvergence(f"Critical equations hold only to {mpmath.nstr(residual, 5)}",
                                   x=list(x))
    return NahmCritical(x, u, modes, branches, crit.z, crit)


# Saddle asymptotics


def saddle_scene(data, crit):
    return make_scene(exponent_text(data, crit.modes), data.variables, name=f'{data.name}-saddle')


def saddle_series(data, crit, K, tolerances=DEFAULT_TOLERANCES):
    """Coefficients c_k with the saddle's share of Z_N equal to
    hbar^-d (2 pi hbar)^(d/2) (iN)^(A/2) exp(f/hbar) sum_k c_k hbar^k, A = sum a_i."""
    with at_least(HIGH_PRECISION):
        expansion = local_expansion_wick(saddle_scene(data, crit), crit.crit, K, tolerances,
                                         log_density=log_density_texts(data, K))
    return expansion.series


def saddle_contribution(data, crit, N, K=0, series=None, tolerances=DEFAULT_TOLERANCES):
    """One saddle's prediction for Z_N, truncated after hbar^K."""
    if series is None:
        series = saddle_series(data, crit, K, tolerances)
    with at_least(HIGH_PRECISION):
        hbar = 2j * mpmath.pi / N
        d = data.d
        prefactor = hbar ** -d * mpmath.power(2 * mpmath.pi * hbar, mpmath.mpf(d) / 2)
        prefactor *= mpmath.exp(mpmath.mpf(sum(data.a)) / 2 * mpmath.log(1j * N))
        return prefactor * mpmath.exp(crit.f_value / hbar) * series.truncate(K).evaluate(hbar)


def decay_exponent(Ns, deviations):
    """-slope of log deviation against log N."""
    return float(-np.polyfit(np.log(Ns), np.log([float(v) for v in deviations]), 1)[0])


def saddle_sweep(data, crit, Ns, K=0, tolerances=DEFAULT_TOLERANCES):
    """Relative deviation between Z_N and one saddle's prediction along an N ladder."""
    series = saddle_series(data, crit, K, tolerances)
    rows = []
    for N in Ns:
        value = nahm_sum(data, N)
        prediction = saddle_contribution(data, crit, N, K, series)
        deviation = abs(value - prediction) / abs(prediction)
        logging.info(f"N = {N}: relative deviation {mpmath.nstr(deviation, 6)}")
        rows.append({'N': N, 'Z': value, 'prediction': prediction, 'deviation': deviation})
    return {'rows': rows, 'K': K, 'critical': crit.index,
            'decay_exponent': decay_exponent(list(Ns), [row['deviation'] for row in rows])}


def face_contribution(data, vertex, N, K=0, tolerances=DEFAULT_TOLERANCES):
    """The tail of Z_N next to a vertex t_v of P (d = 1), from the boundary expansion of
    sum_k g(k/N) exp(N F0(k/N)) with u = 2 pi i (j_0/N +- k/N)."""
    assert data.d == 1, "Face contributions are implemented for d = 1; use factorize for boxes"
    assert K == 0 or data.a[0] == 0, "With a != 0 only the leading face term is available"
    vertex = Fraction(vertex)
    if vertex.denominator == 1:
        raise errors.DegenerateSolution(f"The vertex t = {vertex} sits at x = 1", name=data.name)
    ends = [t for (t,) in data.vertices()]
    assert vertex in ends, f"{vertex} is not a vertex of P = {[str(t) for t in ends]}"
    direction = 1 if max(ends) > vertex else -1
    j0 = math.ceil(vertex * N) if direction > 0 else math.floor(vertex * N)
    u = f'2*pi*i*({Fraction(j0, N)} + ({direction})*q)'
    F0 = f'({exponent_text(data, (0,), (u,))})/(2*pi*i)'
    g = f'exp({log_density_texts(data, 0, (u,))[0]})'
    with at_least(HIGH_PRECISION):
        expansion = qwf.polytope_sum_asymptotics(F0, g, 'boundary', K, tolerances=tolerances)
        prefactor = N * mpmath.exp(mpmath.mpf(data.a[0]) / 2 * mpmath.log(1j * N))
        return prefactor * expansion.evaluate(mpmath.mpf(1) / N)


# The x = 1 wave function


def psi_x1_recursion(K, inhomogeneous='leading'):
    """f_0..f_K, polynomials in 1/y, of psi = sum_l hbar^l f_l(y) solving
    (1 - x - y) psi = 1 with x psi(y) = psi(exp(hbar) y), so that
    -y f_l = [l = 0] + sum_{i=1}^{l} (y d/dy)^i / i! f_{l-i}.

    inhomogeneous='every_order' keeps the constant on the right at every order instead.
    """
    assert K >= 0, f"K must be non-negative, got {K}"
    assert inhomogeneous in ('leading', 'every_order'), f"Unknown variant {inhomogeneous!r}"
    fs = []
    for level in range(K + 1):
        total = sympy.Integer(1 if level == 0 or inhomogeneous == 'every_order' else 0)
        for i in range(1, level + 1):
            term = fs[level - i]
            for _ in range(i):
                term = Y * sympy.diff(term, Y)
            total += term / sympy.factorial(i)
        fs.append(sympy.expand(-total / Y))
    return fs


def psi_x1_residual(fs, order, inhomogeneous='leading'):
    """hbar-coefficients 0..order of (1 - x - y) psi - rhs with the truncated psi substituted,
    the shift y -> exp(hbar) y carried out literally."""
    psi = sum(H ** level * f for level, f in enumerate(fs))
    shifted = psi.subs(Y, Y * sympy.exp(H))
    rhs = 1 if inhomogeneous == 'leading' else sum(H ** level for level in range(order + 1))
    expansion = sympy.series(psi - shifted - Y * psi - rhs, H, 0, order + 1).removeO()
    return [sympy.simplify(sympy.expand(expansion).coeff(H, level)) for level in range(order + 1)]


def finite_fourier(N, k, factorials=None):
    """-N sum_j y^j / (j)_q! at y = q^k."""
    factorials = factorials or q_factorials(N)
    terms = [mpmath.expjpi(mpmath.mpf(2 * (j * k % N)) / N) / factorials[j] for j in range(N)]
    return -N * mpmath.mpc(mpmath.fsum(t.real for t in terms), mpmath.fsum(t.imag for t in terms))


def dft_wavefunction_check(N, K, fractions=DFT_FRACTIONS, inhomogeneous='leading'):
    """Largest relative deviation between -N times the finite Fourier transform of
    ((j)_q!^-1)_j and sum_{l <= K} hbar^l f_l(y), over y = q^k with k = round(fraction N)."""
    assert 0 <= K <= 4, f"K must be in 0..4, got {K}"
    Ns = [N] if isinstance(N, int) else list(N)
    functions = [sympy.lambdify(Y, f, 'mpmath') for f in psi_x1_recursion(K, inhomogeneous)]
    deviations = []
    with at_least(HIGH_PRECISION):
        for n in Ns:
            hbar = 2j * mpmath.pi / n
            factorials = q_factorials(n)
            worst = mpmath.mpf(0)
            for fraction in fractions:
                k = round(fraction * n)
                assert 0 < k < n / 2, f"y = q^{k} must avoid y = 1 and lie in the upper half plane"
                y = mpmath.expjpi(mpmath.mpf(2 * k) / n)
                series = mpmath.fsum(hbar ** level * f(y) for level, f in enumerate(functions))
                transform = finite_fourier(n, k, factorials)
                worst = max(worst, abs(transform - series) / abs(series))
            logging.info(f"N = {n}, K = {K}: largest relative deviation {mpmath.nstr(worst, 6)}")
            deviations.append(worst)
    report = {'N': Ns, 'K': K, 'fractions': list(fractions), 'inhomogeneous': inhomogeneous,
              'deviations': deviations}
    if len(Ns) > 1:
        report['decay_exponent'] = decay_exponent(Ns, deviations)
    return report


# Integer matching


@dataclasses.dataclass(frozen=True)
class IntegerMatch:
    """Best integer combination of saddle contributions for one residue class of N mod M."""
    residue: int
    N: tuple
    coefficients: tuple
    residuals: tuple
    least_squares: tuple
    trend: float = None
    stable: bool = True
    conjectural: bool = True

    @property
    def exact(self):
        return self.trend is None


def _best_vector(targets, columns, bound):
    best, best_cost = None, None
    r = len(columns[0]) if columns else 0
    for vector in sorted(itertools.product(range(-bound, bound + 1), repeat=r),
                         key=lambda v: (sum(map(abs, v)), v)):
        cost = mpmath.fsum(abs(z - mpmath.fsum(m * s for m, s in zip(vector, row))) ** 2
                           for z, row in zip(targets, columns))
        if best_cost is None or cost < best_cost:
            best, best_cost = vector, cost
    return best


def _match_class(residue, Ns, values, contributions, bound):
    scales = [max([abs(z)] + [abs(s) for s in row]) or 1 for z, row in zip(values, contributions)]
    targets = [z / scale for z, scale in zip(values, scales)]
    columns = [[s / scale for s in row] for row, scale in zip(contributions, scales)]
    vectors = [_best_vector(targets[:end], columns[:end], bound) for end in range(2, len(Ns) + 1)]
    best = vectors[-1]
    residuals = [abs(z - mpmath.fsum(m * s for m, s in zip(best, row)))
                 for z, row in zip(targets, columns)]
    if columns and columns[0]:
        matrix = np.array([[complex(s) for s in row] for row in columns])
        least_squares = tuple(np.linalg.lstsq(matrix, np.array([complex(z) for z in targets]),
                                              rcond=None)[0])
    else:
        least_squares = ()
    if all(v < mpmath.mpf(10) ** (-mpmath.mp.dps + 10) for v in residuals):
        trend = None
    else:
        trend = -decay_exponent(Ns, [max(v, mpmath.eps) for v in residuals])
    stable = len(set(vectors[-2:])) == 1 and (trend is None or trend < 0)
    return IntegerMatch(residue, tuple(Ns), tuple(best), tuple(residuals), least_squares,
                        trend, stable)


def match_integers(data, candidates, N_list, K=0, bound=MATCH_BOUND, require_stable=True,
                   tolerances=DEFAULT_TOLERANCES):
    """Searches integer vectors m in [-bound, bound]^r minimizing sum_N |Z_N - sum m_k S_k(N)|^2
    (each N normalized by its largest term), separately for each residue class of N mod M.

    The fit is empirical: a class is stable when the best vector does not change when its
    largest N is added and the residuals decrease along N. Unstable classes raise NoStableFit
    when `require_stable`, and are reported otherwise.
    """
    period = data.residue_period()
    classes = {}
    for N in sorted(set(N_list)):
        classes.setdefault(N % period, []).append(N)
    for residue, Ns in classes.items():
        assert len(Ns) >= 2, f"Need at least two values of N = {residue} mod {period}, got {Ns}"
    series = [saddle_series(data, crit, K, tolerances) for crit in candidates]
    matches = []
    for residue, Ns in sorted(classes.items()):
        values = [nahm_sum(data, N) for N in Ns]
        contributions = [[saddle_contribution(data, crit, N, K, s)
                          for crit, s in zip(candidates, series)] for N in Ns]
        with at_least(HIGH_PRECISION):
            match = _match_class(residue, Ns, values, contributions, bound)
        logging.info(f"N = {residue} mod {period}: coefficients {match.coefficients}, residuals "
                     f"{[mpmath.nstr(v, 4) for v in match.residuals]}, stable {match.stable}")
        if require_stable and not match.stable:
            raise errors.NoStableFit(f"No stable integer fit for N = {residue} mod {period}",
                                     coefficients=match.coefficients, trend=match.trend)
        matches.append(match)
    return matches
