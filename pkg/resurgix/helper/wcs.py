"""Wall-crossing structures: resurgence packages, Stokes factors and their identities.

A package holds critical values z_i, the local series phi_i and integer Stokes indices n_ij,
where crossing the ray Arg t = Arg(z_i - z_j) counterclockwise sends I_i to I_i + n_ij I_j.
Jump factors keep the exponential weights symbolic as X_j / X_i with X_k = e^{z_k / t}.
"""
import dataclasses
from fractions import Fraction
import json
import logging

import mpmath
import numpy as np
import pandas as pd
import sympy

from resurgix.helper import borel, errors, landscape, saddle, thimble, utils
from resurgix.helper.precision import DEFAULT_TOLERANCES
from resurgix.helper.series import FormalSeries

MIN_VALIDATION_ORDER = 12
RH_NODES = 128
GAMMA_SAMPLES = 10
NUMERIC_IDENTITY_TOL = 1e-12

# Integer images of e_1, e_2 as columns
FOCUS_FOCUS_X = sympy.Matrix([[0, 1], [-1, 0]])
FOCUS_FOCUS_PRINTED_X = sympy.Matrix([[0, -1], [-1, 0]])
FOCUS_FOCUS_Y = sympy.Matrix([[1, 1], [0, 1]])


@dataclasses.dataclass(frozen=True)
class ResurgencePackage:
    points: tuple
    series: tuple
    stokes: dict
    period: int = None

    def __post_init__(self):
        assert len(self.points) == len(self.series), \
            f"{len(self.points)} points but {len(self.series)} series"
        for a in range(len(self.points)):
            for b in range(a + 1, len(self.points)):
                if self.points[a] == self.points[b]:
                    raise errors.CoincidentValues(f"Points {a} and {b} share a value",
                                                  pair=[a, b])
        for (i, j), n in self.stokes.items():
            assert i != j, f"Diagonal Stokes index declared at {i}"
            assert isinstance(n, int), f"Stokes index n_{i}{j} = {n!r} is not an integer"

    @property
    def size(self):
        return len(self.points)

    def weights(self):
        return sympy.symbols(f'X0:{self.size}')

    def to_json(self):
        return {'points': list(self.points), 'series': list(self.series),
                'stokes': [{'i': i, 'j': j, 'n': n} for (i, j), n in sorted(self.stokes.items())],
                'period': self.period}


def make_package(points, series, stokes=None, period=None):
    """Package from plain values; zero Stokes indices are dropped."""
    stokes = {(int(i), int(j)): int(n) for (i, j), n in (stokes or {}).items() if n}
    return ResurgencePackage(tuple(mpmath.mpc(z) for z in points), tuple(series), stokes, period)


def package_from_json(data):
    points = [utils.complex_from_dict(z) if isinstance(z, dict) else utils.parse_complex(str(z))
              for z in data['points']]
    series = [FormalSeries.from_json(s) for s in data['series']]
    stokes = {(entry['i'], entry['j']): entry['n'] for entry in data.get('stokes', [])}
    return make_package(points, series, stokes, data.get('period'))


def read_package(filename):
    with open(filename) as f:
        data = json.load(f)
    pkg = package_from_json(data)
    logging.info(f"Read package with {pkg.size} points and {len(pkg.stokes)} Stokes indices "
                 f"from {filename}")
    return pkg


def write_package(pkg, filename):
    utils.save_to_json(pkg, filename)
    logging.info(f"Saved package to {filename}")


def package_from_scene(scene, K, tolerances=DEFAULT_TOLERANCES, stokes=None):
    """Critical values, local series and counted Stokes indices of a scene.

    Pass `stokes` to skip counting, e.g. for exponents outside the thimble counter's reach.
    """
    points = thimble.scene_points(scene, tolerances)
    expansions = saddle.local_expansions(scene, points, K, tolerances)
    missing = [p.index for p, e in zip(points, expansions) if e is None]
    if missing:
        raise errors.NonMorse(f"Points {missing} have no local expansion", points=missing)
    if stokes is None:
        stokes = {}
        rays = landscape.stokes_rays(points, tolerances, allow_coincident=True)
        for ray in rays.rays:
            jumps = {}
            for i, j in ray.pairs:
                if i not in jumps:
                    jumps[i] = thimble.stokes_jump(scene, i, ray.theta, tolerances, points=points)
                stokes[(i, j)] = jumps[i].partners.get(j, 0)
    return make_package([p.z for p in points], [e.series for e in expansions], stokes)


def _validation_row(pkg, germs, i, j, n, tolerances):
    s_star = pkg.points[i] - pkg.points[j]
    row = {'i': i, 'j': j, 'n': n, 's_star': mpmath.nstr(s_star, 12), 'detected': False,
           'alpha': None, 'alpha_int': None, 'residual': None, 'passed': False, 'message': ''}
    reports = borel.detect_singularities(germs[i], tolerances)
    row['detected'] = any(abs(r.location - s_star) <= tolerances.tol_sing_rel * abs(s_star)
                          for r in reports)
    try:
        constant = borel.extract_stokes(germs[i], s_star, germs[j], tolerances)
    except errors.ResurgixError as err:
        row['message'] = f"{type(err).__name__}: {err.message}"
        return row
    row['alpha'] = mpmath.nstr(constant.alpha_raw, 10)
    row['alpha_int'] = constant.alpha_int
    row['residual'] = constant.residual
    row['passed'] = constant.alpha_int == -n
    if not row['passed']:
        row['message'] = f"measured alpha {row['alpha']} does not match n = {n}"
    return row


def validate_package(pkg, tolerances=DEFAULT_TOLERANCES):
    """One row per declared Stokes index: the Borel singularity at z_i - z_j is detected and the
    measured Stokes constant alpha_ij equals -n_ij."""
    columns = ['i', 'j', 'n', 's_star', 'detected', 'alpha', 'alpha_int', 'residual', 'passed',
               'message']
    if not pkg.stokes:
        logging.info("Package declares no Stokes indices")
        return pd.DataFrame(columns=columns)
    orders = [s.K for s in pkg.series]
    assert min(orders) >= MIN_VALIDATION_ORDER, \
        f"Validation needs series of order >= {MIN_VALIDATION_ORDER}, got {min(orders)}"
    germs = [borel.borel(s, z) for s, z in zip(pkg.series, pkg.points)]
    rows = [_validation_row(pkg, germs, i, j, n, tolerances)
            for (i, j), n in sorted(pkg.stokes.items())]
    report = pd.DataFrame(rows, columns=columns)
    failures = (~report['passed']).sum()
    if failures:
        logging.warning(f"{failures} of {len(report)} Stokes indices failed validation")
    else:
        logging.info(f"All {len(report)} Stokes indices validated")
    return report


@dataclasses.dataclass(frozen=True)
class StokesData:
    rays: landscape.StokesRaySet
    jump_factors: tuple
    weights: tuple

    def to_json(self):
        return {'rays': self.rays, 'jump_factors': [str(m.tolist()) for m in self.jump_factors]}


def is_unipotent(matrix, index):
    """(matrix - id)^index vanishes exactly."""
    nilpotent = matrix - sympy.eye(matrix.rows)
    return (nilpotent ** index).applyfunc(sympy.cancel).is_zero_matrix


def same_matrix(left, right):
    return (left - right).applyfunc(sympy.cancel).is_zero_matrix


def stokes_data(pkg, tolerances=DEFAULT_TOLERANCES):
    """Rays of the package's critical values with their symbolic jump factors."""
    weights = pkg.weights()
    rays = landscape.stokes_rays(landscape.points_from_values(pkg.points), tolerances)
    factors = []
    for ray in rays.rays:
        factor = sympy.eye(pkg.size)
        for i, j in ray.pairs:
            n = pkg.stokes.get((i, j), 0)
            factor[i, j] += n * weights[j] / weights[i]
        members = {index for pair in ray.pairs for index in pair}
        assert is_unipotent(factor, len(members) + 1), \
            f"Jump factor on ray {mpmath.nstr(ray.theta, 8)} is not unipotent"
        factors.append(factor)
    return StokesData(rays, tuple(factors), weights)


@dataclasses.dataclass(frozen=True)
class Sector:
    """Angles swept counterclockwise from start to end (a full turn at most)."""
    start: float
    end: float
    include_start: bool = None
    include_end: bool = None

    def __post_init__(self):
        width = self.end - self.start
        assert 0 < width <= 2 * mpmath.pi + 1e-12, \
            f"Sector width {width} is outside (0, 2 pi]"

    @property
    def width(self):
        return mpmath.mpf(self.end) - self.start

    def offset(self, theta, tolerances=DEFAULT_TOLERANCES):
        """Counterclockwise distance from start to the ray theta, or None if it is outside."""
        tol = tolerances.tol_angle
        on_start = landscape.angle_distance(theta, self.start) < tol
        on_end = landscape.angle_distance(theta, self.end) < tol
        if not on_start and not on_end:
            offset = (theta - self.start) % (2 * mpmath.pi)
            return offset if offset < self.width else None
        if on_start and on_end and self.include_start and self.include_end:
            raise errors.RayOnBoundary("A full turn cannot include the same ray at both ends",
                                       theta=theta)
        declared = [flag for flag, on in ((self.include_start, on_start),
                                          (self.include_end, on_end)) if on]
        if all(flag is None for flag in declared):
            raise errors.RayOnBoundary(f"Ray {mpmath.nstr(theta, 10)} lies on the sector boundary",
                                       theta=theta, sector=[self.start, self.end])
        if on_start and self.include_start:
            return mpmath.mpf(0)
        if on_end and self.include_end:
            return self.width
        return None


def sector_product(stokes, sector, tolerances=DEFAULT_TOLERANCES):
    """Product of the jump factors of the rays in the sector, most counterclockwise first."""
    size = stokes.jump_factors[0].rows if stokes.jump_factors else len(stokes.weights)
    inside = []
    for ray, factor in zip(stokes.rays.rays, stokes.jump_factors):
        offset = sector.offset(ray.theta, tolerances)
        if offset is not None:
            inside.append((offset, factor))
    inside.sort(key=lambda item: item[0], reverse=True)
    product = sympy.eye(size)
    for _, factor in inside:
        product = product * factor
    logging.debug(f"Sector product over {len(inside)} rays")
    return product.applyfunc(sympy.cancel)


def specialize(matrix, pkg, t=None):
    """Substitutes X_k = e^{z_k / t}; without t every X_k = 1 (thimble basis)."""
    weights = pkg.weights()
    if t is None:
        return matrix.subs({x: 1 for x in weights})
    t = mpmath.mpc(t)
    values = [mpmath.exp(z / t) for z in pkg.points]
    return sympy.lambdify(weights, matrix, 'mpmath')(*values)


def _is_matrix(value):
    return isinstance(value, (np.ndarray, sympy.MatrixBase))


def _times(a, b):
    return a @ b if _is_matrix(a) and _is_matrix(b) else a * b


def _check_alignment(event, points, tolerances):
    i, j, k = event
    if len({i, j, k}) != 3:
        raise errors.BadAlignment(f"Wall event {event} needs three distinct indices",
                                  event=event)
    if points is None:
        return
    zi, zj, zk = (mpmath.mpc(points[index]) for index in event)
    span = zk - zi
    if abs(span) < tolerances.tol_dedup:
        raise errors.BadAlignment(f"Points {i} and {k} coincide", event=event)
    ratio = (zj - zi) / span
    if abs(ratio.imag) > tolerances.tol_angle or not 0 < ratio.real < 1:
        raise errors.BadAlignment(f"Point {j} is not strictly between {i} and {k}",
                                  event=event, ratio=ratio)


def family_update(T, event, points=None, inverse=False, tolerances=DEFAULT_TOLERANCES):
    """Crosses the wall where z_i, z_j, z_k align with z_j in the middle.

    T maps pairs (a, b) to scalars or matrices; absent pairs are zero. Only T_ik changes:
    T_ik + T_ij T_jk going forward and T_ik - T_ij T_jk for the inverse traversal.
    """
    _check_alignment(event, points, tolerances)
    i, j, k = event
    updated = dict(T)
    left, right = T.get((i, j)), T.get((j, k))
    if left is None or right is None:
        return updated
    step = _times(left, right)
    current = T.get((i, k))
    if current is None:
        updated[(i, k)] = -step if inverse else step
    else:
        updated[(i, k)] = current - step if inverse else current + step
    return updated


def monodromy_check_focus_focus(X=FOCUS_FOCUS_X, Y=FOCUS_FOCUS_Y):
    """(XY)^3 = id in exact integer arithmetic."""
    X, Y = sympy.Matrix(X), sympy.Matrix(Y)
    cube = (X * Y) ** 3
    holds = cube == sympy.eye(X.rows)
    logging.info(f"(XY)^3 = {cube.tolist()}: {'identity' if holds else 'not the identity'}")
    return holds


def _kind(value):
    if isinstance(value, FormalSeries):
        return 'series'
    if isinstance(value, sympy.MatrixBase):
        return 'exact'
    return 'numeric'


def _one(value, kind):
    if kind == 'series':
        return FormalSeries.constant(1, value.K)
    if kind == 'exact':
        return sympy.eye(value.rows)
    return np.eye(value.shape[0], dtype=complex)


def _mul(a, b, kind):
    return a * b if kind != 'numeric' else a @ b


def _inverse(value, kind, name):
    if kind == 'series':
        if value[0] == 0:
            raise errors.NotInvertible(f"{name} has zero constant term", element=name)
        return value.reciprocal()
    if kind == 'exact':
        if value.det() == 0:
            raise errors.NotInvertible(f"{name} is singular", element=name)
        return value.inv()
    if np.linalg.cond(value) > 1 / np.finfo(float).eps:
        raise errors.NotInvertible(f"{name} is numerically singular", element=name)
    return np.linalg.inv(value)


def _agree(left, right, kind, tol):
    if kind == 'series':
        return left.distance(right) <= tol
    if kind == 'exact':
        return same_matrix(left, right)
    return float(np.max(np.abs(left - right))) <= tol


def _operands(A, B):
    kind = _kind(A)
    assert _kind(B) == kind, "Both operands must be of the same kind"
    if kind == 'numeric':
        A, B = np.asarray(A, dtype=complex), np.asarray(B, dtype=complex)
        assert A.shape == B.shape and A.shape[0] == A.shape[1], "Operands must be square"
    return A, B, kind


def five_term_check(A, B, tol=NUMERIC_IDENTITY_TOL):
    """(1-B)^-1 (1-A) = (1-AB)^-1 (1-A) (1-B)^-1 (1-BA)."""
    A, B, kind = _operands(A, B)
    one = _one(A, kind)
    AB, BA = _mul(A, B, kind), _mul(B, A, kind)
    inv_b = _inverse(one - B, kind, '1 - B')
    inv_ab = _inverse(one - AB, kind, '1 - AB')
    left = _mul(inv_b, one - A, kind)
    right = _mul(_mul(_mul(inv_ab, one - A, kind), inv_b, kind), one - BA, kind)
    return _agree(left, right, kind, tol)


def six_term_check(A, B, tol=NUMERIC_IDENTITY_TOL):
    """(1-A)(1-BA)^-1 (1-B) = (1-B)(1-AB)^-1 (1-A)."""
    A, B, kind = _operands(A, B)
    one = _one(A, kind)
    inv_ba = _inverse(one - _mul(B, A, kind), kind, '1 - BA')
    inv_ab = _inverse(one - _mul(A, B, kind), kind, '1 - AB')
    left = _mul(_mul(one - A, inv_ba, kind), one - B, kind)
    right = _mul(_mul(one - B, inv_ab, kind), one - A, kind)
    return _agree(left, right, kind, tol)


def _require_nilpotent(matrix, name):
    matrix = sympy.Matrix(matrix)
    if not (matrix ** matrix.rows).is_zero_matrix:
        raise errors.NotNilpotent(f"{name} is not nilpotent", element=name)
    return matrix


def _geometric(matrix):
    """(1 - matrix)^-1 as the finite sum for a nilpotent matrix."""
    total = sympy.eye(matrix.rows)
    power = sympy.eye(matrix.rows)
    for _ in range(matrix.rows - 1):
        power = power * matrix
        total += power
    return total


def _h(x, y):
    return _geometric(x) * (sympy.eye(x.rows) - y)


def _farey_letters(A, B, depth):
    """Adjacent pairs (left, right, r(left), b(right)) after `depth` rounds of mediants, and the
    letters (r, b) of every interior fraction."""
    pairs = [(Fraction(0), Fraction(1), B, A)]
    letters = {}
    for _ in range(depth):
        refined = []
        for left, right, r_left, b_right in pairs:
            middle = Fraction(left.numerator + right.numerator,
                              left.denominator + right.denominator)
            r_middle, b_middle = b_right * r_left, r_left * b_right
            letters[middle] = (r_middle, b_middle)
            refined.append((left, middle, r_left, b_middle))
            refined.append((middle, right, r_middle, b_right))
        pairs = refined
    return pairs, letters


@dataclasses.dataclass(frozen=True)
class FareyResult:
    depth: int
    factors: tuple
    product: sympy.Matrix
    target: sympy.Matrix
    exact: bool

    def to_json(self):
        return {'depth': self.depth, 'factors': [str(f) for f in self.factors],
                'product': str(self.product.tolist()), 'target': str(self.target.tolist()),
                'exact': self.exact}


def farey_product(A, B, depth):
    """(1 - A) * prod over interior Farey fractions, decreasing, of g(p/q) * (1 - B)^-1,
    compared with h(B, A) = (1 - B)^-1 (1 - A)."""
    assert depth >= 0, f"Depth must be non-negative, got {depth}"
    A, B = _require_nilpotent(A, 'A'), _require_nilpotent(B, 'B')
    one = sympy.eye(A.rows)
    _, letters = _farey_letters(A, B, depth)
    fractions = sorted(letters, reverse=True)
    product = one - A
    for fraction in fractions:
        r, b = letters[fraction]
        product = product * _h(r, b)
    product = product * _geometric(B)
    target = _h(B, A)
    exact = same_matrix(product, target)
    logging.info(f"Farey product at depth {depth} over {len(fractions)} fractions: "
                 f"{'exact' if exact else 'differs from h(B, A)'}")
    return FareyResult(depth, tuple(fractions), product, target, exact)


def farey_factorization(A, B, depth):
    """h(B, A) as the product of h(r(left), b(right)) over adjacent Farey pairs, decreasing.
    Exact at every depth."""
    assert depth >= 0, f"Depth must be non-negative, got {depth}"
    A, B = _require_nilpotent(A, 'A'), _require_nilpotent(B, 'B')
    pairs, _ = _farey_letters(A, B, depth)
    product = sympy.eye(A.rows)
    for _, _, r_left, b_right in reversed(pairs):
        product = product * _h(r_left, b_right)
    target = _h(B, A)
    return FareyResult(depth, tuple((left, right) for left, right, _, _ in reversed(pairs)),
                       product, target, same_matrix(product, target))


def gamma_mod(t):
    """(2 pi t)^-1/2 e^{1/t} t^{1/t} Gamma(1/t) with principal branches."""
    t = mpmath.mpc(t)
    x = 1 / t
    return mpmath.exp(x) * mpmath.power(t, x) * mpmath.gamma(x) / mpmath.sqrt(2 * mpmath.pi * t)


def _gamma_row(t):
    x = 1 / t
    gamma = mpmath.gamma(x)
    recursion = abs(mpmath.gamma(x + 1) / x - gamma) / abs(gamma)
    right = gamma_mod(t)
    left = 1 / gamma_mod(-t)
    if t.imag > 0:
        side = '+i'
        expected = right * (1 - mpmath.exp(-2j * mpmath.pi / t))
        residual = abs(left - expected) / abs(left)
        printed = residual
    else:
        side = '-i'
        residual = abs(right - left / (1 - mpmath.exp(2j * mpmath.pi / t))) / abs(right)
        printed = abs(right - left / (1 + mpmath.exp(-2j * mpmath.pi / t))) / abs(right)
    return {'t': mpmath.nstr(t, 8), 'side': side, 'residual': float(residual),
            'printed_residual': float(printed), 'gamma_recursion': float(recursion)}


def gamma_samples(count=GAMMA_SAMPLES):
    """`count` points on each of i R+ and i R- with |t| log-spaced over [0.05, 1]."""
    moduli = np.geomspace(0.05, 1, count)
    return [mpmath.mpc(0, sign * mpmath.mpf(m)) for sign in (1, -1) for m in moduli]


def gamma_rh_check(t_samples=None):
    """Jump identities of the modified Gamma integrals across the imaginary axis."""
    t_samples = gamma_samples() if t_samples is None else [mpmath.mpc(t) for t in t_samples]
    for t in t_samples:
        assert abs(t.real) <= 1e-12 * abs(t) and t.imag != 0, \
            f"Sample {t} is not on the imaginary axis"
    report = pd.DataFrame([_gamma_row(t) for t in t_samples],
                          columns=['t', 'side', 'residual', 'printed_residual',
                                   'gamma_recursion'])
    logging.info(f"Gamma jump identities on {len(report)} samples, "
                 f"worst residual {report['residual'].max():.2e}")
    return report


@dataclasses.dataclass(frozen=True)
class RHSolution:
    grid: tuple
    values: np.ndarray
    iterations: int
    change: float

    def to_frame(self):
        rows = []
        for k, t in enumerate(self.grid):
            for i in range(self.values.shape[0]):
                rows.append({'t_re': t.real, 't_im': t.imag, 'point': i,
                             'psi_re': self.values[i, k].real, 'psi_im': self.values[i, k].imag})
        return pd.DataFrame(rows)

    def to_json(self):
        return {'grid': list(self.grid), 'values': self.values.tolist(),
                'iterations': self.iterations, 'change': self.change}


class _RayQuadrature:
    """Gauss-Legendre nodes on the ray Arg t = theta with rho = u / (1 - u)."""

    def __init__(self, i, j, n, dz, nodes):
        u, w = np.polynomial.legendre.leggauss(nodes)
        u = (u + 1) / 2
        w = w / 2
        direction = np.exp(1j * np.angle(dz))
        self.i, self.j, self.n = i, j, n
        self.points = u / (1 - u) * direction
        self.weights = w / (1 - u) ** 2 * direction * np.exp(-dz / self.points) / self.points

    def contribution(self, t, values):
        t = np.asarray(t)[..., None]
        return self.n * np.sum(self.weights * values / (self.points - t), axis=-1)


def _psi(i, t, constants, rays, state):
    total = np.full(np.shape(t), constants[i], dtype=complex)
    for r, ray in enumerate(rays):
        if ray.i == i:
            total = total + np.asarray(t) / (2j * np.pi) * ray.contribution(t, state[r])
    return total


def rh_reconstruct(pkg, grid, iters=200, nodes=RH_NODES, enable_stretch=False,
                   tolerances=DEFAULT_TOLERANCES):
    """Sectional functions Psi_i with the package's jumps, by fixed-point iteration of their
    Cauchy representation. Grid points must lie off the Stokes rays."""
    if not enable_stretch:
        raise errors.ResurgixError("Riemann-Hilbert reconstruction is experimental; "
                                   "pass enable_stretch=True")
    assert pkg.size <= 4, f"Reconstruction supports at most 4 points, got {pkg.size}"
    grid = tuple(complex(t) for t in grid)
    constants = [complex(s[0]) for s in pkg.series]
    rays = [_RayQuadrature(i, j, n, complex(pkg.points[i] - pkg.points[j]), nodes)
            for (i, j), n in sorted(pkg.stokes.items())]
    state = [np.full(nodes, constants[ray.j], dtype=complex) for ray in rays]
    change = 0.0
    for iteration in range(1, iters + 1):
        updated = [_psi(ray.j, ray.points, constants, rays, state) for ray in rays]
        change = max((float(np.max(np.abs(new - old))) for new, old in zip(updated, state)),
                     default=0.0)
        state = updated
        if change < tolerances.tol_rh:
            break
    else:
        raise errors.NoConvergence(f"Reconstruction did not settle in {iters} iterations "
                                   f"(last change {change:.2e})", iterations=iters, change=change)
    values = np.array([_psi(i, np.array(grid), constants, rays, state) for i in range(pkg.size)])
    logging.info(f"Reconstruction converged after {iteration} iterations "
                 f"(change {change:.2e})")
    return RHSolution(grid, values, iteration, change)
