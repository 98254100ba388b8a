"""Lefschetz thimbles: tracing, integrals over them and their jumps across Stokes rays.

The thimble of a critical point x_i at phase t is the curve on which

    f(x) = z_i - t r^2,   r >= 0 on each of its two branches,

so that e^{f/t} decays like e^{-r^2} along it. A branch is traced as x(r) with a scipy DOP853
predictor on dx/dr = -2 r t / f'(x); every point that is used afterwards is corrected by
Newton's method at working precision back onto the level curve.

Scenes in several variables are handled when f is a sum and the density a product of
one-variable parts. Thimbles and integrals are then products over the parts.

Orientation: a thimble runs from its branch along -v to its branch along +v, where
v = sqrt(t) * sqrt(-2/f''(x_i)) with principal square roots, unless a reference direction is
given, in which case the sign of v closest to it is used.
"""
import dataclasses
import functools
import logging

import mpmath
import numpy as np
import pandas as pd
import sympy
from scipy.integrate import solve_ivp

from resurgix.helper import errors, landscape
from resurgix.helper.expressions import Add, Mul, expr_eval, parse_expression, taylor
from resurgix.helper.parallel import parallel_map
from resurgix.helper.precision import DEFAULT_TOLERANCES
from resurgix.helper.scenes import Scene

DEFAULT_CUTOFF = 60
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
COLLISION_RADIUS = 1e-3
FAILURE_RADIUS = 0.05
MAX_CORRECTOR_STEPS = 40
SAMPLES_PER_BRANCH = 41
GAUGE_STEPS = 256
DEFAULT_MODULI = (0.5, 0.25)


@dataclasses.dataclass(frozen=True)
class ThimbleContour:
    crit_index: int
    t: mpmath.mpc
    samples: tuple
    parameters: tuple
    tail_bound: mpmath.mpf
    drift: mpmath.mpf
    components: tuple = dataclasses.field(default=(), repr=False, compare=False)

    def to_frame(self):
        """Samples as a table with the signed branch parameter s (negative on the -v branch)."""
        rows = []
        for s, (x, value) in zip(self.parameters, self.samples):
            row = {'s': float(s)}
            for k, coordinate in enumerate(x):
                row[f're_x{k}'] = float(coordinate.real)
                row[f'im_x{k}'] = float(coordinate.imag)
            row['re_f'] = float(value.real)
            row['im_f'] = float(value.imag)
            rows.append(row)
        return pd.DataFrame(rows)

    def to_json(self):
        return {'crit_index': self.crit_index, 't': self.t, 'tail_bound': self.tail_bound,
                'drift': self.drift, 'n_samples': len(self.samples)}


@dataclasses.dataclass(frozen=True)
class ThimbleIntegral:
    crit_index: int
    t: mpmath.mpc
    value: mpmath.mpc
    tail_bound: mpmath.mpf
    quad_error: mpmath.mpf

    def to_json(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class StokesJump:
    crit_index: int
    theta: mpmath.mpf
    partners: dict
    estimates: dict
    residual: mpmath.mpf
    eps: float

    def to_json(self):
        return {'crit_index': self.crit_index, 'theta': self.theta,
                'partners': {str(j): n for j, n in self.partners.items()},
                'estimates': {str(j): e for j, e in self.estimates.items()},
                'residual': self.residual, 'eps': self.eps}


@dataclasses.dataclass(frozen=True)
class LevelVolume:
    table: pd.DataFrame
    slope: float = None
    intercept: float = None

    @property
    def rows(self):
        return list(zip(self.table['s'], self.table['volume']))

    def to_json(self):
        return {'rows': [[s, v] for s, v in self.rows], 'slope': self.slope,
                'intercept': self.intercept}


@dataclasses.dataclass(frozen=True)
class ValleyMonodromy:
    theta0: mpmath.mpf
    rays: tuple
    jumps: tuple
    product: np.ndarray
    gauge: tuple
    monodromy: np.ndarray

    def to_json(self):
        return {'theta0': self.theta0, 'rays': list(self.rays),
                'jumps': [m.tolist() for m in self.jumps], 'product': self.product.tolist(),
                'gauge': list(self.gauge), 'monodromy': self.monodromy.tolist()}


def _split(expr, kind):
    """Texts of the one-variable parts of a sum ('sum') or product ('product').

    Parts without variables are attached to the first variable.
    """
    container = Add if kind == 'sum' else Mul
    root = expr.root
    if isinstance(root, container):
        parts = root.terms if kind == 'sum' else root.factors
    else:
        parts = (root,)
    groups = [[] for _ in expr.variables]
    for part in parts:
        used = part.variables()
        if len(used) > 1:
            raise errors.ResurgixError(f"{expr} does not separate: {part} couples "
                                       f"{len(used)} variables", expr=str(expr))
        groups[min(used) if used else 0].append(str(part))
    joiner, neutral = (' + ', '0') if kind == 'sum' else (' * ', '1')
    return [joiner.join(group) if group else neutral for group in groups]


@functools.lru_cache(maxsize=32)
def component_scenes(scene):
    """One-variable scenes whose exponents add up to f and whose densities multiply to vol."""
    if scene.n == 1:
        return (scene,)
    f_parts = _split(scene.f, 'sum')
    vol_parts = _split(scene.vol, 'product')
    return tuple(
        Scene(f"{scene.name}[{name}]", parse_expression(f_text, (name,)),
              parse_expression(vol_text, (name,)), (scene.box[k],), scene.seeds_per_axis,
              scene.precision, (scene.seed_box[k],))
        for k, (name, f_text, vol_text) in enumerate(zip(scene.variables, f_parts, vol_parts)))


@functools.lru_cache(maxsize=32)
def _cached_points(scene, tolerances, prec):
    return tuple(landscape.find_critical_points(scene, tolerances))


def scene_points(scene, tolerances=DEFAULT_TOLERANCES):
    """Critical points of a scene, cached per scene, tolerances and working precision."""
    return _cached_points(scene, tolerances, mpmath.mp.prec)


def thimble_direction(second_derivative, t, reference_direction=None):
    """Initial slope dx/dr of the +v branch of a one-variable thimble."""
    v = mpmath.sqrt(t) * mpmath.sqrt(-2 / mpmath.mpc(second_derivative))
    if reference_direction is not None and abs(v + reference_direction) < abs(v - reference_direction):
        v = -v
    return v


def _correct(f, guess, target, eps_branch):
    """Newton's method for f(x) = target; returns x and f'(x)."""
    x = mpmath.mpc(guess)
    tol = mpmath.ldexp(1, -mpmath.mp.prec + 8)
    loose = mpmath.ldexp(1, -mpmath.mp.prec // 2)
    previous = mpmath.inf
    for _ in range(MAX_CORRECTOR_STEPS):
        jet = taylor(f, (x,), 1, eps_branch)
        slope = jet[(1,)]
        if slope == 0:
            raise errors.NoConvergence("Level-curve corrector reached a critical point", x=x)
        step = (jet.value - target) / slope
        x -= step
        size = abs(step) / (1 + abs(x))
        # stalled at rounding level
        if size <= tol or (size < loose and size >= previous / 2):
            return x, taylor(f, (x,), 1, eps_branch)[(1,)]
        previous = size
    raise errors.NoConvergence("Level-curve corrector did not converge", x=x, target=target)


class _Branch:
    """One half of a one-variable thimble, x(r) for 0 <= r <= r_end."""

    def __init__(self, scene, base, z0, t, v, solution, r_seed, r_end, tolerances):
        self.scene = scene
        self.base = base
        self.z0 = z0
        self.t = t
        self.v = v
        self.solution = solution
        self.r_seed = r_seed
        self.r_end = r_end
        self.eps_branch = tolerances.eps_branch

    def point(self, r):
        """(x, dx/dr) on the branch at parameter r."""
        r = mpmath.mpf(r)
        if r == 0:
            return self.base, self.v
        if r <= self.r_seed:
            guess = self.base + self.v * r
        else:
            guess = mpmath.mpc(complex(self.solution(float(min(r, self.r_end)))[0]))
        x, slope = _correct(self.scene.f, guess, self.z0 - self.t * r ** 2, self.eps_branch)
        return x, -2 * r * self.t / slope

    def density(self, r, t_eval):
        """Integrand e^{(f - z0)/t_eval} g(x) dx/dr at r."""
        x, slope = self.point(r)
        weight = expr_eval(self.scene.vol, (x,), None, self.eps_branch)
        return mpmath.exp(-self.t * r ** 2 / t_eval) * weight * slope


def _box_margin(box, x):
    lo, hi = box[0]
    return min(x.real - lo.real, hi.real - x.real, x.imag - lo.imag, hi.imag - x.imag)


def _trace_branch(scene, crit, others, t, v, r_end, tolerances):
    """Integrates one branch from the seed radius out to r_end."""
    f = scene.f
    base, z0 = crit.x[0], crit.z
    r_seed = mpmath.mpf(tolerances.eps_seed)
    x_seed, _ = _correct(f, base + v * r_seed, z0 - t * r_seed ** 2, tolerances.eps_branch)
    t_complex = complex(t)
    eps_branch = tolerances.eps_branch

    def rhs(r, y):
        with mpmath.workprec(53):
            try:
                slope = taylor(f, (mpmath.mpc(complex(y[0])),), 1, eps_branch)[(1,)]
            except errors.BranchPointProximity:
                return [complex(np.nan)]
        if slope == 0:
            return [complex(np.nan)]
        return [-2 * r * t_complex / complex(slope)]

    events = []
    for other in others:
        radius = COLLISION_RADIUS * abs(complex(other - base))

        def collision(r, y, other=complex(other), radius=radius):
            return abs(y[0] - other) - radius
        collision.terminal = True
        collision.direction = -1
        events.append(collision)

    box = tuple((complex(lo), complex(hi)) for lo, hi in scene.box)

    def escape(r, y):
        return _box_margin(box, complex(y[0]))
    escape.terminal = True
    escape.direction = -1
    events.append(escape)

    solution = solve_ivp(rhs, (float(r_seed), float(r_end)), [complex(x_seed)], method='DOP853',
                         rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True, events=events)
    if solution.status == 1:
        for other, hits in zip(others, solution.t_events[:-1]):
            if len(hits):
                raise errors.StokesCollision(
                    f"Flow from {mpmath.nstr(base, 8)} runs into the critical point "
                    f"{mpmath.nstr(other, 8)}", crit=crit.index, near=other, r=float(hits[0]))
        raise errors.FlowEscape(f"Flow from {mpmath.nstr(base, 8)} leaves the search box at "
                                f"r = {solution.t_events[-1][0]:.4g}", crit=crit.index,
                                r=float(solution.t_events[-1][0]))
    if solution.status != 0:
        last = complex(solution.y[0, -1])
        for other in others:
            if abs(last - complex(other)) < FAILURE_RADIUS * abs(complex(other - base)):
                raise errors.StokesCollision(
                    f"Flow from {mpmath.nstr(base, 8)} stalls next to {mpmath.nstr(other, 8)}",
                    crit=crit.index, near=other, r=float(solution.t[-1]))
        raise errors.FlowEscape(f"Flow from {mpmath.nstr(base, 8)} failed: {solution.message}",
                                crit=crit.index, r=float(solution.t[-1]))
    logging.debug(f"Traced branch from {mpmath.nstr(base, 8)} in {len(solution.t)} steps")
    return _Branch(scene, base, z0, t, v, solution.sol, r_seed, mpmath.mpf(r_end), tolerances)


@dataclasses.dataclass(frozen=True)
class _ComponentThimble:
    scene: Scene
    crit: landscape.CriticalPoint
    t: mpmath.mpc
    v: mpmath.mpc
    branches: tuple

    @property
    def r_end(self):
        return self.branches[0].r_end

    def integral(self, t_eval):
        """(value, tail bound, quadrature error) of the integral over this thimble at t_eval."""
        decay = (self.t / t_eval).real
        if decay <= 0:
            raise errors.ResurgixError(f"A thimble traced at t = {mpmath.nstr(self.t, 8)} does not "
                                       f"decay at t = {mpmath.nstr(t_eval, 8)}")
        r_end = self.r_end
        nodes = [mpmath.mpf(0), self.branches[0].r_seed]
        nodes += [mpmath.mpf(k) for k in range(1, int(r_end) + 1) if k < r_end]
        nodes.append(r_end)
        values, error, tail = [], mpmath.mpf(0), mpmath.mpf(0)
        for branch in self.branches:
            value, err = mpmath.quad(functools.partial(branch.density, t_eval=t_eval), nodes,
                                     method='gauss-legendre', error=True)
            values.append(value)
            error += err
            tail += abs(branch.density(r_end, t_eval)) / (2 * decay * r_end)
        prefactor = mpmath.exp(self.crit.z / t_eval)
        return (values[0] - values[1]) * prefactor, tail * abs(prefactor), error * abs(prefactor)


def _coordinates(points, k, base, tol):
    coordinates = []
    for point in points:
        c = point.x[k]
        if abs(c - base) > tol and all(abs(c - o) > tol for o in coordinates):
            coordinates.append(c)
    return coordinates


def _component_thimbles(scene, crit, t, r_end, tolerances, references, points):
    result = []
    for k, sub in enumerate(component_scenes(scene)):
        base = crit.x[k]
        sub_crit = crit if scene.n == 1 else landscape.make_critical_point(sub.f, (base,), tolerances)
        others = _coordinates(points, k, base, tolerances.tol_dedup)
        v = thimble_direction(sub_crit.hessian[0, 0], t, references[k])
        branches = tuple(_trace_branch(sub, sub_crit, others, t, sign * v, r_end, tolerances)
                         for sign in (1, -1))
        result.append(_ComponentThimble(sub, sub_crit, t, v, branches))
    return tuple(result)


def _references(scene, reference_direction):
    if reference_direction is None:
        return (None,) * scene.n
    if scene.n == 1 and not isinstance(reference_direction, (tuple, list)):
        return (mpmath.mpc(reference_direction),)
    assert len(reference_direction) == scene.n, \
        f"Need one reference direction per variable, got {len(reference_direction)}"
    return tuple(None if r is None else mpmath.mpc(r) for r in reference_direction)


def _check_stokes(crit, t, points, tolerances):
    theta = mpmath.arg(t)
    for point in points:
        diff = crit.z - point.z
        if point.index == crit.index or abs(diff) < tolerances.tol_dedup:
            continue
        if landscape.angle_distance(theta, mpmath.arg(diff)) < tolerances.tol_angle:
            raise errors.StokesCollision(
                f"Arg t = {mpmath.nstr(theta, 10)} lies on the Stokes ray from point {crit.index} "
                f"to point {point.index}", crit=crit.index, partner=point.index, theta=theta)


def trace_thimble(scene, crit, t, cutoff=DEFAULT_CUTOFF, tolerances=DEFAULT_TOLERANCES,
                  allow_stokes=False, reference_direction=None, points=None):
    """Traces the thimble of crit at phase t until Re((z_i - f)/t) reaches cutoff."""
    if not crit.morse:
        raise errors.NonMorse(f"Critical point {crit.index} is degenerate", crit=crit.index)
    t = mpmath.mpc(t)
    assert t != 0, "The phase parameter t must be nonzero"
    points = scene_points(scene, tolerances) if points is None else points
    if not allow_stokes:
        _check_stokes(crit, t, points, tolerances)
    r_end = mpmath.sqrt(cutoff)
    components = _component_thimbles(scene, crit, t, r_end, tolerances,
                                     _references(scene, reference_direction), points)

    radii = mpmath.linspace(0, r_end, SAMPLES_PER_BRANCH)
    samples, parameters = [], []
    for side, sign in ((1, -1), (0, 1)):
        ordered = list(reversed(radii)) if sign < 0 else radii[1:]
        for r in ordered:
            x = tuple(component.branches[side].point(r)[0] for component in components)
            samples.append((x, expr_eval(scene.f, x, None, tolerances.eps_branch)))
            parameters.append(sign * r)
    phase = (crit.z / t).imag
    drift = max(abs((value / t).imag - phase) for _, value in samples)
    if drift > tolerances.tol_flow:
        logging.warning(f"Im(f/t) drifts by {mpmath.nstr(drift, 5)} along the thimble of "
                        f"point {crit.index}")

    tail_bound = mpmath.mpf(0)
    for component in components:
        end = sum(abs(branch.density(branch.r_end, t)) for branch in component.branches)
        tail_bound += end * abs(mpmath.exp(component.crit.z / t)) / (2 * component.r_end)
    logging.info(f"Traced thimble of point {crit.index} at t = {mpmath.nstr(t, 8)}, "
                 f"drift {mpmath.nstr(drift, 3)}")
    return ThimbleContour(crit.index, t, tuple(samples), tuple(parameters), tail_bound, drift,
                          components)


def thimble_integral(scene, crit, t, cutoff=DEFAULT_CUTOFF, tolerances=DEFAULT_TOLERANCES,
                     allow_stokes=False, reference_direction=None, trace_t=None, points=None):
    """Integral of e^{f/t} vol over the oriented thimble of crit.

    With trace_t the contour is traced at that phase and integrated at t, which continues the
    same homology class as long as Re(trace_t / t) > 0.
    """
    t = mpmath.mpc(t)
    trace_t = t if trace_t is None else mpmath.mpc(trace_t)
    decay = (trace_t / t).real
    if decay <= 0:
        raise errors.ResurgixError(f"A contour traced at t = {mpmath.nstr(trace_t, 8)} cannot "
                                   f"be integrated at t = {mpmath.nstr(t, 8)}")
    contour = trace_thimble(scene, crit, trace_t, cutoff / decay, tolerances, allow_stokes,
                            reference_direction, points)
    parts = [component.integral(t) for component in contour.components]
    value = mpmath.fprod(part[0] for part in parts)
    tail_bound = mpmath.mpf(0)
    quad_error = mpmath.mpf(0)
    for k, part in enumerate(parts):
        others = mpmath.fprod(abs(p[0]) for m, p in enumerate(parts) if m != k)
        tail_bound += part[1] * others
        quad_error += part[2] * others
    if tail_bound > tolerances.tol_quad * abs(value):
        raise errors.TailDominates(f"Tail bound {mpmath.nstr(tail_bound, 5)} exceeds "
                                   f"{tolerances.tol_quad} of |I| = {mpmath.nstr(abs(value), 5)}",
                                   crit=crit.index, tail_bound=tail_bound, value=value)
    logging.info(f"Thimble integral of point {crit.index} at t = {mpmath.nstr(t, 8)}: "
                 f"{mpmath.nstr(value, 15)}")
    return ThimbleIntegral(crit.index, t, value, tail_bound, quad_error)


def _integral_item(scene, cutoff, tolerances, points, item):
    crit, t = item
    return thimble_integral(scene, crit, t, cutoff, tolerances, points=points)


def thimble_integrals(scene, requests, cutoff=DEFAULT_CUTOFF, tolerances=DEFAULT_TOLERANCES):
    """Thimble integrals for a list of (critical point, t) pairs on the worker pool."""
    points = scene_points(scene, tolerances)
    return parallel_map(functools.partial(_integral_item, scene, cutoff, tolerances, points),
                        list(requests))


def _valley_data(scene):
    """(degree, leading coefficient, centroid) of a polynomial one-variable exponent."""
    symbol = sympy.Symbol(scene.variables[0])
    try:
        poly = sympy.Poly(sympy.expand(scene.f.to_sympy()), symbol)
    except sympy.PolynomialError:
        raise errors.ResurgixError(f"Valleys are only classified for polynomial exponents, "
                                   f"not {scene.f}", f=str(scene.f))
    degree = poly.degree()
    if degree < 2:
        raise errors.ResurgixError(f"Exponent {scene.f} has no Morse critical points")
    coeffs = [mpmath.mpc(complex(sympy.N(c, mpmath.mp.dps))) for c in poly.all_coeffs()]
    return degree, coeffs[0], -coeffs[1] / (degree * coeffs[0])


def valley_index(x, theta, valley):
    """Index k of the sector of fastest decay of e^{f/t}, Arg t = theta, that contains x."""
    degree, lead, centroid = valley
    phase = mpmath.arg(x - centroid)
    k = (degree * phase - (theta + mpmath.pi - mpmath.arg(lead))) / (2 * mpmath.pi)
    return int(mpmath.nint(k)) % degree


def _branch_distance(branch, target):
    radii = mpmath.linspace(0, branch.r_end, SAMPLES_PER_BRANCH)
    return min(abs(branch.point(r)[0] - target) for r in radii)


def _stokes_jump_1d(scene, points, crit, theta, tolerances, moduli):
    """Jumps of the thimble of crit across theta in a one-variable scene: {partner index: n}."""
    valley = _valley_data(scene)
    partners = [p for p in points
                if p.index != crit.index and abs(crit.z - p.z) > tolerances.tol_dedup
                and landscape.angle_distance(mpmath.arg(crit.z - p.z), theta) < tolerances.tol_angle]
    if not partners:
        raise errors.ResurgixError(f"Angle {mpmath.nstr(theta, 10)} is not a Stokes ray of point "
                                   f"{crit.index}", crit=crit.index, theta=theta)
    modulus = max(moduli)
    r_end = mpmath.sqrt(DEFAULT_CUTOFF)

    def classify(eps):
        below, = _component_thimbles(scene, crit, modulus * mpmath.expj(theta - eps), r_end,
                                     tolerances, (None,), points)
        above, = _component_thimbles(scene, crit, modulus * mpmath.expj(theta + eps), r_end,
                                     tolerances, (below.v,), points)
        counts = {p.index: 0 for p in partners}
        for low, high in zip(below.branches, above.branches):
            before = valley_index(low.point(low.r_end)[0], theta - eps, valley)
            after = valley_index(high.point(high.r_end)[0], theta + eps, valley)
            if before != after:
                nearest = min(partners, key=lambda p: _branch_distance(low, p.x[0]))
                counts[nearest.index] += 1
        return counts, below, above

    eps = tolerances.eps_stokes
    counts, below, above = classify(eps)
    halved, below_h, above_h = classify(eps / 2)
    if halved != counts:
        logging.warning(f"Valley counts {counts} and {halved} differ at eps = {eps}; halving again")
        eps /= 2
        counts, below, above = halved, below_h, above_h
        halved, _, _ = classify(eps / 2)
        if halved != counts:
            raise errors.AmbiguousValley(f"Valley classification of point {crit.index} at "
                                         f"theta = {mpmath.nstr(theta, 10)} is unstable",
                                         crit=crit.index, counts=[counts, halved])

    partner_refs = {p.index: thimble_direction(p.hessian[0, 0], modulus * mpmath.expj(theta - eps))
                    for p in partners}
    rows, rhs, deltas = [], [], []
    for m in moduli:
        t_eval = m * mpmath.expj(theta)
        delta = above.integral(t_eval)[0] - below.integral(t_eval)[0]
        values = []
        for p in partners:
            thimble, = _component_thimbles(scene, p, t_eval, r_end, tolerances,
                                           (partner_refs[p.index],), points)
            values.append(thimble.integral(t_eval)[0])
        weight = 1 / abs(delta) if delta != 0 else mpmath.mpf(1)
        rows.append([float((weight * v).real) for v in values])
        rows.append([float((weight * v).imag) for v in values])
        rhs.extend([float((weight * delta).real), float((weight * delta).imag)])
        deltas.append((delta, values))
    # minimum-norm solution: partners related by a symmetry have proportional integrals
    solution = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=1e-8)[0]
    estimates = {p.index: float(solution[k]) for k, p in enumerate(partners)}

    jumps = {}
    for p in partners:
        rounded = int(round(estimates[p.index]))
        sign = 1 if (rounded or estimates[p.index]) >= 0 else -1
        jumps[p.index] = sign * counts[p.index]
        if abs(rounded) != counts[p.index]:
            logging.warning(f"Point {crit.index} -> {p.index}: {counts[p.index]} tails change "
                            f"valley but the integrals suggest {estimates[p.index]:.6g}")
    residual = mpmath.mpf(0)
    for delta, values in deltas:
        predicted = mpmath.fsum(jumps[p.index] * v for p, v in zip(partners, values))
        scale = abs(delta) if delta != 0 else mpmath.mpf(1)
        residual = max(residual, abs(delta - predicted) / scale)
    return jumps, estimates, residual, float(eps)


def stokes_jump(scene, i, theta, tolerances=DEFAULT_TOLERANCES, moduli=DEFAULT_MODULI, points=None):
    """Stokes jumps of the thimble of point i across the ray Arg t = theta.

    For each partner j on the ray, |n_ij| counts the tails that change valley between
    theta - eps and theta + eps, and the sign makes I_i(theta+) - I_i(theta-) = sum_j n_ij I_j
    hold at |t| in `moduli`; the worst relative residual of that identity is recorded.
    """
    points = scene_points(scene, tolerances) if points is None else points
    crit = points[i]
    theta = landscape.normalized_angle(mpmath.mpf(theta))
    if scene.n == 1:
        jumps, estimates, residual, eps = _stokes_jump_1d(scene, points, crit, theta, tolerances,
                                                          moduli)
    else:
        jumps, estimates, residual, eps = _stokes_jump_separable(scene, points, crit, theta,
                                                                 tolerances, moduli)
    logging.info(f"Stokes jumps of point {i} at theta = {mpmath.nstr(theta, 10)}: {jumps}")
    return StokesJump(i, theta, jumps, estimates, residual, eps)


def _stokes_jump_separable(scene, points, crit, theta, tolerances, moduli):
    """Jumps of a product thimble: only partners differing in one coordinate can jump."""
    jumps, estimates, residual, eps = {}, {}, mpmath.mpf(0), tolerances.eps_stokes
    by_component = {}
    for p in points:
        diff = crit.z - p.z
        if p.index == crit.index or abs(diff) < tolerances.tol_dedup:
            continue
        if landscape.angle_distance(mpmath.arg(diff), theta) >= tolerances.tol_angle:
            continue
        differing = [k for k in range(scene.n) if abs(p.x[k] - crit.x[k]) > tolerances.tol_dedup]
        if len(differing) == 1:
            by_component.setdefault(differing[0], []).append(p)
        else:
            logging.info(f"Point {p.index} differs from {crit.index} in {len(differing)} "
                         f"coordinates; no thimble connects them")
            jumps[p.index] = 0
    if not by_component and not jumps:
        raise errors.ResurgixError(f"Angle {mpmath.nstr(theta, 10)} is not a Stokes ray of point "
                                   f"{crit.index}", crit=crit.index, theta=theta)
    for k, partners in by_component.items():
        sub = component_scenes(scene)[k]
        coordinates = [crit.x[k]] + _coordinates(points, k, crit.x[k], tolerances.tol_dedup)
        sub_points = [landscape.make_critical_point(sub.f, (c,), tolerances, index)
                      for index, c in enumerate(coordinates)]
        sub_jumps, sub_estimates, sub_residual, sub_eps = _stokes_jump_1d(
            sub, sub_points, sub_points[0], theta, tolerances, moduli)
        for p in partners:
            index = min(range(len(coordinates)), key=lambda m: abs(coordinates[m] - p.x[k]))
            jumps[p.index] = sub_jumps.get(index, 0)
            estimates[p.index] = sub_estimates.get(index, mpmath.mpf(0))
        residual = max(residual, sub_residual)
        eps = min(eps, sub_eps)
    return jumps, estimates, residual, eps


def count_stokes_jump(scene, i, j, theta, tolerances=DEFAULT_TOLERANCES, moduli=DEFAULT_MODULI,
                      points=None):
    """The Stokes index n_ij of the pair (i, j) on the ray Arg t = theta."""
    jump = stokes_jump(scene, i, theta, tolerances, moduli, points)
    if j not in jump.partners:
        raise errors.ResurgixError(f"Point {j} is not on the Stokes ray "
                                   f"{mpmath.nstr(theta, 10)} of point {i}", pair=[i, j])
    return jump.partners[j]


def _level_density(component, s):
    """Sum over both branches of |t| / |f'(x)| at the level (z_i - f)/t = s."""
    r = mpmath.sqrt(s)
    return mpmath.fsum(abs(branch.point(r)[1]) / (2 * r) for branch in component.branches)


def level_volume(scene, crit, t, s_grid, tolerances=DEFAULT_TOLERANCES, points=None):
    """Volumes of the level sets (z_i - f)/t = s of the thimble, with a fit of log V against s."""
    s_grid = [mpmath.mpf(s) for s in s_grid]
    if not s_grid:
        return LevelVolume(pd.DataFrame(columns=['s', 'volume', 'log_volume']))
    assert all(s > 0 for s in s_grid), "Level parameters must be positive"
    if scene.n > 2:
        raise errors.ResurgixError("Level volumes are computed for one or two variables only",
                                   n=scene.n)
    cutoff = max(DEFAULT_CUTOFF, 1.2 * max(s_grid))
    contour = trace_thimble(scene, crit, t, cutoff, tolerances, points=points)
    components = contour.components
    volumes = []
    for s in s_grid:
        if len(components) == 1:
            volumes.append(_level_density(components[0], s))
        else:
            volumes.append(mpmath.quad(lambda sigma, s=s: _level_density(components[0], sigma)
                                       * _level_density(components[1], s - sigma), [0, s / 2, s]))
    table = pd.DataFrame({'s': [float(s) for s in s_grid], 'volume': [float(v) for v in volumes],
                          'log_volume': [float(mpmath.log(v)) for v in volumes]})
    if len(s_grid) < 2:
        return LevelVolume(table)
    slope, intercept = np.polyfit(table['s'], table['log_volume'], 1)
    logging.info(f"Level volumes of point {crit.index}: log V ~ {slope:.4g} s + {intercept:.4g}")
    return LevelVolume(table, float(slope), float(intercept))


def _continued_sign(second_derivative, radius, theta0, theta1):
    """Sign relating the canonical +v direction at theta1 to the one continued from theta0."""
    start = thimble_direction(second_derivative, radius * mpmath.expj(theta0))
    v = start
    steps = max(1, int(GAUGE_STEPS * abs(theta1 - theta0) / (2 * mpmath.pi)))
    for step in range(1, steps + 1):
        theta = theta0 + (theta1 - theta0) * step / steps
        v = thimble_direction(second_derivative, radius * mpmath.expj(theta), v)
    canonical = thimble_direction(second_derivative, radius * mpmath.expj(theta1))
    return 1 if abs(v - canonical) < abs(v + canonical) else -1


def _point_sign(scene, point, radius, theta0, theta1, tolerances):
    sign = 1
    for k, sub in enumerate(component_scenes(scene)):
        if scene.n == 1:
            second = point.hessian[0, 0]
        else:
            second = landscape.make_critical_point(sub.f, (point.x[k],), tolerances).hessian[0, 0]
        sign *= _continued_sign(second, radius, theta0, theta1)
    return sign


def valley_monodromy(scene, t_radius=DEFAULT_MODULI[0], tolerances=DEFAULT_TOLERANCES, points=None):
    """Monodromy of the thimble basis around the circle |t| = t_radius.

    Starting in the widest gap between Stokes rays, each ray contributes I + N with the
    numerically counted jumps (expressed in the continued orientations), and the final gauge
    compares the continued orientations with the canonical ones.
    """
    points = scene_points(scene, tolerances) if points is None else points
    size = len(points)
    rays = landscape.stokes_rays(points, tolerances, allow_coincident=True).rays
    if not rays:
        identity = np.eye(size, dtype=int)
        return ValleyMonodromy(mpmath.mpf(0), (), (), identity, (1,) * size, identity)
    angles = sorted(ray.theta for ray in rays)
    gaps = [(angles[(k + 1) % len(angles)] - angles[k]) % (2 * mpmath.pi) or 2 * mpmath.pi
            for k in range(len(angles))]
    widest = max(range(len(gaps)), key=lambda k: gaps[k])
    theta0 = angles[widest] + gaps[widest] / 2
    ordered = sorted(rays, key=lambda ray: (ray.theta - theta0) % (2 * mpmath.pi))

    product = np.eye(size, dtype=int)
    jumps = []
    cache = {}
    eps = tolerances.eps_stokes
    for ray in ordered:
        theta = theta0 + (ray.theta - theta0) % (2 * mpmath.pi)
        matrix = np.eye(size, dtype=int)
        for i, j in ray.pairs:
            if i not in cache:
                cache[i] = stokes_jump(scene, i, ray.theta, tolerances, (t_radius,), points)
            n = cache[i].partners.get(j, 0)
            s_i = _point_sign(scene, points[i], t_radius, theta0, theta - eps, tolerances)
            s_j = _point_sign(scene, points[j], t_radius, theta0, theta - eps, tolerances)
            matrix[i, j] += n * s_i * s_j
        cache.clear()
        jumps.append(matrix)
        product = matrix @ product
    gauge = tuple(_point_sign(scene, p, t_radius, theta0, theta0 + 2 * mpmath.pi, tolerances)
                  for p in points)
    monodromy = np.diag(gauge) @ product
    logging.info(f"Valley monodromy over {len(rays)} rays, gauge {gauge}")
    return ValleyMonodromy(theta0, tuple(ray.theta for ray in ordered), tuple(jumps), product,
                           gauge, monodromy)
