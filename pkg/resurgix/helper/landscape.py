"""Critical points of holomorphic exponents and the Stokes-ray geometry of their values."""
import dataclasses
import functools
import itertools
import logging

import mpmath
import numpy as np

from resurgix.helper import errors
from resurgix.helper.expressions import expr_eval, gradient_hessian
from resurgix.helper.parallel import parallel_map
from resurgix.helper.precision import DEFAULT_TOLERANCES

MAX_NEWTON_ITERATIONS = 60
MAX_SEEDS = 400
ROUND_SIZE = 32


@dataclasses.dataclass(frozen=True, eq=False)
class CriticalPoint:
    x: tuple
    z: mpmath.mpc
    hessian: mpmath.matrix
    hess_det: mpmath.mpc
    morse: bool
    index: int = -1

    def to_json(self):
        return {'index': self.index, 'x': list(self.x), 'z': self.z,
                'hess_det': self.hess_det, 'morse': self.morse}


@dataclasses.dataclass(frozen=True)
class StokesRay:
    theta: mpmath.mpf
    pairs: tuple
    generic: bool

    def to_json(self):
        return {'theta': self.theta, 'pairs': [list(pair) for pair in self.pairs],
                'generic': self.generic}


@dataclasses.dataclass(frozen=True)
class StokesRaySet:
    rays: tuple
    skipped: tuple = ()

    def angles(self):
        return [ray.theta for ray in self.rays]

    def distance_to_rays(self, theta):
        """Angular distance from theta to the nearest ray (inf without rays)."""
        if not self.rays:
            return mpmath.inf
        return min(angle_distance(theta, ray.theta) for ray in self.rays)

    def ray_for_pair(self, i, j):
        for ray in self.rays:
            if (i, j) in ray.pairs:
                return ray
        return None

    def to_json(self):
        return {'rays': list(self.rays), 'coincident_pairs': [list(p) for p in self.skipped]}


def angle_distance(a, b):
    """Distance between two angles on the circle."""
    d = mpmath.fmod(mpmath.mpf(a) - mpmath.mpf(b), 2 * mpmath.pi)
    d = abs(d)
    return min(d, 2 * mpmath.pi - d)


def normalized_angle(theta):
    theta = mpmath.fmod(theta, 2 * mpmath.pi)
    if theta < 0:
        theta += 2 * mpmath.pi
    return theta


def _norm(v):
    return mpmath.sqrt(mpmath.fsum(abs(c) ** 2 for c in v))


def seed_grid(scene):
    """Seeds on a regular grid over the seed box (real x imaginary per variable)."""
    axes = []
    for lo, hi in scene.seed_box:
        reals = mpmath.linspace(lo.real, hi.real, scene.seeds_per_axis)
        imags = mpmath.linspace(lo.imag, hi.imag, scene.seeds_per_axis)
        axes.append([mpmath.mpc(re, im) for re in reals for im in imags])
    seeds = list(itertools.product(*axes))
    if len(seeds) > MAX_SEEDS:
        rng = np.random.default_rng(0)
        chosen = sorted(rng.choice(len(seeds), MAX_SEEDS, replace=False))
        seeds = [seeds[k] for k in chosen]
    return seeds


def _deflation_factor(x, step, found):
    """1 - d/d(step) log m(x) for m(x) = prod_r (1/|x - r|^2 + 1)."""
    derivative = mpmath.mpf(0)
    for root in found:
        diff = [a - b for a, b in zip(x, root)]
        dist2 = mpmath.fsum(abs(c) ** 2 for c in diff)
        if dist2 == 0:
            continue
        directional = 2 * mpmath.fsum((mpmath.conj(c) * s).real for c, s in zip(diff, step))
        derivative += -directional / dist2 ** 2 / (1 / dist2 + 1)
    return 1 - derivative


def newton_from_seed(f, seed, found=(), tolerances=DEFAULT_TOLERANCES):
    """Damped, deflated Newton iteration on grad f = 0 from one seed.

    Returns the converged point or raises NoConvergence.
    """
    x = [mpmath.mpc(c) for c in seed]
    for iteration in range(MAX_NEWTON_ITERATIONS):
        _, gradient, hessian = gradient_hessian(f, x, tolerances.eps_branch)
        residual = _norm(gradient)
        if residual < tolerances.tol_newton:
            logging.debug(f"Seed {seed} converged after {iteration} iterations")
            return tuple(x)
        try:
            step = mpmath.lu_solve(hessian, mpmath.matrix([-g for g in gradient]))
        except ZeroDivisionError:
            raise errors.NoConvergence("Singular Hessian during Newton iteration",
                                       seed=list(seed), iteration=iteration)
        step = [step[k] for k in range(len(x))]
        factor = _deflation_factor(x, step, found)
        if factor != 0:
            step = [s / factor for s in step]
        damping = mpmath.mpf(1)
        for _ in range(30):
            trial = [a + damping * s for a, s in zip(x, step)]
            try:
                _, trial_gradient, _ = gradient_hessian(f, trial, tolerances.eps_branch)
            except errors.BranchPointProximity:
                trial_gradient = None
            if trial_gradient is not None and _norm(trial_gradient) < residual:
                break
            damping /= 2
        x = trial
    raise errors.NoConvergence(f"Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations",
                               seed=list(seed))


def _try_seed(f, found, tolerances, seed):
    try:
        return newton_from_seed(f, seed, found, tolerances)
    except errors.ResurgixError as err:
        logging.debug(f"Seed {seed} skipped: {err.message}")
        return None


def _is_duplicate(x, points, tol):
    return any(_norm([a - b for a, b in zip(x, p)]) < tol for p in points)


def make_critical_point(f, x, tolerances=DEFAULT_TOLERANCES, index=-1):
    """Builds a CriticalPoint at x, re-verifying the gradient with independent evaluations."""
    n = len(x)
    for k in range(n):
        partial = expr_eval(f, x, tuple(1 if j == k else 0 for j in range(n)), tolerances.eps_branch)
        if abs(partial) >= tolerances.tol_newton:
            raise errors.NoConvergence(f"Gradient component {k} is {mpmath.nstr(abs(partial), 5)}",
                                       x=list(x))
    z, _, hessian = gradient_hessian(f, x, tolerances.eps_branch)
    hess_det = mpmath.det(hessian)
    morse = abs(hess_det) > tolerances.tol_degenerate
    if not morse:
        logging.warning(f"Degenerate critical point at {[mpmath.nstr(c, 8) for c in x]}")
    return CriticalPoint(tuple(x), z, hessian, hess_det, morse, index)


def find_critical_points(scene, tolerances=DEFAULT_TOLERANCES):
    """Multi-start deflated Newton over the seed grid of a scene.

    Seeds run in rounds; points found in earlier rounds deflate later ones. The result is
    sorted by critical value, then location, and deduplicated within tol_dedup.
    """
    seeds = seed_grid(scene)
    logging.info(f"Searching for critical points of {scene.f} from {len(seeds)} seeds")
    found = []
    for start in range(0, len(seeds), ROUND_SIZE):
        batch = seeds[start:start + ROUND_SIZE]
        results = parallel_map(functools.partial(_try_seed, scene.f, tuple(found), tolerances), batch)
        for x in results:
            if x is None:
                continue
            if not scene.in_box(x):
                logging.warning(f"Newton exit {[mpmath.nstr(c, 8) for c in x]} lies outside the "
                                f"search box and is discarded")
                continue
            if not _is_duplicate(x, found, tolerances.tol_dedup):
                found.append(x)

    points = []
    for x in found:
        try:
            points.append(make_critical_point(scene.f, x, tolerances))
        except errors.NoConvergence as err:
            logging.warning(f"Discarding point that failed re-verification: {err.message}")
    points.sort(key=lambda p: (float(p.z.real), float(p.z.imag),
                               [(float(c.real), float(c.imag)) for c in p.x]))
    points = [dataclasses.replace(p, index=k) for k, p in enumerate(points)]
    for point in points:
        if not point.morse:
            logging.warning(f"Critical point {point.index} is degenerate "
                            f"(|det H| = {mpmath.nstr(abs(point.hess_det), 5)})")
    logging.info(f"Found {len(points)} critical points")
    return points


def stokes_rays(points, tolerances=DEFAULT_TOLERANCES, allow_coincident=False):
    """All Arg(z_i - z_j), i != j, grouped by slope.

    Pairs with coincident values raise CoincidentValues unless allow_coincident is set, in
    which case they are skipped and listed in `skipped`.
    """
    entries = []
    skipped = []
    for a, b in itertools.permutations(points, 2):
        diff = a.z - b.z
        if abs(diff) < tolerances.tol_dedup:
            if not allow_coincident:
                raise errors.CoincidentValues(f"Critical points {a.index} and {b.index} share a value",
                                              pair=[a.index, b.index])
            skipped.append((a.index, b.index))
            continue
        entries.append((normalized_angle(mpmath.arg(diff)), abs(diff), (a.index, b.index)))
    entries.sort(key=lambda e: (e[0], e[1]))

    groups = []
    for theta, dist, pair in entries:
        if groups and angle_distance(theta, groups[-1][0][0]) < tolerances.tol_angle:
            groups[-1].append((theta, dist, pair))
        else:
            groups.append([(theta, dist, pair)])
    if len(groups) > 1 and angle_distance(groups[0][0][0], groups[-1][0][0]) < tolerances.tol_angle:
        groups[0] = groups.pop() + groups[0]

    rays = []
    for group in groups:
        group.sort(key=lambda e: e[1])
        pairs = tuple(e[2] for e in group)
        members = {index for pair in pairs for index in pair}
        generic = len(pairs) < 2 and len(members) < 3
        rays.append(StokesRay(group[0][0], pairs, generic))
    rays.sort(key=lambda ray: ray.theta)
    logging.info(f"{len(rays)} Stokes rays from {len(points)} critical values")
    return StokesRaySet(tuple(rays), tuple(skipped))


def genericity_check(points, tolerances=DEFAULT_TOLERANCES):
    """Collinear triples of critical values; an empty list means generic position."""
    triples = []
    for a, b, c in itertools.combinations(points, 3):
        u = b.z - a.z
        v = c.z - a.z
        if abs(u) < tolerances.tol_dedup or abs(v) < tolerances.tol_dedup:
            triples.append((a.index, b.index, c.index))
            continue
        angle = abs(mpmath.arg(v / u))
        if min(angle, mpmath.pi - angle) < tolerances.tol_angle:
            triples.append((a.index, b.index, c.index))
    return triples


def points_from_values(values):
    """Bare CriticalPoints carrying only critical values, for ray geometry on given spectra."""
    return [CriticalPoint((), mpmath.mpc(z), None, mpmath.mpc(1), True, k)
            for k, z in enumerate(values)]
