"""Borel transform, Padé continuation and lateral Laplace sums.

A germ holds b_k = c_k / k!, the Taylor coefficients of B(s) = sum_k b_k s^k at its critical
value. Continuation opens the cut beyond a singularity s_n with s = 4 s_n zeta / (1 + zeta)^2,
which maps the unit disc onto the plane cut along the ray from s_n outward, and continues a
diagonal Padé approximant in zeta. Crossing the cut takes zeta outside the unit disc.

Stokes constants use B_i = (alpha / 2 pi i) log(s - s*) B_j(s - s*) + holomorphic, so alpha is
(B_cw - B_ccw) / B_j on the cut, the limits taken from its clockwise and counterclockwise
sides. The Laplace sums then satisfy S_{theta-} - S_{theta+} = alpha e^{-s*/t} S_j.
"""
import dataclasses
import logging

import mpmath
from mpmath.libmp import NoConvergence
import numpy as np
import pandas as pd

from resurgix.helper import errors, landscape
from resurgix.helper.precision import DEFAULT_TOLERANCES, HIGH_PRECISION, at_least
from resurgix.helper.series import FormalSeries

MIN_DETECTION_ORDER = 12
FROISSART_RESIDUE = 1e-10
LATERAL_ANGLE = 0.3
STOKES_RADII = (0.15, 0.6)
STOKES_SAMPLES = 8
LAPLACE_EXTENT = 50
LAPLACE_PIECES = 10
STEP_FRACTION = 0.1


@dataclasses.dataclass
class BorelGerm:
    base_value: mpmath.mpc
    taylor: list
    pade_cache: dict = dataclasses.field(default_factory=dict, repr=False)

    @property
    def K(self):
        return len(self.taylor) - 1

    def pade(self, degree, center=None):
        """Diagonal approximant [degree/degree] in s, or in zeta when a cut opens at `center`.

        Returns (numerator, denominator) coefficient lists, lowest order first.
        """
        assert 0 < degree <= self.K // 2, \
            f"Padé degree {degree} is outside 1..{self.K // 2} for a germ of order {self.K}"
        key = (degree, None if center is None else mpmath.nstr(center, 40))
        if key not in self.pade_cache:
            if center is None:
                coeffs = self.taylor
            else:
                coeffs = _conformal_coefficients(self.taylor, center)
            self.pade_cache[key] = _pade(coeffs, degree, degree)
        return self.pade_cache[key]

    def to_json(self):
        return {'base_value': self.base_value, 'taylor': list(self.taylor),
                'pade_degrees': sorted({degree for degree, _ in self.pade_cache})}


@dataclasses.dataclass(frozen=True)
class SingularityReport:
    location: mpmath.mpc
    confidence: float
    pole_cluster: tuple

    def to_json(self):
        return {'location': self.location, 'confidence': self.confidence,
                'pole_cluster': list(self.pole_cluster)}


@dataclasses.dataclass(frozen=True)
class StokesConstant:
    alpha_raw: mpmath.mpc
    alpha_int: int
    residual: float

    def to_json(self):
        return {'alpha_raw': self.alpha_raw, 'alpha_int': self.alpha_int,
                'residual': self.residual}


def _precision_for(K):
    return HIGH_PRECISION if K >= 30 else mpmath.mp.prec


def borel(series, base_value=0):
    """The germ of the Borel transform of a series without prefactor."""
    if series.mu != 0:
        raise errors.FractionalPrefactor(
            f"Borel transform of a series with prefactor hbar^{series.mu} is not supported",
            mu=series.mu)
    return BorelGerm(mpmath.mpc(base_value), series.borel_coefficients())


def _trim(coeffs):
    """Drops trailing coefficients that are rounding noise."""
    coeffs = [mpmath.mpc(c) for c in coeffs]
    scale = max(abs(c) for c in coeffs)
    if scale == 0:
        return [mpmath.mpc(0)]
    tiny = mpmath.ldexp(scale, -(3 * mpmath.mp.prec) // 4)
    while len(coeffs) > 1 and abs(coeffs[-1]) <= tiny:
        coeffs.pop()
    return coeffs


def _denominator_rank(coeffs, L, M):
    """Numerical rank of the Toeplitz system a_{L+i-j} for the Padé denominator."""
    system = mpmath.matrix(M, M)
    for i in range(M):
        for j in range(M):
            k = L + i - j
            system[i, j] = coeffs[k] if k >= 0 else 0
    values = mpmath.svd(system, compute_uv=False)
    values = [abs(values[k]) for k in range(values.rows)]
    largest = max(values)
    if largest == 0:
        return 0
    tiny = mpmath.ldexp(largest, -(3 * mpmath.mp.prec) // 4)
    return sum(1 for value in values if value > tiny)


def _pade(coeffs, L, M):
    """[L/M] approximant; the denominator degree drops while the Toeplitz system is singular."""
    rank = _denominator_rank(coeffs, L, M)
    while 0 < rank < M:
        logging.debug(f"Padé [{L}/{M}] is rank deficient, reducing to [{L}/{rank}]")
        M = rank
        rank = _denominator_rank(coeffs, L, M)
    if rank == 0:
        return _trim(coeffs[:L + 1]), [mpmath.mpc(1)]
    p, q = mpmath.pade(list(coeffs[:L + M + 1]), L, M)
    return _trim(p), _trim(q)


def _conformal_coefficients(taylor, center):
    """Taylor coefficients in zeta of B(4 s_n zeta / (1 + zeta)^2)."""
    K = len(taylor) - 1
    inner = FormalSeries([0] + [4 * center * (-1) ** (k + 1) * k for k in range(1, K + 1)])
    return list(FormalSeries(taylor).compose(inner).coeffs)


def _rational(p, q, a, b=1):
    """p(a/b) / q(a/b), evaluated through 1/z when |a/b| > 1."""
    try:
        if abs(a) <= abs(b):
            z = mpmath.mpc(a) / b
            return mpmath.polyval(p[::-1], z) / mpmath.polyval(q[::-1], z)
        w = mpmath.mpc(b) / a
        ratio = mpmath.polyval(p, w) / mpmath.polyval(q, w)
        return ratio * mpmath.power(w, len(q) - len(p))
    except ZeroDivisionError:
        raise errors.SingularityOnPath("The continuation reached a pole of the approximant")


def _degrees(germ):
    m = germ.K // 2
    return m, m - 1


def _value(germ, degree, s, center, root):
    if degree == 0:
        return mpmath.polyval(germ.taylor[::-1], s)
    p, q = germ.pade(degree, center)
    if center is None:
        return _rational(p, q, s)
    return _rational(p, q, 1 - root, 1 + root)


def _segment_distance(a, b, point):
    d = b - a
    if d == 0:
        return abs(point - a)
    u = ((point - a) * mpmath.conj(d)).real / abs(d) ** 2
    u = min(mpmath.mpf(1), max(mpmath.mpf(0), u))
    return abs(a + u * d - point)


def _check_path(path, singularities, tolerances):
    for s in singularities:
        radius = tolerances.tol_sing_rel * abs(s)
        for a, b in zip(path, path[1:]):
            if _segment_distance(a, b, s) < radius:
                raise errors.SingularityOnPath(
                    f"Path segment {mpmath.nstr(a, 6)} -> {mpmath.nstr(b, 6)} passes within "
                    f"{mpmath.nstr(radius, 3)} of the singularity {mpmath.nstr(s, 8)}",
                    singularity=s)


def _track_root(path, center):
    """sqrt(1 - s / center) followed by continuity along the polyline, equal to 1 at s = 0."""
    root = mpmath.mpc(1)
    for a, b in zip(path, path[1:]):
        length = abs(b - a)
        u = mpmath.mpf(0)
        while length > 0 and u < 1:
            s = a + u * (b - a)
            u = min(mpmath.mpf(1), u + STEP_FRACTION * abs(s - center) / length)
            candidate = mpmath.sqrt(1 - (a + u * (b - a)) / center)
            root = candidate if abs(candidate - root) <= abs(candidate + root) else -candidate
    return root


def _continue(germ, path, center):
    """Value at the end of the path and the mismatch between Padé degrees m and m - 1."""
    path = [mpmath.mpc(s) for s in path]
    if path[0] != 0:
        path.insert(0, mpmath.mpc(0))
    root = None if center is None else _track_root(path, center)
    top, lower = _degrees(germ)
    value = _value(germ, top, path[-1], center, root)
    if lower < 1:
        return value, mpmath.mpf(0)
    other = _value(germ, lower, path[-1], center, root)
    mismatch = abs(value - other) / max(abs(value), mpmath.ldexp(1, -mpmath.mp.prec // 2))
    return value, mismatch


def _nearest(reports):
    if not reports:
        return None
    return min(reports, key=lambda report: abs(report.location)).location


def continue_to(germ, path, tolerances=DEFAULT_TOLERANCES, center=None):
    """Analytic continuation of the germ along a polyline starting at s = 0.

    The cut is opened at `center`, by default the nearest detected singularity.
    """
    with at_least(_precision_for(germ.K)):
        reports = detect_singularities(germ, tolerances) if germ.K >= MIN_DETECTION_ORDER else []
        singularities = [report.location for report in reports]
        if center is None:
            center = _nearest(reports)
        elif center not in singularities:
            singularities.append(mpmath.mpc(center))
        _check_path([mpmath.mpc(0)] + [mpmath.mpc(s) for s in path], singularities, tolerances)
        value, mismatch = _continue(germ, path, center)
        logging.debug(f"Continued to {mpmath.nstr(mpmath.mpc(path[-1]), 8)}, degree mismatch "
                      f"{mpmath.nstr(mismatch, 3)}")
        if mismatch > tolerances.tol_cont:
            raise errors.ContinuationUnstable(
                f"Padé degrees disagree by {mpmath.nstr(mismatch, 3)} at the end of the path",
                mismatch=mismatch, tol_cont=tolerances.tol_cont)
        return value


def _pole_rows(germ, degree):
    """(pole, residue, froissart) for each pole of the diagonal approximant in s."""
    p, q = germ.pade(degree)
    if len(q) < 2:
        return []
    try:
        poles = mpmath.polyroots(q[::-1], maxsteps=200, extraprec=mpmath.mp.prec)
        zeros = mpmath.polyroots(p[::-1], maxsteps=200, extraprec=mpmath.mp.prec) \
            if len(p) > 1 else []
    except NoConvergence:
        logging.warning(f"Root finding for the degree {degree} approximant did not converge")
        return []
    dq = [k * q[k] for k in range(1, len(q))]
    scale = max(abs(b) for b in germ.taylor)
    rows = []
    for pole in poles:
        residue = mpmath.polyval(p[::-1], pole) / mpmath.polyval(dq[::-1], pole)
        paired = any(abs(zero - pole) < FROISSART_RESIDUE * (1 + abs(pole)) for zero in zeros)
        froissart = paired or abs(residue) < FROISSART_RESIDUE * scale
        rows.append((mpmath.mpc(pole), residue, froissart))
    return rows


def _detection_degrees(germ):
    m = germ.K // 2
    return [m - 2, m - 1, m]


def pole_table(germ, degrees=None):
    """Poles of the diagonal approximants as a table (degree, re, im, residue)."""
    with at_least(_precision_for(germ.K)):
        if degrees is None:
            degrees = _detection_degrees(germ)
        rows = []
        for degree in degrees:
            for pole, residue, _ in _pole_rows(germ, degree):
                rows.append({'degree': degree, 're': float(pole.real), 'im': float(pole.imag),
                             'residue': float(abs(residue))})
    return pd.DataFrame(rows, columns=['degree', 're', 'im', 'residue'])


def _ratio_refinement(taylor, direction, tolerances):
    """Richardson-accelerated limit of |b_k / b_{k+1}| along a known direction, or None."""
    unit = mpmath.conj(direction) / abs(direction)
    ratios = []
    for k in range(1, len(taylor) - 1):
        if taylor[k + 1] == 0:
            return None
        ratios.append(taylor[k] / taylor[k + 1] * unit)
    if any(abs(r.imag) > tolerances.tol_sing_rel * abs(r) for r in ratios):
        return None
    sequence = [r.real for r in ratios]
    estimate, _ = mpmath.richardson(sequence)
    previous, _ = mpmath.richardson(sequence[:-2])
    return estimate, abs(estimate - previous)


def detect_singularities(germ, tolerances=DEFAULT_TOLERANCES):
    """Singularities of the germ from pole clusters stable across Padé degrees K/2-2 .. K/2."""
    assert germ.K >= MIN_DETECTION_ORDER, \
        f"Singularity detection needs K >= {MIN_DETECTION_ORDER}, germ has K = {germ.K}"
    with at_least(_precision_for(germ.K)):
        degrees = _detection_degrees(germ)
        poles = {degree: [pole for pole, _, froissart in _pole_rows(germ, degree)
                          if not froissart]
                 for degree in degrees}
        candidates = []
        for pole in poles[degrees[-1]]:
            radius = tolerances.tol_sing_rel * abs(pole)
            cluster = [pole]
            for degree in degrees[:-1]:
                if not poles[degree]:
                    break
                match = min(poles[degree], key=lambda other, pole=pole: abs(other - pole))
                if abs(match - pole) > radius:
                    break
                cluster.append(match)
            else:
                spread = max(abs(c - pole) for c in cluster)
                confidence = max(0.0, 1.0 - float(spread / radius))
                candidates.append(SingularityReport(pole, confidence, tuple(cluster)))

        # poles along a cut share the direction of its branch point; keep the nearest
        reports = []
        for candidate in sorted(candidates, key=lambda c: abs(c.location)):
            direction = mpmath.arg(candidate.location)
            if any(landscape.angle_distance(direction, mpmath.arg(r.location))
                   < tolerances.tol_sing_rel for r in reports):
                continue
            reports.append(candidate)

        if reports and (len(reports) == 1 or abs(reports[1].location)
                        > (1 + tolerances.tol_sing_rel) * abs(reports[0].location)):
            reports[0] = _refined(germ, reports[0], tolerances)
    logging.info(f"Detected {len(reports)} singularities: "
                 f"{[mpmath.nstr(r.location, 8) for r in reports]}")
    return reports


def _refined(germ, report, tolerances):
    refinement = _ratio_refinement(germ.taylor, report.location, tolerances)
    if refinement is None:
        return report
    modulus, error = refinement
    spread = max(abs(pole - report.location) for pole in report.pole_cluster)
    if abs(modulus - abs(report.location)) >= tolerances.tol_sing_rel * abs(report.location):
        logging.debug(f"Ratio test {mpmath.nstr(modulus, 8)} disagrees with the Padé poles")
        return report
    if error >= spread:
        return report
    location = modulus * report.location / abs(report.location)
    logging.debug(f"Ratio test refined {mpmath.nstr(report.location, 8)} to "
                  f"{mpmath.nstr(location, 12)} (change estimate {mpmath.nstr(error, 3)})")
    return SingularityReport(location, report.confidence, report.pole_cluster)


def _partner_values(germ_j, points, tolerances):
    reports = detect_singularities(germ_j, tolerances) \
        if germ_j.K >= MIN_DETECTION_ORDER else []
    center = _nearest(reports)
    return [_continue(germ_j, [0, s], center)[0] for s in points]


def extract_stokes(germ_i, s_star, germ_j, tolerances=DEFAULT_TOLERANCES):
    """Stokes constant of germ_i at s_star against the partner germ_j.

    Fits (B_cw - B_ccw)(s* + r e) = alpha B_j(r e) over a log-spaced grid of r, e = s*/|s*|.
    """
    s_star = mpmath.mpc(s_star)
    assert s_star != 0, "A Stokes constant needs a singularity away from the base point"
    unit = s_star / abs(s_star)
    radii = [abs(s_star) * mpmath.mpf(r)
             for r in np.geomspace(STOKES_RADII[0], STOKES_RADII[1], STOKES_SAMPLES)]
    with at_least(_precision_for(max(germ_i.K, germ_j.K))):
        jumps = []
        for r in radii:
            end = (abs(s_star) + r) * unit
            sides = {}
            for sign in (1, -1):
                bend = end * mpmath.expj(sign * LATERAL_ANGLE)
                sides[sign], _ = _continue(germ_i, [0, bend, end], s_star)
            jumps.append(sides[-1] - sides[1])
        partners = _partner_values(germ_j, [r * unit for r in radii], tolerances)

        scale = max(abs(b) for b in germ_j.taylor)
        if max(abs(p) for p in partners) <= mpmath.ldexp(scale, -mpmath.mp.prec // 2):
            raise errors.MissingPartner("The partner germ vanishes along the cut",
                                        s_star=s_star)
        alpha = mpmath.fsum(mpmath.conj(p) * d for p, d in zip(partners, jumps)) / \
            mpmath.fsum(abs(p) ** 2 for p in partners)
        misfit = mpmath.sqrt(mpmath.fsum(abs(d - alpha * p) ** 2 for p, d in zip(partners, jumps)))
        size = mpmath.sqrt(mpmath.fsum(abs(d) ** 2 for d in jumps))
        residual = float(misfit / max(size, mpmath.ldexp(1, -mpmath.mp.prec // 2)))

    if residual > tolerances.tol_fit:
        raise errors.FitUnstable(
            f"Jump across the cut at {mpmath.nstr(s_star, 8)} is not proportional to the "
            f"partner germ (relative residual {residual:.2e})", residual=residual,
            alpha=alpha)
    nearest = int(mpmath.nint(alpha.real))
    alpha_int = nearest if abs(alpha - nearest) < tolerances.tol_snap else None
    logging.info(f"Stokes constant at {mpmath.nstr(s_star, 8)}: {mpmath.nstr(alpha, 10)} "
                 f"(integer {alpha_int}, residual {residual:.2e})")
    return StokesConstant(alpha, alpha_int, residual)


def _ray_distance(theta, point):
    rotated = point * mpmath.expj(-theta)
    if rotated.real <= 0:
        return abs(point)
    return abs(rotated.imag)


def resum_with_bounds(series, theta, t, germ=None, tolerances=DEFAULT_TOLERANCES):
    """Lateral Laplace sum along arg s = theta with its tail bound and quadrature error."""
    theta = mpmath.mpf(theta)
    t = mpmath.mpc(t)
    direction = mpmath.expj(theta)
    decay = (direction / t).real
    if decay <= 0:
        raise errors.NoDecay(f"e^(-s/t) does not decay along arg s = {mpmath.nstr(theta, 8)} "
                             f"for t = {mpmath.nstr(t, 8)}", theta=theta, t=t)
    if germ is None:
        germ = borel(series)
    with at_least(_precision_for(germ.K)):
        reports = detect_singularities(germ, tolerances) if germ.K >= MIN_DETECTION_ORDER else []
        for report in reports:
            if _ray_distance(theta, report.location) < tolerances.tol_sing_rel * \
                    abs(report.location):
                raise errors.RayHitsSingularity(
                    f"The ray arg s = {mpmath.nstr(theta, 8)} passes the singularity "
                    f"{mpmath.nstr(report.location, 8)}", theta=theta,
                    singularity=report.location)
        center = _nearest(reports)
        top, _ = _degrees(germ)

        def transform(s):
            root = None if center is None else mpmath.sqrt(1 - s / center)
            return _value(germ, top, s, center, root)

        def integrand(u):
            s = direction * u
            return mpmath.exp(-s / t) * transform(s)

        extent = LAPLACE_EXTENT / decay
        value, quad_error = mpmath.quad(integrand, mpmath.linspace(0, extent, LAPLACE_PIECES + 1),
                                        error=True)
        scale = direction / t
        value *= scale
        tail = abs(scale) * abs(integrand(extent)) / decay
    if tail > tolerances.tol_quad * abs(value):
        raise errors.TailDominates(
            f"Laplace tail {mpmath.nstr(tail, 3)} exceeds the tolerance relative to "
            f"{mpmath.nstr(value, 8)}", tail=tail, value=value)
    logging.debug(f"Resummed along {mpmath.nstr(theta, 6)} at t = {mpmath.nstr(t, 6)}: "
                  f"tail {mpmath.nstr(tail, 3)}, quadrature error {mpmath.nstr(quad_error, 3)}")
    return value, tail, abs(scale) * quad_error


def resum(series, theta, t, germ=None, tolerances=DEFAULT_TOLERANCES):
    """S_theta(t) = (1/t) int_0^{e^{i theta} inf} e^{-s/t} B(s) ds."""
    value, _, _ = resum_with_bounds(series, theta, t, germ, tolerances)
    return value
