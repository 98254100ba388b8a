"""Stationary-phase series at Morse critical points.

The modified integral (2 pi t)^{-n/2} e^{-z_i/t} I_i(t) has the formal expansion
c_0 + c_1 t + ... computed here. One variable goes through series reversion of
f = z_i - w^2/2; several variables go through Wick contractions in coordinates u with
x = x_i + sqrt(t) L u, L = (-H)^{-1/2}.

Sign convention: c_0 = g(x_i) / sqrt(det(-H)) with the root chosen so that
Arg(c_0 / g(x_i)) lies in (-pi/2, pi/2]; `sign_choice` is -1 when that required flipping the
root the construction produced.
"""
import dataclasses
import functools
import itertools
import logging

import mpmath
import numpy as np

from resurgix.helper import errors, landscape
from resurgix.helper.expressions import as_expression, expr_eval, parse_expression, taylor
from resurgix.helper.parallel import parallel_map
from resurgix.helper.precision import DEFAULT_TOLERANCES
from resurgix.helper.series import FormalSeries

ENVELOPE_EXCESS = 1e6


@dataclasses.dataclass(frozen=True)
class LocalExpansion:
    crit_index: int
    series: FormalSeries
    frame: tuple
    sign_choice: int
    method: str

    def to_json(self):
        return {'crit_index': self.crit_index, 'mu': str(self.series.mu),
                'coeffs': list(self.series.coeffs), 'sign_choice': self.sign_choice,
                'method': self.method}


def _canonical_root(value):
    """The square root of `value` with argument in (-pi/2, pi/2]."""
    return mpmath.sqrt(value)


def _same_sign(candidate, canonical):
    return abs(candidate - canonical) <= abs(candidate + canonical)


def gevrey_fit(series, skip=1):
    """Fits log|c_k / k!| ~ log A + k log B; returns (A, B) or None with too few terms."""
    ks, logs = [], []
    threshold = mpmath.ldexp(1, -mpmath.mp.prec // 2) * max(abs(c) for c in series.coeffs)
    for k, c in enumerate(series.coeffs):
        if k < skip or abs(c) <= threshold:
            continue
        ks.append(k)
        logs.append(float(mpmath.log(abs(c) / mpmath.factorial(k))))
    if len(ks) < 3:
        return None
    slope, intercept = np.polyfit(ks, logs, 1)
    return float(np.exp(intercept)), float(np.exp(slope))


def _check_envelope(series, crit_index):
    """Raises OrderInfeasible when the top coefficients leave the envelope of the lower ones."""
    K = series.K
    if K < 8:
        return
    head = FormalSeries(series.coeffs[:2 * K // 3 + 1])
    fit = gevrey_fit(head)
    if fit is None:
        return
    a, b = fit
    for k in range(len(head), K + 1):
        c = series.coeffs[k]
        envelope = a * mpmath.factorial(k) * mpmath.mpf(b) ** k
        if abs(c) > ENVELOPE_EXCESS * envelope:
            raise errors.OrderInfeasible(
                f"Coefficient {k} of point {crit_index} leaves its Gevrey envelope; raise the "
                f"precision or lower K", crit=crit_index, K=K, precision=mpmath.mp.prec)


def _jet(expr, x, order, tolerances):
    try:
        return taylor(expr, x, order, tolerances.eps_branch)
    except errors.PrecisionExhausted as err:
        raise errors.OrderInfeasible(f"Order {order} needs more precision: {err.message}",
                                     order=order, precision=mpmath.mp.prec)


def _require_morse(crit):
    if not crit.morse:
        raise errors.NonMorse(f"Critical point {crit.index} is degenerate",
                              crit=crit.index, hess_det=crit.hess_det)


def local_expansion_1d(scene, crit, K, tolerances=DEFAULT_TOLERANCES):
    """Series by reversion: f(x_i + y) = z_i - w^2/2, h(w) = g dy/dw, c_k = a_2k (2k-1)!!."""
    assert scene.n == 1, f"local_expansion_1d needs one variable, scene has {scene.n}"
    _require_morse(crit)
    order = 2 * K + 2
    f_coeffs = _jet(scene.f, crit.x, order, tolerances).univariate()
    g_coeffs = _jet(scene.vol, crit.x, 2 * K, tolerances).univariate()
    q = FormalSeries([-2 * f_coeffs[m + 2] for m in range(2 * K + 1)])
    w = FormalSeries([0] + list(q.sqrt().coeffs))
    y = w.reversion()
    dy = y.derivative()
    h = FormalSeries(g_coeffs).compose(y.truncate(2 * K)) * dy

    canonical = _canonical_root(1 / (-2 * f_coeffs[2]))
    sign_choice = 1 if _same_sign(dy[0], canonical) else -1
    coeffs = [sign_choice * h[2 * k] * mpmath.fac2(2 * k - 1) for k in range(K + 1)]
    series = FormalSeries(coeffs)
    _check_envelope(series, crit.index)
    logging.info(f"Expanded point {crit.index} to order {K} by reversion, c_0 = "
                 f"{mpmath.nstr(series[0], 12)}")
    return LocalExpansion(crit.index, series, ((sign_choice * dy[0],),), sign_choice, '1d')


def _linear_forms(frame, n):
    return [{tuple(1 if c == b else 0 for c in range(n)): frame[a, b] for b in range(n)}
            for a in range(n)]


def _poly_mul(a, b):
    result = {}
    for (ma, ca), (mb, cb) in itertools.product(a.items(), b.items()):
        m = tuple(x + y for x, y in zip(ma, mb))
        result[m] = result.get(m, 0) + ca * cb
    return result


def _poly_add(a, b, scale=1):
    result = dict(a)
    for m, c in b.items():
        result[m] = result.get(m, 0) + scale * c
    return result


def _homogeneous_parts(jet, frame, n, max_degree):
    """Homogeneous parts by degree of p(L u) for the Taylor polynomial p of a jet."""
    forms = _linear_forms(frame, n)
    powers = [[{(0,) * n: mpmath.mpc(1)}] for _ in range(n)]
    parts = [{} for _ in range(max_degree + 1)]
    for multi_index, coeff in jet.coeffs.items():
        degree = sum(multi_index)
        if degree > max_degree or coeff == 0:
            continue
        term = {(0,) * n: coeff}
        for a, e in enumerate(multi_index):
            while len(powers[a]) <= e:
                powers[a].append(_poly_mul(powers[a][-1], forms[a]))
            term = _poly_mul(term, powers[a][e])
        parts[degree] = _poly_add(parts[degree], term)
    return parts


def _graded(exprs, crit, frame, order, tolerances, skip_quadratic=False):
    """sum_l s^{2l} e_l(x_i + s L u) as a list of polynomials in u indexed by the power of s.

    With skip_quadratic the expression is an exponent f/t: its parts of degree <= 2 are dropped
    and a degree-m part lands at s^{m-2}.
    """
    n = len(crit.x)
    graded = [{} for _ in range(order + 1)]
    for level, expr in enumerate(exprs):
        shift = 2 * level
        if shift > order:
            break
        if skip_quadratic:
            top = order + 2 - shift
        else:
            top = order - shift
        parts = _homogeneous_parts(_jet(expr, crit.x, top, tolerances), frame, n, top)
        for degree, part in enumerate(parts):
            power = degree - 2 + shift if skip_quadratic else degree + shift
            if skip_quadratic and degree <= 2:
                continue
            if power <= order:
                graded[power] = _poly_add(graded[power], part)
    return graded


def _graded_exp(graded, order, n):
    """exp of a graded series whose s^0 coefficient is a constant polynomial."""
    zero = (0,) * n
    assert all(m == zero for m in graded[0]), "The s^0 part of an exponent must be constant"
    result = [{zero: mpmath.exp(graded[0].get(zero, mpmath.mpc(0)))}]
    for j in range(1, order + 1):
        total = {}
        for i in range(1, j + 1):
            if graded[i]:
                total = _poly_add(total, _poly_mul(graded[i], result[j - i]), i)
        result.append({m: c / j for m, c in total.items()})
    return result


def _graded_mul(a, b, order):
    result = [{} for _ in range(order + 1)]
    for i in range(order + 1):
        for j in range(order + 1 - i):
            if a[i] and b[j]:
                result[i + j] = _poly_add(result[i + j], _poly_mul(a[i], b[j]))
    return result


def _gaussian_moment(multi_index):
    """<u^alpha> for the standard Gaussian: prod (alpha_j - 1)!! for even alpha, else 0."""
    if any(a % 2 for a in multi_index):
        return 0
    return mpmath.fprod(mpmath.fac2(a - 1) for a in multi_index)


def _frame(hessian):
    """L = (-H)^{-1/2}, so that L^T H L = -Id."""
    return mpmath.inverse(mpmath.sqrtm(-hessian))


def _wick_series(f, crit, K, tolerances, density=None, log_density=None):
    """Series coefficients and frame for e^{f/t} times the given density around crit.

    `density` is a list of expressions D_l with g = sum_l t^l D_l; `log_density` a list L_l with
    g = exp(sum_l t^l L_l).
    """
    _require_morse(crit)
    n = len(crit.x)
    order = 2 * K
    frame = _frame(crit.hessian)
    det = mpmath.det(frame)
    tiny = mpmath.ldexp(abs(det), -mpmath.mp.prec // 2)
    on_axis = abs(det.real) <= tiny
    canonical_sign = 1 if (det.real > tiny or (on_axis and det.imag > 0)) else -1

    interaction = _graded_exp(_graded([f], crit, frame, order, tolerances, True), order, n)
    if log_density is not None:
        weight = _graded_exp(_graded(log_density, crit, frame, order, tolerances), order, n)
    else:
        weight = _graded(density, crit, frame, order, tolerances)
    total = _graded_mul(interaction, weight, order)
    coeffs = []
    for k in range(K + 1):
        part = total[2 * k]
        coeffs.append(canonical_sign * det * mpmath.fsum(
            c * _gaussian_moment(m) for m, c in part.items()))
    return coeffs, frame, canonical_sign


def local_expansion_wick(scene, crit, K, tolerances=DEFAULT_TOLERANCES, density=None,
                         log_density=None):
    """Series by Wick contraction; `density` optionally replaces vol by sum_l t^l D_l and
    `log_density` by exp(sum_l t^l L_l)."""
    if log_density is not None:
        log_density = [as_expression(d, scene.variables) for d in log_density]
        coeffs, frame, sign_choice = _wick_series(scene.f, crit, K, tolerances,
                                                  log_density=log_density)
    else:
        if density is None:
            density = [scene.vol]
        density = [as_expression(d, scene.variables) for d in density]
        coeffs, frame, sign_choice = _wick_series(scene.f, crit, K, tolerances, density=density)
    series = FormalSeries(coeffs)
    _check_envelope(series, crit.index)
    logging.info(f"Expanded point {crit.index} to order {K} by Wick contraction, c_0 = "
                 f"{mpmath.nstr(series[0], 12)}")
    rows = tuple(tuple(frame[a, b] for b in range(frame.cols)) for a in range(frame.rows))
    return LocalExpansion(crit.index, series, rows, sign_choice, 'wick')


def local_expansion(scene, crit, K, tolerances=DEFAULT_TOLERANCES):
    """Reversion for one variable, Wick contraction otherwise."""
    if scene.n == 1:
        return local_expansion_1d(scene, crit, K, tolerances)
    return local_expansion_wick(scene, crit, K, tolerances)


def _expansion_item(scene, K, tolerances, crit):
    try:
        return local_expansion(scene, crit, K, tolerances)
    except errors.NonMorse as err:
        logging.warning(f"No expansion at point {crit.index}: {err.message}")
        return None


def local_expansions(scene, points, K, tolerances=DEFAULT_TOLERANCES):
    """Expansions at every point on the worker pool; degenerate points give None."""
    return parallel_map(functools.partial(_expansion_item, scene, K, tolerances), list(points))


def _sum_expressions(left, right, variables):
    left = as_expression(left, variables)
    right = as_expression(right, variables)
    return parse_expression(f"({left}) + ({right})", variables)


def pairing_expansion(left, right, point, K, variables=None, tolerances=DEFAULT_TOLERANCES):
    """Pairing of two half-density series e^{sum_g hbar^{g-1} F_g} at a transversal point.

    `left` and `right` list F_0, F_1, ... as expressions. The result is the local expansion of
    e^{(F_0 + F'_0)/hbar} against the density exp(sum_{g>=1} hbar^{g-1} (F_g + F'_g)). With
    right == 'fiber' the right Lagrangian is the fiber q = point and the series is
    exp(sum_{g>=1} hbar^{g-1} F_g(point)).
    """
    point = tuple(mpmath.mpc(c) for c in point)
    if variables is None:
        variables = ('q',) if len(point) == 1 else tuple(f"q{k}" for k in range(len(point)))
    if right == 'fiber':
        values = [expr_eval(as_expression(F, variables), point, None, tolerances.eps_branch)
                  for F in left[1:]]
        log_series = FormalSeries((values + [0] * (K + 1))[:K + 1])
        return log_series.exp()

    levels = max(len(left), len(right))
    left = list(left) + ['0'] * (levels - len(left))
    right = list(right) + ['0'] * (levels - len(right))
    exponent = _sum_expressions(left[0], right[0], variables)
    log_density = [_sum_expressions(a, b, variables) for a, b in zip(left[1:], right[1:])]
    if not log_density:
        log_density = [parse_expression('0', variables)]
    root = landscape.newton_from_seed(exponent, point, (), tolerances)
    crit = landscape.make_critical_point(exponent, root, tolerances)
    coeffs, _, _ = _wick_series(exponent, crit, K, tolerances, log_density=log_density)
    logging.info(f"Pairing at {[mpmath.nstr(c, 8) for c in root]} expanded to order {K}")
    return FormalSeries(coeffs)
