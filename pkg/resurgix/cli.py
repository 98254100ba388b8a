"""Command line front end.

    python -m resurgix.cli pipeline --scene airy --order 30
    python -m resurgix.cli nahm sum --data golden --N 100

Every subcommand prints a RunRecord as JSON (or writes it to --out), optionally with a CSV
sidecar of its table (--csv). Exit status is 0 on success, 1 for computation errors (a JSON
error on stderr) and 2 for usage errors.
"""
import argparse
import json
import logging
import os
import sys

import joblib
import mpmath
import numpy as np
import pandas as pd
import sympy

from resurgix.cache import RunCache, RunRecord, config_hash
from resurgix.helper import (borel, errors, landscape, log_utils, nahm, parallel, qwf, saddle,
                             stsurf, thimble, utils, wcs)
from resurgix.helper.precision import (DEFAULT_TOLERANCES, TOLERANCE_NAMESPACES,
                                       working_precision)
from resurgix.helper.scenes import read_scene

# Options that change where or how results are shown, not what is computed
PRESENTATION_OPTIONS = ('out', 'csv', 'no_cache', 'cache_dir', 'verbosity', 'logfile', 'jobs',
                        'handler')
INPUT_SUFFIXES = {'scene': '.scene', 'package': '.json', 'surface': '.surface', 'data': '.nahm'}
CHECK_MODULUS = mpmath.mpf('0.1')
CHECK_ANGLES = 48


def _complex(text):
    try:
        return utils.parse_complex(text)
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a complex number")


def _int_list(text):
    return [int(item) for item in text.split(',') if item.strip()]


def _points_list(text):
    return [_complex(item) for item in text.split(';') if item.strip()]


def _point(points, index):
    assert 0 <= index < len(points), f"No critical point {index}; the scene has {len(points)}"
    return points[index]


def _table_rows(table):
    return None if table is None else table.to_dict(orient='records')


# saddles / thimble / expand / borel


def run_saddles(args, tolerances):
    scene = read_scene(args.scene)
    points = landscape.find_critical_points(scene, tolerances)
    rays = landscape.stokes_rays(points, tolerances, allow_coincident=True)
    rows = []
    for point in points:
        row = {'index': point.index, 're_z': float(point.z.real), 'im_z': float(point.z.imag),
               'morse': point.morse}
        for k, c in enumerate(point.x):
            row[f're_x{k}'] = float(c.real)
            row[f'im_x{k}'] = float(c.imag)
        rows.append(row)
    outputs = {'scene': scene, 'points': points, 'rays': rays,
               'collinear': landscape.genericity_check(points, tolerances)}
    return outputs, pd.DataFrame(rows)


def run_thimble(args, tolerances):
    scene = read_scene(args.scene)
    points = thimble.scene_points(scene, tolerances)
    crit = _point(points, args.point)
    integral = thimble.thimble_integral(scene, crit, args.t, tolerances=tolerances, points=points)
    contour = thimble.trace_thimble(scene, crit, args.t, tolerances=tolerances, points=points)
    return {'integral': integral, 'contour': contour}, contour.to_frame()


def _expansions(scene, points, K, tolerances):
    expansions = saddle.local_expansions(scene, points, K, tolerances)
    for point, expansion in zip(points, expansions):
        if expansion is None:
            logging.warning(f"Point {point.index} is degenerate and has no local expansion")
    return expansions


def run_expand(args, tolerances):
    scene = read_scene(args.scene)
    points = thimble.scene_points(scene, tolerances)
    expansions = _expansions(scene, points, args.order, tolerances)
    rows = [{'point': e.crit_index, 'k': k, 're': float(c.real), 'im': float(c.imag)}
            for e in expansions if e is not None for k, c in enumerate(e.series.coeffs)]
    return {'points': points, 'expansions': expansions}, pd.DataFrame(rows)


def run_borel(args, tolerances):
    scene = read_scene(args.scene)
    points = thimble.scene_points(scene, tolerances)
    crit = _point(points, args.point)
    expansion = _expansions(scene, [crit], args.order, tolerances)[0]
    if expansion is None:
        raise errors.NonMorse(f"Point {crit.index} has no local expansion", crit=crit.index)
    germ = borel.borel(expansion.series, crit.z)
    outputs = {'point': crit, 'germ': germ,
               'singularities': borel.detect_singularities(germ, tolerances)}
    if args.t is not None:
        theta = mpmath.arg(args.t) if args.theta is None else mpmath.mpf(args.theta)
        value, tail, quad_error = borel.resum_with_bounds(expansion.series, theta, args.t, germ,
                                                          tolerances)
        outputs['resummed'] = {'t': args.t, 'theta': theta, 'value': value, 'tail': tail,
                               'quad_error': quad_error}
    return outputs, borel.pole_table(germ)


# wcs


def _package(args, tolerances):
    if args.package:
        return wcs.read_package(args.package)
    assert args.scene, "Give a --package file or a --scene"
    return wcs.package_from_scene(read_scene(args.scene), args.order, tolerances)


def run_wcs_validate(args, tolerances):
    pkg = _package(args, tolerances)
    report = wcs.validate_package(pkg, tolerances)
    return {'package': pkg, 'validation': report.to_dict(orient='records')}, report


def run_wcs_product(args, tolerances):
    pkg = _package(args, tolerances)
    data = wcs.stokes_data(pkg, tolerances)
    sector = wcs.Sector(args.start, args.end, args.include_start, args.include_end)
    product = wcs.sector_product(data, sector, tolerances)
    return {'stokes': data, 'sector': [args.start, args.end], 'product': str(product.tolist())}, None


def run_wcs_identities(args, tolerances):
    rng = np.random.default_rng(args.seed)
    rows = []
    for trial in range(args.trials):
        A, B = (rng.normal(size=(args.size, args.size)) +
                1j * rng.normal(size=(args.size, args.size)) for _ in range(2))
        A *= args.scale / np.linalg.norm(A, 2)
        B *= args.scale / np.linalg.norm(B, 2)
        rows.append({'trial': trial, 'five_term': wcs.five_term_check(A, B),
                     'six_term': wcs.six_term_check(A, B)})
    table = pd.DataFrame(rows)
    outputs = {'trials': args.trials, 'five_term': bool(table['five_term'].all()),
               'six_term': bool(table['six_term'].all()),
               'focus_focus': wcs.monodromy_check_focus_focus(),
               'focus_focus_printed': wcs.monodromy_check_focus_focus(wcs.FOCUS_FOCUS_PRINTED_X)}
    return outputs, table


def _strictly_upper(rng, size):
    return sympy.Matrix(size, size, lambda a, b: int(rng.integers(-3, 4)) if b > a else 0)


def run_wcs_farey(args, tolerances):
    rng = np.random.default_rng(args.seed)
    A, B = _strictly_upper(rng, args.size), _strictly_upper(rng, args.size)
    product = wcs.farey_product(A, B, args.depth)
    factorization = wcs.farey_factorization(A, B, args.depth)
    return {'A': str(A.tolist()), 'B': str(B.tolist()), 'product': product,
            'factorization': factorization}, None


def run_gamma_check(args, tolerances):
    assert args.grid >= 2 and args.grid % 2 == 0, "--grid must be a positive even number"
    report = wcs.gamma_rh_check(wcs.gamma_samples(args.grid // 2))
    outputs = {'samples': len(report), 'max_residual': float(report['residual'].max()),
               'max_printed_residual': float(report['printed_residual'].max()),
               'rows': report.to_dict(orient='records')}
    return outputs, report


def run_rh(args, tolerances):
    pkg = _package(args, tolerances)
    grid = [mpmath.mpc(t) for t in args.grid_points]
    solution = wcs.rh_reconstruct(pkg, grid, iters=args.iters, enable_stretch=args.enable_stretch,
                                tolerances=tolerances)
    return {'package': pkg, 'solution': solution}, solution.to_frame()


# stsurf


def run_stsurf(args, tolerances):
    surface = stsurf.read_surface(args.surface)
    complex_ = stsurf.build_complex(surface)
    outputs = {'surface': surface, 'complex': complex_,
               'euler_characteristic': surface.euler_characteristic()}
    table = None
    if args.vertex:
        outputs['class'] = stsurf.thimble_class(surface, args.vertex, args.direction, args.tilt,
                                                complex_)
    if args.quadrant:
        matrix = stsurf.transition_matrix(surface, args.quadrant)
        outputs['transition'] = matrix
        if args.oracle_points:
            rng = np.random.default_rng(args.seed)
            points = [stsurf.novikov_point(rng) for _ in range(args.oracle_points)]
            errs = stsurf.specialization_errors(surface, args.quadrant, points)
            outputs['oracle_max_error'] = max(errs)
            table = pd.DataFrame({'point': range(len(errs)), 'error': errs})
    if args.monodromy:
        point = stsurf.novikov_point(np.random.default_rng(args.seed))
        product = stsurf.monodromy_product(surface, point)
        outputs['monodromy_distance'] = mpmath.mnorm(product - mpmath.eye(product.rows), 1)
    return outputs, table


# qwf


def run_qwf_moyal(args, tolerances):
    left = qwf.PolyObservable.from_string(args.left, args.pairs, args.order)
    right = qwf.PolyObservable.from_string(args.right, args.pairs, args.order)
    return {'product': qwf.moyal(left, right, args.order),
            'commutator': qwf.commutator(left, right, args.order)}, None


def run_qwf_pairing(args, tolerances):
    left = qwf.PolyObservable.from_string(args.left, args.pairs, args.order)
    right = qwf.PolyObservable.from_string(args.right, args.pairs, args.order)
    return {'pairing': qwf.formal_pairing(left, right, args.order, args.factorial)}, None


def run_qwf_wkb(args, tolerances):
    anchor = args.anchor if args.anchor == 'infinity' else utils.parse_complex(args.anchor)
    wkb = qwf.wkb_expand(args.potential, args.order, anchor)
    outputs = {'wkb': wkb}
    rows = []
    for x in args.at:
        values = [wkb.value(g, x) for g in range(args.order + 1)]
        rows.extend({'x': str(x), 'g': g, 're': float(v.real), 'im': float(v.imag)}
                    for g, v in enumerate(values))
    if args.cycle:
        outputs['period'] = qwf.quantum_period(wkb, args.cycle, args.order)
    return outputs, pd.DataFrame(rows) if rows else None


def run_qwf_polytope(args, tolerances):
    expansion = qwf.polytope_sum_asymptotics(args.F0, args.g, args.case, args.order, args.seed,
                                             tolerances)
    outputs = {'expansion': expansion}
    if args.N:
        outputs['check'] = qwf.polytope_sum_check(expansion, args.F0, args.g, args.N)
    return outputs, None


def run_qwf_euler_maclaurin(args, tolerances):
    return {'series': qwf.euler_maclaurin(args.g, args.order, args.correction_only)}, None


# nahm


def run_nahm_sum(args, tolerances):
    data = nahm.read_nahm(args.data)
    values = [{'N': N, 'Z': nahm.nahm_sum(data, N)} for N in args.N]
    return {'data': data, 'sums': values}, pd.DataFrame(
        [{'N': v['N'], 're': float(v['Z'].real), 'im': float(v['Z'].imag)} for v in values])


def run_nahm_crit(args, tolerances):
    data = nahm.read_nahm(args.data)
    crits = nahm.critical_solve(data, tolerances, args.allow_degenerate)
    return {'data': data, 'critical': crits}, None


def _candidates(data, indices, tolerances):
    crits = nahm.critical_solve(data, tolerances)
    if not indices:
        return crits
    return [_point(crits, k) for k in indices]


def run_nahm_series(args, tolerances):
    data = nahm.read_nahm(args.data)
    crit = _candidates(data, [args.point], tolerances)[0]
    series = nahm.saddle_series(data, crit, args.order, tolerances)
    outputs = {'data': data, 'critical': crit, 'series': series}
    if args.N:
        outputs['sweep'] = nahm.saddle_sweep(data, crit, args.N, args.order, tolerances)
    return outputs, None


def run_nahm_match(args, tolerances):
    data = nahm.read_nahm(args.data)
    candidates = _candidates(data, args.points, tolerances)
    matches = nahm.match_integers(data, candidates, args.N, args.order,
                                  require_stable=not args.report_unstable, tolerances=tolerances)
    return {'data': data, 'candidates': candidates, 'period': data.residue_period(),
            'matches': matches}, None


def run_nahm_dft(args, tolerances):
    return nahm.dft_wavefunction_check(args.N, args.order, inhomogeneous=args.inhomogeneous), None


def run_nahm_face(args, tolerances):
    data = nahm.read_nahm(args.data)
    rows = []
    for N in args.N:
        value = nahm.nahm_sum(data, N)
        prediction = nahm.face_contribution(data, args.vertex, N, args.order, tolerances)
        rows.append({'N': N, 'Z': value, 'prediction': prediction,
                     'deviation': abs(value - prediction) / abs(prediction)})
    return {'data': data, 'vertex': args.vertex, 'rows': rows}, None


def run_nahm_partial(args, tolerances):
    data = nahm.read_nahm(args.data)
    return {'data': data, 'w': args.w, 'partial_sums': nahm.z_sum_partial(data, args.N_max, args.w)}, None


# pipeline


def _check_angle(rays):
    """The angle on a regular grid farthest from every Stokes ray."""
    angles = [2 * mpmath.pi * k / CHECK_ANGLES for k in range(CHECK_ANGLES)]
    return max(angles, key=rays.distance_to_rays)


def _cross_check_row(scene, crit, series, theta, tolerances, points):
    t = CHECK_MODULUS * mpmath.expj(theta)
    row = {'point': crit.index, 't': mpmath.nstr(t, 10), 'relative_difference': None,
           'message': ''}
    try:
        resummed = borel.resum(series, theta, t, tolerances=tolerances)
        integral = thimble.thimble_integral(scene, crit, t, tolerances=tolerances, points=points)
        modified = integral.value * mpmath.exp(-crit.z / t) / \
            mpmath.power(2 * mpmath.pi * t, mpmath.mpf(scene.n) / 2)
        row['relative_difference'] = float(abs(resummed / modified - 1))
    except errors.ResurgixError as err:
        logging.warning(f"Cross-check of point {crit.index} skipped: {err.message}")
        row['message'] = f"{type(err).__name__}: {err.message}"
    return row


def run_pipeline(args, tolerances):
    assert args.order >= borel.MIN_DETECTION_ORDER, \
        f"The pipeline needs --order >= {borel.MIN_DETECTION_ORDER}, got {args.order}"
    scene = read_scene(args.scene)
    pkg = wcs.package_from_scene(scene, args.order, tolerances)
    report = wcs.validate_package(pkg, tolerances)
    points = thimble.scene_points(scene, tolerances)
    rays = landscape.stokes_rays(points, tolerances, allow_coincident=True)
    theta = _check_angle(rays)
    singularities = {crit.index: borel.detect_singularities(borel.borel(series, crit.z), tolerances)
                     for crit, series in zip(points, pkg.series)}
    checks = [_cross_check_row(scene, crit, series, theta, tolerances, points)
              for crit, series in zip(points, pkg.series)]
    outputs = {'scene': scene, 'package': pkg, 'singularities': singularities,
               'validation': report.to_dict(orient='records'),
               'validated': bool(report['passed'].all()) if len(report) else True,
               'check_theta': theta, 'cross_check': checks}
    return outputs, report


def _add_common(parser):
    parser.add_argument("--verbosity",
                        help="verbosity level for logging",
                        default=2,
                        type=int,
                        choices=[0, 1, 2, 3, 4])
    parser.add_argument("--logfile", help="also write the log to this file")
    parser.add_argument("--precision", type=int, help="working precision in bits")
    parser.add_argument("--out", help="write the JSON record here instead of stdout")
    parser.add_argument("--csv", help="write the tabular output to this CSV file")
    parser.add_argument("--no-cache", action='store_true', help="neither read nor write the cache")
    parser.add_argument("--cache-dir", help="cache directory (default $RESURGIX_CACHE or "
                                            ".resurgix-cache)")
    parser.add_argument("--jobs", type=int, default=1, help="number of worker processes")
    for namespace, names in TOLERANCE_NAMESPACES.items():
        for name in names:
            parser.add_argument(f"--{namespace}.{name.replace('_', '-')}", dest=name, type=float,
                                help=f"override {name} (default {getattr(DEFAULT_TOLERANCES, name)})")


def _subcommand(subparsers, name, handler, help_text):
    parser = subparsers.add_parser(name, help=help_text, description=help_text)
    parser.set_defaults(handler=handler)
    _add_common(parser)
    return parser


def _scene_parser(subparsers, name, handler, help_text, order=False, point=False):
    parser = _subcommand(subparsers, name, handler, help_text)
    required_named = parser.add_argument_group('required named arguments')
    required_named.add_argument("--scene", required=True,
                                help="scene file, or the name of a bundled scene e.g. 'airy'")
    if order:
        required_named.add_argument("--order", type=int, required=True, help="series order K")
    if point:
        parser.add_argument("--point", type=int, default=0, help="index of the critical point")
    return parser


def _add_wcs(subparsers):
    parser = subparsers.add_parser('wcs', help="resurgence packages and wall-crossing identities")
    actions = parser.add_subparsers(dest='action', required=True)
    for name, handler, text in (('validate', run_wcs_validate, "validate declared Stokes indices"),
                                ('product', run_wcs_product, "sector product of jump factors"),
                                ('rh', run_rh, "Riemann-Hilbert reconstruction")):
        sub = _subcommand(actions, name, handler, text)
        sub.add_argument("--package", help="package JSON file")
        sub.add_argument("--scene", help="build the package from this scene instead")
        sub.add_argument("--order", type=int, default=30, help="series order for --scene")
        if name == 'product':
            sub.add_argument("--start", type=float, required=True)
            sub.add_argument("--end", type=float, required=True)
            sub.add_argument("--include-start", action='store_true', default=None)
            sub.add_argument("--include-end", action='store_true', default=None)
        if name == 'rh':
            sub.add_argument("--grid-points", type=_points_list, required=True,
                             help="points t separated by ';'")
            sub.add_argument("--iters", type=int, default=200)
            sub.add_argument("--enable-stretch", action='store_true',
                             help="run the experimental reconstruction")
    sub = _subcommand(actions, 'identities', run_wcs_identities,
                      "five- and six-term identities on random matrices, focus-focus monodromy")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--trials", type=int, default=20)
    sub.add_argument("--size", type=int, default=4)
    sub.add_argument("--scale", type=float, default=0.35)
    sub = _subcommand(actions, 'farey', run_wcs_farey, "Farey-ordered factorization")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--size", type=int, default=4)
    sub.add_argument("--depth", type=int, default=4)
    sub = _subcommand(actions, 'gamma-check', run_gamma_check, "Gamma function jump identities")
    sub.add_argument("--grid", type=int, default=20, help="number of sample points")


def _add_qwf(subparsers):
    parser = subparsers.add_parser('qwf', help="quantum wave function formulas")
    actions = parser.add_subparsers(dest='action', required=True)
    for name, handler in (('moyal', run_qwf_moyal), ('pairing', run_qwf_pairing)):
        sub = _subcommand(actions, name, handler, f"{name} of two polynomial observables")
        sub.add_argument("--left", required=True)
        sub.add_argument("--right", required=True)
        sub.add_argument("--pairs", type=int, default=1, help="number of (q, p) pairs")
        sub.add_argument("--order", type=int, default=8)
        if name == 'pairing':
            sub.add_argument("--factorial", choices=['total', 'multi'], default='total')
    sub = _subcommand(actions, 'wkb', run_qwf_wkb, "WKB expansion and quantum periods")
    sub.add_argument("--potential", required=True, help="V(x), e.g. 'x^4 + 1'")
    sub.add_argument("--order", type=int, default=4)
    sub.add_argument("--anchor", default='infinity')
    sub.add_argument("--at", type=_points_list, default=[], help="points x separated by ';'")
    sub.add_argument("--cycle", type=_points_list, help="closed polyline separated by ';'")
    sub = _subcommand(actions, 'polytope', run_qwf_polytope, "asymptotics of lattice sums")
    sub.add_argument("--F0", required=True)
    sub.add_argument("--g", default='1')
    sub.add_argument("--case", choices=['boundary', 'interior_saddle'], default='boundary')
    sub.add_argument("--order", type=int, default=4)
    sub.add_argument("--seed", type=_complex)
    sub.add_argument("--N", type=_int_list, help="check against direct sums at these N")
    sub = _subcommand(actions, 'euler-maclaurin', run_qwf_euler_maclaurin,
                      "Euler-Maclaurin series of hbar sum g(k hbar)")
    sub.add_argument("--g", required=True)
    sub.add_argument("--order", type=int, default=6)
    sub.add_argument("--correction-only", action='store_true')


def _add_nahm(subparsers):
    parser = subparsers.add_parser('nahm', help="generalized Nahm sums at roots of unity")
    actions = parser.add_subparsers(dest='action', required=True)
    commands = (('sum', run_nahm_sum, "Z_N by direct summation"),
                ('crit', run_nahm_crit, "critical points"),
                ('series', run_nahm_series, "saddle series of one critical point"),
                ('match', run_nahm_match, "integer combinations of saddle contributions"),
                ('face', run_nahm_face, "vertex contributions (d = 1)"),
                ('partial', run_nahm_partial, "partial sums of sum Z_N w^N"))
    for name, handler, text in commands:
        sub = _subcommand(actions, name, handler, text)
        sub.add_argument("--data", required=True,
                         help="Nahm data file, or the name of a bundled one e.g. 'golden'")
        if name in ('series', 'match', 'face'):
            sub.add_argument("--order", type=int, default=0)
        if name in ('sum', 'match', 'face'):
            sub.add_argument("--N", type=_int_list, required=True, help="comma-separated N")
        if name == 'series':
            sub.add_argument("--point", type=int, default=0)
            sub.add_argument("--N", type=_int_list, help="also sweep Z_N over these N")
        if name == 'crit':
            sub.add_argument("--allow-degenerate", action='store_true')
        if name == 'match':
            sub.add_argument("--points", type=_int_list, default=[],
                             help="indices of the candidate critical points (default all)")
            sub.add_argument("--report-unstable", action='store_true',
                             help="report unstable fits instead of failing")
        if name == 'face':
            sub.add_argument("--vertex", required=True, help="vertex of P, e.g. 1/2")
        if name == 'partial':
            sub.add_argument("--N-max", type=int, required=True)
            sub.add_argument("--w", type=_complex, default=mpmath.mpc(1))
    sub = _subcommand(actions, 'dft', run_nahm_dft, "finite Fourier transform of 1/(j)_q!")
    sub.add_argument("--N", type=_int_list, required=True)
    sub.add_argument("--order", type=int, default=1)
    sub.add_argument("--inhomogeneous", choices=['leading', 'every_order'], default='leading')


def build_parser():
    parser = argparse.ArgumentParser(prog='resurgix',
                                     description="Exponential integrals, thimbles, Borel "
                                                 "resummation and wall-crossing data.")
    subparsers = parser.add_subparsers(dest='command', required=True)
    _scene_parser(subparsers, 'saddles', run_saddles, "critical points and Stokes rays")
    sub = _scene_parser(subparsers, 'thimble', run_thimble, "integral over one thimble",
                        point=True)
    sub.add_argument("--t", type=_complex, required=True, help="phase parameter t")
    _scene_parser(subparsers, 'expand', run_expand, "local series of every critical point",
                  order=True)
    sub = _scene_parser(subparsers, 'borel', run_borel, "Borel germ, singularities, resummation",
                        order=True, point=True)
    sub.add_argument("--t", type=_complex, help="resum at this t")
    sub.add_argument("--theta", type=float, help="Laplace direction (default arg t)")
    _add_wcs(subparsers)
    sub = _subcommand(subparsers, 'stsurf', run_stsurf, "square-tiled surface thimble classes")
    sub.add_argument("--surface", required=True,
                     help="surface file, or the name of a bundled one e.g. 'genus2'")
    sub.add_argument("--vertex")
    sub.add_argument("--direction", default='E')
    sub.add_argument("--tilt", default='+', choices=['+', '-'])
    sub.add_argument("--quadrant", type=int, choices=[1, 2, 3, 4])
    sub.add_argument("--oracle-points", type=int, default=0)
    sub.add_argument("--monodromy", action='store_true',
                     help="distance of the full-turn product from the identity")
    sub.add_argument("--seed", type=int, default=0)
    _add_qwf(subparsers)
    _add_nahm(subparsers)
    sub = _subcommand(subparsers, 'gamma-check', run_gamma_check, "Gamma function jump identities")
    sub.add_argument("--grid", type=int, default=20, help="number of sample points")
    _scene_parser(subparsers, 'pipeline', run_pipeline,
                  "saddles, series, Borel analysis and package validation for one scene",
                  order=True)
    return parser


def tolerances_from_args(args):
    overrides = {name: getattr(args, name) for names in TOLERANCE_NAMESPACES.values()
                 for name in names if getattr(args, name, None) is not None}
    return DEFAULT_TOLERANCES.replace(**overrides)


def _input_digests(args):
    """Content hashes of the input files, so that edited inputs miss the cache."""
    digests = {}
    for key, suffix in INPUT_SUFFIXES.items():
        value = getattr(args, key, None)
        if not value:
            continue
        filename = value
        if not os.path.exists(filename):
            filename = utils.fixture_path(value if value.endswith(suffix) else value + suffix)
        if os.path.exists(filename):
            with open(filename) as f:
                digests[key] = joblib.hash(f.read())
    return digests


def command_name(args):
    return ' '.join(part for part in (args.command, getattr(args, 'action', None)) if part)


def execute(args, tolerances, precision):
    """Runs the handler (or reads the cache) and returns the RunRecord text."""
    command = command_name(args)
    config = {key: value for key, value in vars(args).items() if key not in PRESENTATION_OPTIONS}
    config.update({'precision': precision, 'tolerances': tolerances.as_dict(),
                   'inputs': _input_digests(args)})
    key = config_hash(command, config)
    store = RunCache(args.cache_dir, not args.no_cache)
    text = store.lookup(key)
    if text is None:
        with log_utils.log_duration(command) as timer:
            outputs, table = args.handler(args, tolerances)
        record = RunRecord(command, key, precision, tolerances.as_dict(), timer['seconds'],
                           outputs, _table_rows(table), parallel.get_n_jobs())
        text = store.store(record)
    return text


def _emit(text, args):
    if args.out:
        with open(args.out, 'w') as f:
            f.write(text)
        logging.info(f"Saved record to {args.out}")
    else:
        sys.stdout.write(text + '\n')
    if args.csv:
        table = json.loads(text).get('table')
        if table is None:
            logging.warning(f"{command_name(args)} has no tabular output; no CSV written")
        else:
            utils.save_df_csv_quoted(pd.DataFrame(table), args.csv)


def _fail(payload, status):
    sys.stderr.write(json.dumps(payload, sort_keys=True) + '\n')
    return status


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    log_utils.setup_logging(args.verbosity, args.logfile)
    try:
        if args.jobs is not None:
            parallel.set_n_jobs(args.jobs)
        tolerances = tolerances_from_args(args)
        with working_precision(args.precision) as precision:
            text = execute(args, tolerances, precision)
    except errors.ResurgixError as err:
        logging.error(f"{type(err).__name__}: {err.message}")
        return _fail(err.to_dict(), 1)
    except (AssertionError, FileNotFoundError) as err:
        logging.error(f"Usage error: {err}")
        return _fail({'error': 'UsageError', 'message': str(err), 'details': {}}, 2)
    _emit(text, args)
    return 0


if __name__ == '__main__':
    sys.exit(main())
