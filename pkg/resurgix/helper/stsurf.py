"""Square-tiled surfaces with a rank one local system of monomial holonomies.

Every square has its bottom/top edges oriented East and its left/right edges oriented North.
The chain complex is

    C_2 (squares) --d2--> C_1 (edges) --d1--> C_0 (vertices)

over the Laurent ring of the holonomy variables, with

    d1(e) = source - hol(e) * target
    d2(F) = left + hol(left) * top - bottom - hol(bottom) * right

Thimble classes are sums of geometric progressions along the cylinders a slightly tilted
direction sweeps out; transition matrices between two such bases are exact rational functions.
"""
import dataclasses
import functools
import logging
import os
import random

import mpmath
import numpy as np
import sympy
from sympy.polys.matrices import DomainMatrix

from resurgix.helper import errors, parallel, utils
from resurgix.helper.laurent import LaurentRational

DIRECTIONS = ('E', 'N', 'W', 'S')
SLOTS = DIRECTIONS
CORNERS = ('SW', 'SE', 'NW', 'NE')
OPPOSITE = {'E': 'W', 'W': 'E', 'N': 'S', 'S': 'N'}
ORACLE_TERMS = 200

# (direction, tilt) -> (corner the ray leaves from, edge slot it runs along, forward?, next square)
_RAYS = {
    ('E', '+'): ('SW', 'S', True, 'E'),
    ('E', '-'): ('NW', 'N', True, 'E'),
    ('N', '-'): ('SW', 'W', True, 'N'),
    ('N', '+'): ('SE', 'E', True, 'N'),
    ('W', '+'): ('NE', 'N', False, 'W'),
    ('W', '-'): ('SE', 'S', False, 'W'),
    ('S', '-'): ('NE', 'E', False, 'S'),
    ('S', '+'): ('NW', 'W', False, 'S'),
}


@dataclasses.dataclass(frozen=True)
class Edge:
    name: str
    holonomy: sympy.Expr
    source: str
    target: str
    # for a horizontal edge: the square below and the square above; vertical: left and right
    first: str
    second: str
    horizontal: bool


@dataclasses.dataclass(frozen=True, eq=False)
class SquareTiledSurface:
    name: str
    squares: tuple
    edges: dict
    slots: dict
    neighbours: dict
    corners: dict
    genus: int = None

    @property
    def vertices(self):
        return tuple(sorted(set(self.corners.values())))

    @property
    def edge_names(self):
        return tuple(sorted(self.edges, key=_natural_key))

    @property
    def variables(self):
        symbols = set()
        for edge in self.edges.values():
            symbols |= edge.holonomy.free_symbols
        return tuple(sorted(symbol.name for symbol in symbols))

    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges) + len(self.squares)

    def holonomy(self, square, slot):
        return self.edges[self.slots[(square, slot)]].holonomy

    def to_json(self):
        return {'name': self.name, 'genus': self.genus, 'squares': list(self.squares),
                'vertices': list(self.vertices),
                'edges': [{'name': e.name, 'holonomy': str(e.holonomy), 'source': e.source,
                           'target': e.target} for e in (self.edges[n] for n in self.edge_names)]}


def _natural_key(name):
    digits = ''.join(c for c in name if c.isdigit())
    return (name.rstrip('0123456789'), int(digits) if digits else -1, name)


def _holonomy(text):
    value = LaurentRational.from_string(text)
    _, _, num_terms, den_terms = value.key
    if len(num_terms) != 1 or len(den_terms) != 1:
        raise errors.InconsistentGluing(f"Holonomy {text!r} is not a monomial", holonomy=text)
    return value.as_expr()


def parse_surface(text, name='surface'):
    """Builds a surface from the line format of the .surface files."""
    squares, glues, corners, genus = [], [], {}, None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        words = line.split()
        keyword, args = words[0], words[1:]
        if keyword == 'square' and len(args) == 1:
            if args[0] in squares:
                raise errors.InconsistentGluing(f"Square {args[0]} declared twice", line=number)
            squares.append(args[0])
        elif keyword == 'glue' and len(args) == 6:
            glues.append((number, *args))
        elif keyword == 'corner' and len(args) == 3:
            square, corner, vertex = args
            if corner not in CORNERS or (square, corner) in corners:
                raise errors.InconsistentGluing(f"Bad corner {square} {corner}", line=number)
            corners[(square, corner)] = vertex
        elif keyword == 'genus' and len(args) == 1:
            genus = int(args[0])
        else:
            raise errors.ResurgixError(f"Cannot read line {number} of surface {name}: {raw!r}",
                                       line=number)
    return make_surface(name, squares, glues, corners, genus)


def make_surface(name, squares, glues, corners, genus=None):
    """Validates a gluing and assembles the surface.

    glues holds (line, square, slot, target, target_slot, edge, holonomy) tuples; the pair
    must be N/S or E/W and the edge is oriented East (for N/S) or North (for E/W)."""
    slots, neighbours, edges = {}, {}, {}
    for line, square, slot, target, target_slot, edge, holonomy in glues:
        for sq, sl in ((square, slot), (target, target_slot)):
            if sq not in squares or sl not in SLOTS:
                raise errors.InconsistentGluing(f"Unknown slot {sq} {sl}", line=line)
            if (sq, sl) in slots:
                raise errors.InconsistentGluing(f"Slot {sq} {sl} is glued twice", line=line)
        if OPPOSITE[slot] != target_slot:
            raise errors.InconsistentGluing(f"Cannot glue slot {slot} to slot {target_slot}",
                                            line=line)
        if slot in ('S', 'W'):
            square, slot, target, target_slot = target, target_slot, square, slot
        if edge in edges:
            raise errors.InconsistentGluing(f"Edge {edge} is used twice", line=line)
        horizontal = slot == 'N'
        for corner in CORNERS:
            if (square, corner) not in corners or (target, corner) not in corners:
                raise errors.InconsistentGluing(f"Corners of {square} or {target} are missing",
                                                line=line)
        if horizontal:
            ends = ((square, 'NW'), (target, 'SW')), ((square, 'NE'), (target, 'SE'))
        else:
            ends = ((square, 'SE'), (target, 'SW')), ((square, 'NE'), (target, 'NW'))
        for one, other in ends:
            if corners[one] != corners[other]:
                raise errors.InconsistentGluing(
                    f"Edge {edge} joins corners labelled {corners[one]} and {corners[other]}",
                    line=line)
        edges[edge] = Edge(edge, _holonomy(holonomy), corners[ends[0][0]], corners[ends[1][0]],
                           square, target, horizontal)
        slots[(square, slot)] = slots[(target, target_slot)] = edge
        neighbours[(square, slot)] = target
        neighbours[(target, target_slot)] = square

    missing = [f"{sq} {sl}" for sq in squares for sl in SLOTS if (sq, sl) not in slots]
    if missing:
        raise errors.InconsistentGluing(f"Unglued slots: {', '.join(missing)}")
    surface = SquareTiledSurface(name, tuple(squares), edges, slots, neighbours, dict(corners), genus)

    for square in squares:
        left, right = surface.holonomy(square, 'W'), surface.holonomy(square, 'E')
        bottom, top = surface.holonomy(square, 'S'), surface.holonomy(square, 'N')
        if sympy.cancel(left * top - bottom * right) != 0:
            raise errors.InconsistentGluing(f"Holonomy around square {square} is not trivial",
                                            square=square)
    if genus is not None and surface.euler_characteristic() != 2 - 2 * genus:
        raise errors.InconsistentGluing(
            f"Euler characteristic {surface.euler_characteristic()} does not match genus {genus}",
            genus=genus)
    logging.debug(f"Surface {name}: {len(squares)} squares, {len(edges)} edges, "
                  f"vertices {surface.vertices}")
    return surface


def read_surface(filename):
    """Reads a surface file. A bare name such as 'genus2' refers to a bundled fixture."""
    if not os.path.exists(filename):
        bundled = utils.fixture_path(filename if filename.endswith('.surface')
                                     else filename + '.surface')
        if not os.path.exists(bundled):
            raise FileNotFoundError(f"No surface file {filename}")
        filename = bundled
    name = os.path.splitext(os.path.basename(filename))[0]
    with open(filename) as f:
        surface = parse_surface(f.read(), name)
    logging.info(f"Read surface {name} with {len(surface.squares)} squares")
    return surface


def _laurent(expr):
    return LaurentRational(expr).normalize()


@dataclasses.dataclass(frozen=True, eq=False)
class ChainComplex:
    vertices: tuple
    edges: tuple
    squares: tuple
    d1: sympy.ImmutableMatrix
    d2: sympy.ImmutableMatrix

    def boundary(self, edge):
        """d1 of an edge as {vertex: coefficient}, zero coefficients left out."""
        column = self.d1[:, self.edges.index(edge)]
        return {v: _laurent(c) for v, c in zip(self.vertices, column) if sympy.cancel(c) != 0}

    def face_boundary(self, square):
        column = self.d2[:, self.squares.index(square)]
        return {e: _laurent(c) for e, c in zip(self.edges, column) if sympy.cancel(c) != 0}

    def is_closed(self, vector):
        return (self.d1 * vector).applyfunc(sympy.cancel).is_zero_matrix

    def to_json(self):
        return {'vertices': list(self.vertices), 'edges': list(self.edges),
                'squares': list(self.squares),
                'd1': [[str(_laurent(c)) for c in row] for row in self.d1.tolist()],
                'd2': [[str(_laurent(c)) for c in row] for row in self.d2.tolist()]}


def build_complex(surface):
    vertices, edges, squares = surface.vertices, surface.edge_names, surface.squares
    d1 = sympy.zeros(len(vertices), len(edges))
    for col, name in enumerate(edges):
        edge = surface.edges[name]
        d1[vertices.index(edge.source), col] += 1
        d1[vertices.index(edge.target), col] -= edge.holonomy
    d2 = sympy.zeros(len(edges), len(squares))
    for col, square in enumerate(squares):
        left, top = surface.slots[(square, 'W')], surface.slots[(square, 'N')]
        bottom, right = surface.slots[(square, 'S')], surface.slots[(square, 'E')]
        d2[edges.index(left), col] += 1
        d2[edges.index(top), col] += surface.edges[left].holonomy
        d2[edges.index(bottom), col] -= 1
        d2[edges.index(right), col] -= surface.edges[bottom].holonomy
    if not (d1 * d2).applyfunc(sympy.cancel).is_zero_matrix:
        raise errors.InconsistentGluing(f"d1 d2 is not zero on surface {surface.name}")
    return ChainComplex(vertices, edges, squares, sympy.ImmutableMatrix(d1),
                        sympy.ImmutableMatrix(d2))


@dataclasses.dataclass(frozen=True, eq=False)
class ThimbleClass:
    vertex: str
    direction: str
    tilt: str
    coefficients: dict
    closed: bool

    def vector(self, edges):
        return sympy.Matrix([self.coefficients[e].as_expr() if e in self.coefficients else 0
                             for e in edges])

    def evaluate(self, values, edges):
        return np.array([complex(self.coefficients[e].evaluate(values)) if e in self.coefficients
                         else 0j for e in edges])

    def to_json(self):
        return {'vertex': self.vertex, 'direction': self.direction, 'tilt': self.tilt,
                'closed': self.closed,
                'coefficients': {e: str(c) for e, c in self.coefficients.items()}}


def _ray_starts(surface, vertex, direction, tilt):
    corner = _RAYS[(direction, tilt)][0]
    return [sq for sq in surface.squares if surface.corners[(sq, corner)] == vertex]


def _walk(surface, start, direction, tilt):
    """Yields (edge, coefficient) along one turn of the cylinder, then the circumference."""
    _, slot, forward, move = _RAYS[(direction, tilt)]
    square, coefficient, steps = start, sympy.Integer(1), []
    while True:
        edge = surface.slots[(square, slot)]
        holonomy = surface.edges[edge].holonomy
        if forward:
            steps.append((edge, coefficient))
            coefficient = coefficient * holonomy
        else:
            steps.append((edge, -coefficient / holonomy))
            coefficient = coefficient / holonomy
        square = surface.neighbours[(square, move)]
        if square == start:
            return steps, sympy.cancel(coefficient)


def ray_sum(surface, start, direction, tilt):
    """The geometric series of the ray leaving the given square, as {edge: sympy expr}."""
    steps, circumference = _walk(surface, start, direction, tilt)
    if sympy.cancel(circumference - 1) == 0:
        raise errors.UnitCircumference(
            f"Cylinder through {start} in direction {direction}{tilt} has circumference 1",
            square=start, direction=direction)
    total = {}
    for edge, coefficient in steps:
        total[edge] = total.get(edge, 0) + coefficient / (1 - circumference)
    return total


def thimble_class(surface, vertex, direction, tilt='+', complex_=None):
    if (direction, tilt) not in _RAYS:
        raise errors.ResurgixError(f"Unknown direction {direction}{tilt}")
    complex_ = complex_ or build_complex(surface)
    starts = _ray_starts(surface, vertex, direction, tilt)
    if not starts or len(starts) > 2:
        raise errors.ResurgixError(
            f"Vertex {vertex} has {len(starts)} rays in direction {direction}; "
            "only regular points and simple zeros are supported", vertex=vertex)
    total = ray_sum(surface, starts[0], direction, tilt)
    if len(starts) == 2:
        for edge, coefficient in ray_sum(surface, starts[1], direction, tilt).items():
            total[edge] = total.get(edge, 0) - coefficient
    coefficients = {}
    for edge in complex_.edges:
        if edge in total and sympy.cancel(total[edge]) != 0:
            coefficients[edge] = _laurent(total[edge])
    result = ThimbleClass(vertex, direction, tilt, coefficients, False)
    closed = complex_.is_closed(result.vector(complex_.edges))
    if len(starts) == 2:
        assert closed, f"Thimble class of {vertex} in direction {direction}{tilt} is not closed"
    return dataclasses.replace(result, closed=closed)


def basis(surface, direction, tilt, complex_=None):
    complex_ = complex_ or build_complex(surface)
    return [thimble_class(surface, v, direction, tilt, complex_) for v in surface.vertices]


def quadrant_bases(quadrant):
    """(source, target) (direction, tilt) keys of the transition across a quadrant."""
    assert quadrant in (1, 2, 3, 4), f"Quadrant must be 1..4, got {quadrant}"
    return (DIRECTIONS[quadrant - 1], '+'), (DIRECTIONS[quadrant % 4], '-')


def axis_bases(direction):
    """(source, target) keys of the transition across the axis ray of a direction."""
    assert direction in DIRECTIONS, f"Unknown direction {direction}"
    return (direction, '-'), (direction, '+')


@dataclasses.dataclass(frozen=True, eq=False)
class TransitionMatrix:
    label: str
    vertices: tuple
    entries: tuple

    def as_matrix(self):
        return sympy.Matrix([[c.as_expr() for c in row] for row in self.entries])

    def evaluate(self, values):
        return mpmath.matrix([[c.evaluate(values) for c in row] for row in self.entries])

    def to_json(self):
        return {'label': self.label, 'vertices': list(self.vertices),
                'entries': [[str(c) for c in row] for row in self.entries]}


def random_point(variables, rng):
    return {sympy.Symbol(name): sympy.Integer(rng.randint(2, 9)) for name in variables}


def _solve_exact(system, rhs):
    system = DomainMatrix.from_Matrix(system).to_field()
    rhs = DomainMatrix.from_Matrix(rhs).to_field()
    system, rhs = system.unify(rhs)
    return system.lu_solve(rhs).to_Matrix().applyfunc(sympy.cancel)


def _transition(surface, source, target, label, seed=0):
    """A with target = source * A modulo boundaries of squares, columns indexed by vertex."""
    complex_ = build_complex(surface)
    edges = complex_.edges
    old = sympy.Matrix.hstack(*[c.vector(edges) for c in basis(surface, *source, complex_)])
    new = sympy.Matrix.hstack(*[c.vector(edges) for c in basis(surface, *target, complex_)])
    point = random_point(surface.variables, random.Random(seed))
    faces = [complex_.d2[:, k] for k in complex_.d2.subs(point).rref()[1]]
    system = sympy.Matrix.hstack(old, *faces)
    numeric = system.subs(point)
    rows = list(numeric.T.rref()[1])
    if len(rows) < system.cols:
        raise errors.RankDeficient(
            f"{label}: classes in direction {source[0]}{source[1]} are not independent "
            "modulo boundaries", rank=len(rows))
    solution = _solve_exact(system.extract(rows, list(range(system.cols))),
                            new.extract(rows, list(range(new.cols))))
    residual = (numeric * solution.subs(point) - new.subs(point)).applyfunc(sympy.nsimplify)
    if not residual.is_zero_matrix:
        raise errors.RankDeficient(
            f"{label}: classes in direction {target[0]}{target[1]} are not in the span of "
            f"direction {source[0]}{source[1]}")
    k = old.cols
    entries = tuple(tuple(_laurent(solution[i, j]) for j in range(k)) for i in range(k))
    logging.debug(f"Transition {label} on {surface.name} solved")
    return TransitionMatrix(label, surface.vertices, entries)


def transition_matrix(surface, quadrant, seed=0):
    source, target = quadrant_bases(quadrant)
    return _transition(surface, source, target, f"quadrant {quadrant}", seed)


def axis_matrix(surface, direction, seed=0):
    source, target = axis_bases(direction)
    return _transition(surface, source, target, f"axis {direction}", seed)


def monodromy_sequence(surface):
    """All eight transitions met by a counterclockwise turn starting from East."""
    sequence = []
    for quadrant in (1, 2, 3, 4):
        sequence.append(transition_matrix(surface, quadrant))
        sequence.append(axis_matrix(surface, DIRECTIONS[quadrant % 4]))
    return sequence


def monodromy_product(surface, point):
    """Product of the transitions over a full turn at a numeric point; the identity when
    the quadrant matrices form a cocycle."""
    product = mpmath.eye(len(surface.vertices))
    for matrix in monodromy_sequence(surface):
        product = product * matrix.evaluate(point)
    return product


def _numeric_holonomies(surface, values):
    subs = {sympy.Symbol(k): v for k, v in values.items()}
    return {name: complex(edge.holonomy.subs(subs)) for name, edge in surface.edges.items()}


def truncated_ray(surface, start, direction, tilt, holonomies, terms=ORACLE_TERMS):
    """Walks `terms` turns around the cylinder, summing coefficients numerically."""
    _, slot, forward, move = _RAYS[(direction, tilt)]
    edges = surface.edge_names
    total = np.zeros(len(edges), dtype=complex)
    square, coefficient, turns = start, 1 + 0j, 0
    while turns < terms:
        edge = surface.slots[(square, slot)]
        holonomy = holonomies[edge]
        if forward:
            total[edges.index(edge)] += coefficient
            coefficient *= holonomy
        else:
            total[edges.index(edge)] -= coefficient / holonomy
            coefficient /= holonomy
        square = surface.neighbours[(square, move)]
        if square == start:
            turns += 1
    return total


def truncated_class(surface, vertex, direction, tilt, holonomies, terms=ORACLE_TERMS):
    starts = _ray_starts(surface, vertex, direction, tilt)
    total = truncated_ray(surface, starts[0], direction, tilt, holonomies, terms)
    if len(starts) == 2:
        total = total - truncated_ray(surface, starts[1], direction, tilt, holonomies, terms)
    return total


def numeric_transition(surface, quadrant, values, terms=ORACLE_TERMS):
    """Transition matrix from truncated sums and a least squares solve, independent of
    the exact construction. Only meaningful where every ray series converges."""
    source, target = quadrant_bases(quadrant)
    holonomies = _numeric_holonomies(surface, values)
    old = np.column_stack([truncated_class(surface, v, *source, holonomies, terms)
                           for v in surface.vertices])
    new = np.column_stack([truncated_class(surface, v, *target, holonomies, terms)
                           for v in surface.vertices])
    subs = {sympy.Symbol(k): v for k, v in values.items()}
    faces = np.array(build_complex(surface).d2.subs(subs).evalf(), dtype=complex)
    system = np.hstack([old, faces])
    solution = np.linalg.lstsq(system, new, rcond=None)[0]
    return solution[:old.shape[1], :]


def novikov_point(rng):
    """A specialization where every quadrant 1 series converges: |a|, |b| in [0.6, 0.8]
    and f, g, s on the unit circle."""
    def _polar(radius):
        return complex(radius * np.exp(2j * np.pi * rng.uniform()))
    return {'a': _polar(rng.uniform(0.6, 0.8)), 'b': _polar(rng.uniform(0.6, 0.8)),
            'f': _polar(1), 'g': _polar(1), 's': _polar(1)}


def _specialization_error(matrix, surface, quadrant, point):
    symbolic = np.array(matrix.evaluate(point).tolist(), dtype=complex)
    numeric = numeric_transition(surface, quadrant, point)
    return float(np.max(np.abs(symbolic - numeric)))


def specialization_errors(surface, quadrant, points):
    """Largest entrywise gap between the exact matrix and the truncated-series oracle,
    one value per specialization point."""
    matrix = transition_matrix(surface, quadrant)
    errs = parallel.parallel_map(
        functools.partial(_specialization_error, matrix, surface, quadrant), points)
    logging.info(f"Quadrant {quadrant} of {surface.name}: worst oracle gap {max(errs):.3g} "
                 f"over {len(errs)} points")
    return errs
