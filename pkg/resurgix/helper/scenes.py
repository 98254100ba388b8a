"""Reading exponential-integral scenes from INI files.

A scene file looks like

    [scene]
    vars = z
    f = z^3/3 - z
    vol = 1
    box = -3-3i : 3+3i
    seeds = 8
    precision = 128

`vol` is the density g of vol = g dz_1 ... dz_n; `box` holds one `lo : hi` complex pair per
variable, separated by `;`.
"""
import configparser
import dataclasses
import logging
import os

import mpmath

from resurgix.helper import errors
from resurgix.helper.expressions import HoloExpr, parse_expression
from resurgix.helper.precision import DEFAULT_PRECISION
from resurgix.helper import utils


@dataclasses.dataclass(frozen=True)
class Scene:
    name: str
    f: HoloExpr
    vol: HoloExpr
    box: tuple
    seeds_per_axis: int = 8
    precision: int = DEFAULT_PRECISION
    seed_box: tuple = None

    def __post_init__(self):
        assert self.f.n >= 1, "A scene needs at least one variable"
        assert len(self.box) == self.f.n, \
            f"Scene {self.name} has {self.f.n} variables but {len(self.box)} box ranges"
        if self.seed_box is None:
            object.__setattr__(self, 'seed_box', self.box)
        for lo, hi in self.box:
            if not (mpmath.mpc(lo).real < mpmath.mpc(hi).real and mpmath.mpc(lo).imag < mpmath.mpc(hi).imag):
                raise errors.ResurgixError(f"Empty search box {lo} : {hi} in scene {self.name}")

    @property
    def n(self):
        return self.f.n

    @property
    def variables(self):
        return self.f.variables

    def in_box(self, x, margin=0):
        """Whether a point lies in the search box, enlarged by `margin` on every side."""
        for value, (lo, hi) in zip(x, self.box):
            lo, hi, value = mpmath.mpc(lo), mpmath.mpc(hi), mpmath.mpc(value)
            if not (lo.real - margin <= value.real <= hi.real + margin
                    and lo.imag - margin <= value.imag <= hi.imag + margin):
                return False
        return True

    def box_scale(self):
        return max(abs(mpmath.mpc(hi) - mpmath.mpc(lo)) for lo, hi in self.box)

    def to_json(self):
        return {'name': self.name, 'vars': list(self.variables), 'f': str(self.f),
                'vol': str(self.vol), 'box': [[lo, hi] for lo, hi in self.box],
                'seed_box': [[lo, hi] for lo, hi in self.seed_box],
                'seeds': self.seeds_per_axis, 'precision': self.precision}


def make_scene(f, variables=None, vol='1', box=None, seeds_per_axis=8, precision=DEFAULT_PRECISION,
               name='scene', seed_box=None):
    """Builds a Scene from expression texts. The default box is [-4, 4] x [-4i, 4i] per variable."""
    f_expr = parse_expression(f, variables)
    vol_expr = parse_expression(vol, f_expr.variables)
    if box is None:
        box = [(mpmath.mpc(-4, -4), mpmath.mpc(4, 4))] * f_expr.n
    box = tuple((mpmath.mpc(lo), mpmath.mpc(hi)) for lo, hi in box)
    if seed_box is not None:
        seed_box = tuple((mpmath.mpc(lo), mpmath.mpc(hi)) for lo, hi in seed_box)
    return Scene(name, f_expr, vol_expr, box, seeds_per_axis, precision, seed_box)


def parse_box(text):
    box = []
    for item in text.split(';'):
        try:
            lo, hi = item.split(':')
        except ValueError:
            raise errors.ResurgixError(f"Box range {item!r} is not of the form 'lo : hi'")
        box.append((utils.parse_complex(lo), utils.parse_complex(hi)))
    return box


def read_scene(filename):
    """Reads a scene file. A bare name such as 'airy' refers to a bundled fixture."""
    if not os.path.exists(filename):
        bundled = utils.fixture_path(filename if filename.endswith('.scene') else filename + '.scene')
        if not os.path.exists(bundled):
            raise FileNotFoundError(f"No scene file {filename}")
        filename = bundled
    config = configparser.ConfigParser()
    config.read(filename)
    if 'scene' not in config:
        raise errors.ResurgixError(f"Scene file {filename} has no [scene] section")
    section = config['scene']
    variables = [name.strip() for name in section.get('vars', 'z').split(',')]
    name = os.path.splitext(os.path.basename(filename))[0]
    with mpmath.workprec(section.getint('precision', DEFAULT_PRECISION)):
        box = parse_box(section['box']) if 'box' in section else None
        seed_box = parse_box(section['seed_box']) if 'seed_box' in section else None
        scene = make_scene(section['f'], variables, section.get('vol', '1'), box,
                           section.getint('seeds', 8), section.getint('precision', DEFAULT_PRECISION),
                           name, seed_box)
    logging.info(f"Read scene {name} with f = {scene.f} in {scene.n} variable(s)")
    return scene


def bundled_scenes():
    """Names of the bundled scene fixtures."""
    return sorted(os.path.splitext(name)[0] for name in os.listdir(utils.DATA_DIR)
                  if name.endswith('.scene'))
