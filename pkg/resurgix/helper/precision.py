"""Working precision and tolerance configuration."""
import contextlib
import dataclasses
import logging
import os

import mpmath

DEFAULT_PRECISION = 128
# Borel-Padé and Nahm computations on order-40 series need the extra bits
HIGH_PRECISION = 256


def default_precision():
    """Precision in bits from RESURGIX_PRECISION, falling back to 128."""
    value = os.environ.get('RESURGIX_PRECISION')
    if not value:
        return DEFAULT_PRECISION
    try:
        bits = int(value)
    except ValueError:
        logging.warning(f"Ignoring RESURGIX_PRECISION={value!r}: not an integer")
        return DEFAULT_PRECISION
    assert bits >= 53, f"Working precision must be at least 53 bits, got {bits}"
    return bits


mpmath.mp.prec = default_precision()


@contextlib.contextmanager
def working_precision(bits=None):
    """Runs the block at the given binary precision (default from the environment)."""
    if bits is None:
        bits = default_precision()
    with mpmath.mp.workprec(bits):
        yield bits


@contextlib.contextmanager
def at_least(bits):
    """Raises the working precision to `bits` for the block if it is currently lower."""
    with mpmath.mp.workprec(max(bits, mpmath.mp.prec)):
        yield mpmath.mp.prec


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances, overridable per run (see the --<module>.<name> CLI options)."""
    tol_newton: float = 1e-20
    tol_dedup: float = 1e-10
    tol_angle: float = 1e-8
    tol_degenerate: float = 1e-12
    tol_flow: float = 1e-10
    tol_quad: float = 1e-6
    tol_snap: float = 1e-2
    tol_fit: float = 1e-3
    tol_sing_rel: float = 0.05
    tol_cont: float = 1e-6
    tol_rh: float = 1e-8
    eps_seed: float = 1e-4
    eps_stokes: float = 1e-3
    eps_branch: float = 1e-30

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


DEFAULT_TOLERANCES = Tolerances()

# Which module each tolerance belongs to, for the namespaced command line options
TOLERANCE_NAMESPACES = {
    'landscape': ['tol_newton', 'tol_dedup', 'tol_angle', 'tol_degenerate'],
    'thimble': ['tol_flow', 'tol_quad', 'eps_seed', 'eps_stokes'],
    'borel': ['tol_snap', 'tol_fit', 'tol_sing_rel', 'tol_cont'],
    'wcs': ['tol_rh'],
    'numcore': ['eps_branch'],
}
