"""Serialization and file helpers shared across resurgix."""
import csv
import dataclasses
import fractions
import json
import logging
import os

import mpmath
from mpmath import libmp
import numpy as np
import sympy

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data')


def fixture_path(name):
    """Full filename of a bundled fixture, e.g. fixture_path('airy.scene')."""
    return os.path.join(DATA_DIR, name)


def number_to_str(value):
    """Decimal string with enough digits to round-trip at the current precision."""
    return mpmath.nstr(mpmath.mpf(value), libmp.repr_dps(mpmath.mp.prec),
                       min_fixed=-mpmath.inf, max_fixed=mpmath.inf)


def complex_to_dict(value):
    value = mpmath.mpc(value)
    return {'re': number_to_str(value.real), 'im': number_to_str(value.imag)}


def complex_from_dict(data):
    return mpmath.mpc(mpmath.mpf(data['re']), mpmath.mpf(data['im']))


def parse_complex(text):
    """Parses 'RE,IM', 'a+bi' or a plain real number into an mpc."""
    text = text.strip()
    if ',' in text:
        real, imag = text.split(',')
        return mpmath.mpc(mpmath.mpf(real), mpmath.mpf(imag))
    return mpmath.mpc(mpmath.mpmathify(text.replace('i', 'j')))


# pylint: disable-msg=arguments-differ,method-hidden
class ResultEncoder(json.JSONEncoder):
    """Custom encoder for mpmath, numpy, sympy and dataclass values."""
    def default(self, obj):
        if isinstance(obj, mpmath.mpc):
            return complex_to_dict(obj)
        if isinstance(obj, mpmath.mpf):
            return number_to_str(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, complex):
            return complex_to_dict(obj)
        if isinstance(obj, (fractions.Fraction, sympy.Basic)):
            return str(obj)
        if dataclasses.is_dataclass(obj):
            return {field.name: getattr(obj, field.name) for field in dataclasses.fields(obj)}
        if hasattr(obj, 'to_json'):
            return obj.to_json()
        if isinstance(obj, (set, frozenset, tuple)):
            return list(obj)
        return super(ResultEncoder, self).default(obj)


def dumps_json(object_to_save):
    """Deterministic JSON text (sorted keys) for an arbitrary result object."""
    return json.dumps(object_to_save, cls=ResultEncoder, indent=4, sort_keys=True)


def save_to_json(object_to_save, filename):
    """Save object to file, using a ResultEncoder."""
    with open(filename, 'w') as f:
        f.write(dumps_json(object_to_save))


def save_df_csv_quoted(data_frame, filename):
    """Saves a dataframe to a csv file, quoting everything to make it safer."""
    data_frame.to_csv(filename, header=True, index=False, quoting=csv.QUOTE_ALL)
    logging.info(f"Saved table with {len(data_frame)} rows to {filename}")


def make_dirs(directory):
    try:
        os.makedirs(directory)
    except FileExistsError:
        # directory already exists
        pass
    return directory
