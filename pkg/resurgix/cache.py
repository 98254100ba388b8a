"""Content-addressed cache of command results.

Each run is stored as the exact JSON text of its RunRecord under the joblib hash of the
canonicalized command configuration, so a cache hit returns byte-identical output.
"""
import dataclasses
import json
import logging
import os

import joblib

from resurgix import __version__
from resurgix.helper import utils

DEFAULT_CACHE_DIR = '.resurgix-cache'


@dataclasses.dataclass(frozen=True)
class RunRecord:
    command: str
    config_hash: str
    precision: int
    tolerances: dict
    wall_time: float
    outputs: object
    table: list = None
    n_jobs: int = 1
    version: str = __version__

    def to_json(self):
        return {field.name: getattr(self, field.name) for field in dataclasses.fields(self)}


def cache_directory(directory=None):
    """--cache-dir, then RESURGIX_CACHE, then .resurgix-cache."""
    return directory or os.environ.get('RESURGIX_CACHE') or DEFAULT_CACHE_DIR


def config_hash(command, config):
    """joblib hash of the configuration after a round trip through the result encoder."""
    canonical = json.loads(utils.dumps_json({'command': command, 'config': config,
                                             'version': __version__}))
    return joblib.hash(canonical)


class RunCache:
    def __init__(self, directory=None, enabled=True):
        self.directory = cache_directory(directory)
        self.enabled = enabled

    def path(self, key):
        return os.path.join(self.directory, f"{key}.json")

    def lookup(self, key):
        """The stored record text, or None on a miss. Corrupt entries are removed."""
        if not self.enabled:
            return None
        filename = self.path(key)
        if not os.path.exists(filename):
            logging.debug(f"Cache miss for {key}")
            return None
        with open(filename) as f:
            text = f.read()
        try:
            record = json.loads(text)
            assert record['config_hash'] == key, "hash does not match the file name"
            assert record['version'] == __version__, f"written by version {record['version']}"
        except (ValueError, KeyError, TypeError, AssertionError) as err:
            logging.warning(f"Ignoring corrupt cache entry {filename}: {err}")
            os.remove(filename)
            return None
        logging.info(f"Cache hit for {key}")
        return text

    def store(self, record):
        """Writes the record and returns its JSON text."""
        text = utils.dumps_json(record)
        if not self.enabled:
            return text
        utils.make_dirs(self.directory)
        filename = self.path(record.config_hash)
        partial = f"{filename}.{os.getpid()}.tmp"
        with open(partial, 'w') as f:
            f.write(text)
        os.replace(partial, filename)
        logging.info(f"Stored run {record.config_hash} in {self.directory}")
        return text
