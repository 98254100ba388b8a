"""The single worker pool. Modules hand their independent units of work to
parallel_map; only the command line decides how many workers run them."""
import logging

import joblib
import mpmath

_n_jobs = 1


def set_n_jobs(n_jobs):
    global _n_jobs
    assert n_jobs >= 1, f"Number of jobs must be positive, got {n_jobs}"
    _n_jobs = n_jobs
    logging.info(f"Worker pool set to {n_jobs} job(s)")


def get_n_jobs():
    return _n_jobs


def _call_at_precision(func, prec, item):
    with mpmath.mp.workprec(prec):
        return func(item)


def parallel_map(func, items):
    """Maps a picklable function over items, returning results in input order."""
    items = list(items)
    if _n_jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    logging.debug(f"Dispatching {len(items)} items to {_n_jobs} workers")
    prec = mpmath.mp.prec
    return joblib.Parallel(n_jobs=_n_jobs)(
        joblib.delayed(_call_at_precision)(func, prec, item) for item in items)
