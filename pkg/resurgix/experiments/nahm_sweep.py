"""Sacred wrapper around the comparison of Nahm sums with one saddle's prediction."""
# Since this gets wrapped by sacred, pylint will incorrectly identify variables
#   as being unused and not being given to functions.
# pylint: disable=unused-variable,no-value-for-parameter
import logging
import os
import tempfile

import pandas as pd
from sacred import Experiment

from resurgix.experiments import attach_observers
from resurgix.helper import log_utils, nahm, utils
from resurgix.helper.precision import DEFAULT_TOLERANCES, working_precision

experiment_name = "nahm_sweep"

ex = attach_observers(Experiment(experiment_name))


@ex.config  # Configuration is defined through local variables.
def cfg():
    """Config definitions for sacred"""
    data = "dominant"     # Nahm data file, or a bundled name
    Ns = [50, 100, 200, 400]
    K = 0                 # Truncation order of the saddle series
    point = 0             # Index of the critical point, largest growth first
    precision = None      # Bits, None for the default
    save_dir = None       # None for a temporary directory


@ex.capture
def choose_critical(data, point):
    nahm_data = nahm.read_nahm(data)
    crits = nahm.critical_solve(nahm_data, DEFAULT_TOLERANCES)
    assert 0 <= point < len(crits), f"No critical point {point}; found {len(crits)}"
    return nahm_data, crits[point]


@ex.capture
def sweep(nahm_data, crit, Ns, K):
    return nahm.saddle_sweep(nahm_data, crit, Ns, K)


@ex.automain  # Using automain to enable command line integration.
def run(_run, precision, save_dir):
    """Logs the relative deviation for each N and returns the fitted decay exponent."""
    save_dir = save_dir or tempfile.mkdtemp(prefix='nahm_sweep_')
    utils.make_dirs(save_dir)
    gitlogfile = os.path.join(save_dir, f"{experiment_name}.gitlog")
    logging.info(f"Saving git information to file {gitlogfile}")
    log_utils.log_git_info(gitlogfile)
    ex.add_artifact(gitlogfile)
    with working_precision(precision):
        nahm_data, crit = choose_critical()
        report = sweep(nahm_data, crit)

    for row in report['rows']:
        _run.log_scalar("relative_deviation", float(row['deviation']), row['N'])
    _run.log_scalar("decay_exponent", report['decay_exponent'])

    table = pd.DataFrame([{'N': row['N'], 'deviation': float(row['deviation'])}
                          for row in report['rows']])
    table_filename = os.path.join(save_dir, "deviations.csv")
    utils.save_df_csv_quoted(table, table_filename)
    report_filename = os.path.join(save_dir, "sweep.json")
    utils.save_to_json({'data': nahm_data, 'critical': crit, 'sweep': report}, report_filename)

    ex.add_artifact(table_filename)
    ex.add_artifact(report_filename)
    return report['decay_exponent']
