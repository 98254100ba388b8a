"""Sacred wrapper around the resurgence package of a scene over a ladder of series orders."""
# Since this gets wrapped by sacred, pylint will incorrectly identify variables
#   as being unused and not being given to functions.
# pylint: disable=unused-variable,no-value-for-parameter
import logging
import os
import tempfile

import pandas as pd
from sacred import Experiment

from resurgix.experiments import attach_observers
from resurgix.helper import borel, log_utils, utils, wcs
from resurgix.helper.precision import DEFAULT_TOLERANCES, working_precision
from resurgix.helper.scenes import read_scene

experiment_name = "resurgence_sweep"

ex = attach_observers(Experiment(experiment_name))


@ex.config  # Configuration is defined through local variables.
def cfg():
    """Config definitions for sacred"""
    scene = "airy"        # Scene file, or a bundled name
    orders = [16, 24, 32]
    precision = None      # Bits, None for the default
    save_dir = None       # None for a temporary directory


@ex.capture
def package_rows(scene, K):
    """One row per declared Stokes index of the package at order K."""
    pkg = wcs.package_from_scene(read_scene(scene), K, DEFAULT_TOLERANCES)
    singularities = sum(len(borel.detect_singularities(borel.borel(s, z), DEFAULT_TOLERANCES))
                        for s, z in zip(pkg.series, pkg.points))
    report = wcs.validate_package(pkg, DEFAULT_TOLERANCES)
    report['K'] = K
    logging.info(f"Order {K}: {singularities} singularities, "
                 f"{int(report['passed'].sum())} of {len(report)} Stokes indices validated")
    return singularities, report


@ex.automain  # Using automain to enable command line integration.
def run(_run, orders, precision, save_dir):
    """Logs detected singularities and validated Stokes constants per order; returns the
    fraction validated at the highest order."""
    save_dir = save_dir or tempfile.mkdtemp(prefix='resurgence_sweep_')
    utils.make_dirs(save_dir)
    gitlogfile = os.path.join(save_dir, f"{experiment_name}.gitlog")
    logging.info(f"Saving git information to file {gitlogfile}")
    log_utils.log_git_info(gitlogfile)
    ex.add_artifact(gitlogfile)
    reports = []
    with working_precision(precision):
        for K in orders:
            singularities, report = package_rows(K=K)
            _run.log_scalar("singularities", singularities, K)
            _run.log_scalar("validated", int(report['passed'].sum()), K)
            for row in report.itertuples():
                if pd.notna(row.alpha_int):
                    _run.log_scalar(f"alpha_{row.i}{row.j}", int(row.alpha_int), K)
            reports.append(report)

    table = pd.concat(reports, ignore_index=True)
    table_filename = os.path.join(save_dir, "stokes_constants.csv")
    utils.save_df_csv_quoted(table, table_filename)
    ex.add_artifact(table_filename)
    last = reports[-1]
    return float(last['passed'].mean()) if len(last) else 1.0
