# Copyright 2024 The Datatic Filtering Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
""" Plot-ready CSVs.

    Long-format tables that a plotting notebook can group directly:

    error_traces.csv     filter, run, step, t, err_<state>...
    rmse_boxplot.csv     filter, run, diverged, rmse_<state>...
    rmse_summary.csv     filter, state, min, q1, median, q3, max, mean
    training_curves.csv  label, step, eval_rmse_<i>..., wall_ms
"""
import logging
import os
import numpy as np
import pandas as pd
from estimation.core import FLOAT_FORMAT
from .report import five_number_summary


def error_traces(results, state_names):
    frames = []
    for name, runs in results.items():
        for result in runs:
            trajectory = result.trajectory
            errors = trajectory.estimates - trajectory.true_states
            frame = pd.DataFrame(errors, columns=['err_{}'.format(s) for s in state_names])
            frame.insert(0, 't', np.arange(len(trajectory)) * trajectory.dt)
            frame.insert(0, 'step', np.arange(len(trajectory)))
            frame.insert(0, 'run', result.run)
            frame.insert(0, 'filter', name)
            frames.append(frame)
    columns = ['filter', 'run', 'step', 't'] + ['err_{}'.format(s) for s in state_names]
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True)[columns]


def rmse_boxplot(report):
    frames = []
    for summary in report.filters:
        frame = pd.DataFrame(summary.rmse_runs,
                             columns=['rmse_{}'.format(s) for s in report.state_names])
        frame.insert(0, 'diverged', summary.diverged.astype(int))
        frame.insert(0, 'run', np.arange(len(frame)))
        frame.insert(0, 'filter', summary.name)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def rmse_summary(report):
    rows = []
    for summary in report.filters:
        kept = summary.rmse_runs[~summary.diverged]
        for i, state in enumerate(report.state_names):
            row = {'filter': summary.name, 'state': state}
            row.update(five_number_summary(kept[:, i]))
            rows.append(row)
    return pd.DataFrame(rows, columns=['filter', 'state', 'min', 'q1', 'median', 'q3',
                                       'max', 'mean'])


def curve_columns(log):
    """The columns DAOF and SLF logs share: step, eval_rmse_<i>..., wall_ms."""
    rmse = sorted([c for c in log.columns if c.startswith('eval_rmse_')],
                  key=lambda c: int(c[len('eval_rmse_'):]))
    return [c for c in ['step'] + rmse + ['wall_ms'] if c in log.columns]


def training_curves(logs):
    """ Stack training logs {label: DataFrame} into one long table. """
    frames = []
    for label, log in logs.items():
        log = pd.DataFrame(log)
        frame = log[curve_columns(log)].copy()
        frame.insert(0, 'label', label)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True, sort=False)


def _write(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logging.info('Wrote %s', path)


def emit_plot_data(report, results, plot_dir, training_logs=None):
    if not os.path.exists(plot_dir):
        os.makedirs(plot_dir)
    _write(error_traces(results, report.state_names),
           os.path.join(plot_dir, 'error_traces.csv'))
    _write(rmse_boxplot(report), os.path.join(plot_dir, 'rmse_boxplot.csv'))
    _write(rmse_summary(report), os.path.join(plot_dir, 'rmse_summary.csv'))
    if training_logs:
        _write(training_curves(training_logs), os.path.join(plot_dir, 'training_curves.csv'))
