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
""" Benchmark reports: per-filter RMSE, latency and divergence counts.

    Mean RMSE excludes divergent runs; their count is reported alongside.
"""
from collections import namedtuple
import json
import logging
import numpy as np
import pandas as pd
from estimation.core import FLOAT_FORMAT
from .rollout import run_rmse

FilterSummary = namedtuple('FilterSummary', ['name', 'rmse_mean', 'rmse_runs', 'diverged',
                                             'latency_ms', 'step_ms'])

BenchReport = namedtuple('BenchReport', ['state_names', 'filters', 'runs', 'steps',
                                         'config_hash', 'seeds', 'extra'])


def summarize(name, results, latency_ms=float('nan')):
    """ Collapse a list of RunResult into a FilterSummary.

    Args:
        name: roster name.
        results: RunResult list from `evaluate_filter`.
        latency_ms: separately measured per-call latency; the mean filter
            time per step inside the rollouts is kept as `step_ms`.
    """
    rmse_runs = np.array([run_rmse(r) for r in results])
    diverged = np.array([r.diverged for r in results], dtype=bool)
    kept = rmse_runs[~diverged]
    if len(kept):
        rmse_mean = kept.mean(axis=0)
    else:
        logging.warning('Every %s run diverged', name)
        rmse_mean = np.full(rmse_runs.shape[1], np.nan)
    filter_seconds = sum(r.timer.totals['filter'] for r in results)
    filter_calls = sum(r.timer.counts['filter'] for r in results)
    step_ms = 1000.0 * filter_seconds / filter_calls if filter_calls else float('nan')
    return FilterSummary(name, rmse_mean, rmse_runs, diverged, float(latency_ms), step_ms)


def overall_rmse(rmse_per_state):
    """sqrt of the mean squared per-state RMSE."""
    return float(np.sqrt(np.mean(np.square(rmse_per_state))))


def five_number_summary(values):
    """min, q1, median, q3, max and mean of the finite values."""
    values = pd.Series(np.asarray(values, dtype=np.float64))
    values = values[np.isfinite(values)]
    if values.empty:
        return dict.fromkeys(['min', 'q1', 'median', 'q3', 'max', 'mean'], float('nan'))
    return {'min': values.min(), 'q1': values.quantile(0.25), 'median': values.median(),
            'q3': values.quantile(0.75), 'max': values.max(), 'mean': values.mean()}


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def report_to_dict(report):
    filters = []
    for summary in report.filters:
        filters.append({
            'name': summary.name,
            'rmse_mean': dict(zip(report.state_names, summary.rmse_mean)),
            'rmse_runs': summary.rmse_runs,
            'diverged_runs': [i for i, d in enumerate(summary.diverged) if d],
            'divergent_count': int(np.sum(summary.diverged)),
            'latency_ms': summary.latency_ms,
            'step_ms': summary.step_ms,
            'rmse_summary': {state: five_number_summary(summary.rmse_runs[:, i])
                             for i, state in enumerate(report.state_names)},
        })
    return _clean({'state_names': report.state_names, 'runs': report.runs,
                   'steps': report.steps, 'config_hash': report.config_hash,
                   'seeds': report.seeds, 'filters': filters,
                   'extra': report.extra or {}})


def write_report_json(report, path):
    with open(path, 'w') as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)
    logging.info('Wrote report to %s', path)


def report_table(report):
    """ One row per filter: RMSE per state, latency and divergence count. """
    rows = []
    for summary in report.filters:
        row = {'filter': summary.name}
        for state, value in zip(report.state_names, summary.rmse_mean):
            row['rmse_{}'.format(state)] = value
        row['cost_ms'] = summary.latency_ms
        row['divergent'] = int(np.sum(summary.diverged))
        rows.append(row)
    columns = (['filter'] + ['rmse_{}'.format(s) for s in report.state_names] +
               ['cost_ms', 'divergent'])
    return pd.DataFrame(rows, columns=columns)


def write_table_csv(report, path):
    report_table(report).to_csv(path, index=False, float_format=FLOAT_FORMAT)
