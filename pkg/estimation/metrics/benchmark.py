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
""" Monte Carlo comparison of a filter roster on one system.

    Every roster entry is resolved and checked against the scenario before
    any run starts. All filters see the same trajectories: run k of every
    filter draws from `Rng(seed).child(0).child(k)`.
"""
from collections import namedtuple
import logging
import os
import re
from estimation import systems
from estimation.config import CHECKPOINT_KINDS, ConfigError, config_hash
from estimation.core import Rng, read_training_log, write_trajectory_csv
from estimation.daof import DaofFilter, policy_from_checkpoint
from estimation.filters import (KalmanFilter, OracleFilter, ParticleFilter,
                                StationaryKalmanFilter, SupervisedLearningFilter,
                                UnscentedKalmanFilter, ZeroOrderHold)
from estimation.filters.supervised import model_from_checkpoint
from estimation.nn import checkpoint_load
from estimation.systems.linear import LinearSystem
from . import plot_data
from .report import BenchReport, summarize, write_report_json, write_table_csv
from .rollout import evaluate_filter
from .timing import measure_latency, stepping_call


class ScenarioMismatchError(ValueError):
    pass


ExperimentSpec = namedtuple('ExperimentSpec', ['config', 'roster', 'runs', 'steps', 'seed',
                                               'out_dir', 'checkpoint_dir', 'threads'])


def experiment_spec(config, out_dir=None, checkpoint_dir=None, threads=None):
    bench = config['bench']
    roster = list(bench['roster'])
    for particles in bench['pf_particle_sweep']:
        roster.append({'name': 'PF-{}'.format(particles), 'kind': 'pf',
                       'particles': particles})
    return ExperimentSpec(config, roster, bench['runs'], bench['steps'], config['seed'],
                          out_dir, checkpoint_dir,
                          bench['threads'] if threads is None else threads)


def resolve_checkpoint(entry, checkpoint_dir):
    path = entry.get('checkpoint')
    if not path:
        raise ConfigError('roster entry {} needs a checkpoint'.format(entry['name']))
    if not os.path.isabs(path) and checkpoint_dir:
        path = os.path.join(checkpoint_dir, path)
    if not os.path.exists(path):
        raise IOError('checkpoint {} for filter {} does not exist'.format(path, entry['name']))
    return path


def _explicit_system(entry, spec):
    if not systems.has_explicit_model(spec.config):
        raise ScenarioMismatchError(
            '{} ({}) needs an explicit system model, but {} is an opaque source'.format(
                entry['name'], entry['kind'], spec.config['system']['name']))
    return systems.make_system(spec.config)


def _linear_system(entry, spec):
    system = _explicit_system(entry, spec)
    if not isinstance(system, LinearSystem):
        raise ScenarioMismatchError('{} ({}) runs on linear systems only'.format(
            entry['name'], entry['kind']))
    return system


def _kf(entry, spec):
    system = _linear_system(entry, spec)
    return lambda: KalmanFilter(system)


def _kf_stationary(entry, spec):
    system = _linear_system(entry, spec)
    gain = StationaryKalmanFilter(system).gain
    return lambda: StationaryKalmanFilter(system, gain)


def _ukf(entry, spec):
    system = _explicit_system(entry, spec)
    params = spec.config['filter']['ukf']
    return lambda: UnscentedKalmanFilter(system, params['alpha'], params['beta'],
                                         params['kappa'])


def _pf(entry, spec):
    system = _explicit_system(entry, spec)
    params = spec.config['filter']['pf']
    particles = entry.get('particles') or params['particles']
    return lambda: ParticleFilter(system, particles, params['resample_threshold'])


def _slf(entry, spec):
    model = model_from_checkpoint(checkpoint_load(resolve_checkpoint(entry,
                                                                     spec.checkpoint_dir)))
    return lambda: SupervisedLearningFilter(model)


def _daof(entry, spec):
    checkpoint = checkpoint_load(resolve_checkpoint(entry, spec.checkpoint_dir))
    system = None
    if checkpoint.metadata.get('variant') == 'v1':
        system = _explicit_system(entry, spec)
    policy = policy_from_checkpoint(checkpoint, system)
    return lambda: DaofFilter(policy)


FILTER_FACTORIES = {
    'kf': _kf,
    'kf_stationary': _kf_stationary,
    'ukf': _ukf,
    'pf': _pf,
    'slf': _slf,
    'daof': _daof,
    'zoh': lambda entry, spec: ZeroOrderHold,
    'oracle': lambda entry, spec: OracleFilter,
}


def build_roster(spec):
    """ [(name, make_filter)] for every roster entry, validated up front. """
    roster = []
    for entry in spec.roster:
        kind = entry['kind']
        if kind not in FILTER_FACTORIES:
            raise ConfigError('unknown filter kind {} for {}'.format(kind, entry['name']))
        roster.append((entry['name'], FILTER_FACTORIES[kind](entry, spec)))
    names = [name for name, _ in roster]
    if len(set(names)) != len(names):
        raise ConfigError('roster names must be unique: {}'.format(names))
    return roster


def filter_latency(make_filter, make_source, calls, warmup, rng):
    """ Per-call latency on one recorded trajectory, single threaded. """
    trajectory = systems.collect(make_source(), 500, rng.child(0))
    source = make_source()
    filter_ = make_filter()
    call = stepping_call(filter_, source.initial_mean, trajectory.measurements, rng.child(1),
                         truths=trajectory.true_states)
    return measure_latency(call, calls, warmup)


def _file_label(name):
    return re.sub(r'[^A-Za-z0-9_.-]+', '_', name)


def training_logs(spec):
    """ {name: training log} for roster entries with a log next to their checkpoint. """
    logs = {}
    for entry in spec.roster:
        if entry['kind'] in CHECKPOINT_KINDS:
            log = read_training_log(resolve_checkpoint(entry, spec.checkpoint_dir))
            if log is not None:
                logs[entry['name']] = log
    return logs


def write_outputs(report, results, out_dir, logs=None):
    """ report.json, table.csv, raw/run_<k>_<filter>.csv and plots/*.csv. """
    raw_dir = os.path.join(out_dir, 'raw')
    plot_dir = os.path.join(out_dir, 'plots')
    for path in [out_dir, raw_dir, plot_dir]:
        if not os.path.exists(path):
            os.makedirs(path)
    write_report_json(report, os.path.join(out_dir, 'report.json'))
    write_table_csv(report, os.path.join(out_dir, 'table.csv'))
    for name, runs in results.items():
        for result in runs:
            write_trajectory_csv(result.trajectory, os.path.join(
                raw_dir, 'run_{}_{}.csv'.format(result.run, _file_label(name))))
    plot_data.emit_plot_data(report, results, plot_dir, logs)


def run_experiment(spec):
    """ Run the roster under the Monte Carlo protocol.

    Returns:
        (BenchReport, {name: [RunResult]})

    Raises:
        ScenarioMismatchError: a roster entry cannot run on the system.
        IOError: a referenced checkpoint is missing.
    """
    config = spec.config
    roster = build_roster(spec)
    bench = config['bench']
    make_source = lambda: systems.make_source(config)
    rng = Rng(spec.seed)
    summaries, results = [], {}
    for name, make_filter in roster:
        logging.info('Running %s: %d runs x %d steps', name, spec.runs, spec.steps)
        runs = evaluate_filter(make_filter, make_source, spec.runs, spec.steps, rng.child(0),
                               spec.threads, bench['divergence_bound'], name)
        latency = filter_latency(make_filter, make_source, bench['latency_calls'],
                                 bench['latency_warmup'], rng.child(1))
        summary = summarize(name, runs, latency)
        logging.info('%s: RMSE %s, %.4g ms per step, %d divergent runs', name,
                     summary.rmse_mean, latency, summary.diverged.sum())
        summaries.append(summary)
        results[name] = runs
    source = make_source()
    state_names = list(source.state_names or ['x{}'.format(i) for i in range(source.n)])
    seeds = [[spec.seed] + list(rng.child(0).child(k).stream) for k in range(spec.runs)]
    report = BenchReport(state_names, summaries, spec.runs, spec.steps, config_hash(config),
                         seeds, {'system': config['system']['name']})
    if spec.out_dir:
        write_outputs(report, results, spec.out_dir, training_logs(spec))
    return report, results
