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
""" Window-length ablation for DAOF-v1.

    For each N in `bench.ablation_lengths` a v1 policy is loaded from
    `<ablation_dir>/daof_v1_N<N>.ckpt` or, when that file is missing,
    trained and saved there. Each policy then runs the bench protocol.
"""
import copy
import logging
import os
import pandas as pd
from estimation import systems
from estimation.config import ConfigError, config_hash
from estimation.core import (FLOAT_FORMAT, Rng, read_training_log, training_log_path,
                             write_training_log)
from estimation.daof import V1, DaofFilter, load_daof, save_daof, train
from . import plot_data
from .benchmark import filter_latency
from .report import overall_rmse, summarize
from .rollout import evaluate_filter


def ablation_config(config, window_length):
    """A copy of `config` set up to train DAOF-v1 with window length N."""
    config = copy.deepcopy(config)
    config['daof']['variant'] = V1
    config['daof'][V1]['window_length'] = int(window_length)
    return config


def checkpoint_name(window_length):
    return 'daof_v1_N{}.ckpt'.format(window_length)


def load_or_train(config, window_length, checkpoint_dir):
    """ Returns (policy, training log or None when none was kept). """
    path = os.path.join(checkpoint_dir, checkpoint_name(window_length))
    if os.path.exists(path):
        policy = load_daof(path, systems.make_system(config))
        if policy.window_length != window_length:
            raise ConfigError('{} holds window length {}, expected {}'.format(
                path, policy.window_length, window_length))
        logging.info('Loaded %s', path)
        return policy, read_training_log(path)
    sub_config = ablation_config(config, window_length)
    digest = config_hash(sub_config)
    logging.info('Training DAOF-v1 with N=%d', window_length)
    result = train(sub_config, checkpoint_dir=checkpoint_dir, config_hash=digest)
    save_daof(path, result.policy, step=result.steps, config_hash=digest)
    write_training_log(result.log, training_log_path(path))
    return result.policy, result.log


def ablate_window(config, out_dir=None, checkpoint_dir=None, lengths=None, threads=None):
    """ RMSE and per-step cost of DAOF-v1 against window length.

    Args:
        config: resolved config; the system must have an explicit model.
        out_dir: where ablation.csv and plots/training_curves.csv go.
        checkpoint_dir: overrides `bench.ablation_dir`.
        lengths: overrides `bench.ablation_lengths`.
        threads: overrides `bench.threads`.

    Returns:
        DataFrame with columns N, rmse_<state>..., rmse, cost_ms, divergent.
    """
    if not systems.has_explicit_model(config):
        raise ConfigError('the window ablation trains DAOF-v1, which needs an explicit '
                          'model; system {} has none'.format(config['system']['name']))
    bench = config['bench']
    lengths = list(lengths or bench['ablation_lengths'])
    checkpoint_dir = checkpoint_dir or bench['ablation_dir'] or out_dir or '.'
    threads = bench['threads'] if threads is None else threads
    if not os.path.exists(checkpoint_dir):
        os.makedirs(checkpoint_dir)
    make_source = lambda: systems.make_source(config)
    source = make_source()
    state_names = list(source.state_names or ['x{}'.format(i) for i in range(source.n)])
    rng = Rng(config['seed'])
    rows, logs = [], {}
    for window_length in lengths:
        policy, log = load_or_train(config, window_length, checkpoint_dir)
        if log is not None:
            logs['N{}'.format(window_length)] = log
        make_filter = lambda: DaofFilter(policy)
        results = evaluate_filter(make_filter, make_source, bench['runs'], bench['steps'],
                                  rng.child(0), threads, bench['divergence_bound'],
                                  'DAOF-v1 N={}'.format(window_length))
        latency = filter_latency(make_filter, make_source, bench['latency_calls'],
                                 bench['latency_warmup'], rng.child(1))
        summary = summarize('N{}'.format(window_length), results, latency)
        row = {'N': window_length}
        for state, value in zip(state_names, summary.rmse_mean):
            row['rmse_{}'.format(state)] = value
        row['rmse'] = overall_rmse(summary.rmse_mean)
        row['cost_ms'] = latency
        row['divergent'] = int(summary.diverged.sum())
        logging.info('N=%d: RMSE %.4g, %.4g ms per step', window_length, row['rmse'], latency)
        rows.append(row)
    table = pd.DataFrame(rows, columns=['N'] + ['rmse_{}'.format(s) for s in state_names] +
                         ['rmse', 'cost_ms', 'divergent'])
    if out_dir:
        if not os.path.exists(out_dir):
            os.makedirs(out_dir)
        table.to_csv(os.path.join(out_dir, 'ablation.csv'), index=False,
                     float_format=FLOAT_FORMAT)
        if logs:
            plot_dir = os.path.join(out_dir, 'plots')
            if not os.path.exists(plot_dir):
                os.makedirs(plot_dir)
            plot_data.training_curves(logs).to_csv(
                os.path.join(plot_dir, 'training_curves.csv'), index=False,
                float_format=FLOAT_FORMAT)
    return table
