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
""" Command line entry point: `python -m estimation <command> [flags]`.

    train   fit a DAOF policy (or an SLF with --model slf)
    eval    run the bench protocol on one stored checkpoint
    bench   compare the configured filter roster
    ablate  DAOF-v1 window-length ablation
    gen     write simulated trajectories as CSV files
"""
import argparse
import glob
import logging
import os
from common.run_config import RunConfig
from estimation import systems
from estimation.config import ConfigError, config_hash, load_config, write_config_snapshot
from estimation.core import (Rng, read_trajectory_csv, training_log_path, write_training_log,
                             write_trajectory_csv)
from estimation.daof import TrainingDivergenceError, save_daof, train
from estimation.filters import FilterDivergenceError, save_slf, slf_transitions, train_slf
from estimation.metrics import ablation, benchmark
from estimation.metrics.report import report_table, summarize
from estimation.metrics.rollout import evaluate_filter
from estimation.nn import checkpoint_load
from estimation.systems.base import TrajectorySource

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


def _log_table(table):
    for line in table.to_string(index=False).splitlines():
        logging.info('%s', line)


def slf_source(config):
    """ The SLF training source: stored trajectories from `filter.slf.dataset_dir`
        when set, else the configured system. """
    dataset_dir = config['filter']['slf']['dataset_dir']
    source = systems.make_source(config)
    if not dataset_dir:
        return source
    paths = sorted(glob.glob(os.path.join(dataset_dir, '*.csv')))
    if not paths:
        raise IOError('no trajectory CSVs in {}'.format(dataset_dir))
    logging.info('Training SLF on %d stored trajectories from %s', len(paths), dataset_dir)
    return TrajectorySource([read_trajectory_csv(p, dt=source.dt) for p in paths],
                            initial_mean=source.initial_mean)


def _daof_steps(path):
    """Steps recorded in a DAOF checkpoint, or None without one."""
    if not path:
        return None
    checkpoint = checkpoint_load(path)
    if checkpoint.metadata.get('kind') != 'daof':
        raise ConfigError('{} is not a DAOF checkpoint'.format(path))
    return checkpoint.step


def cmd_train(args, config, run):
    digest = config_hash(config)
    write_config_snapshot(config, run.path('config.yaml'))
    if args.model == 'slf':
        settings = config['train']
        make_source = lambda: systems.make_source(config)
        eval_rng = Rng(config['seed']).child(5)

        def evaluate(filter_):
            results = evaluate_filter(lambda: filter_, make_source, settings['eval_runs'],
                                      settings['eval_steps'], eval_rng, name='SLF')
            return list(summarize('SLF', results).rmse_mean)

        transitions = slf_transitions(config, _daof_steps(args.checkpoint))
        if transitions < config['filter']['slf']['epochs']:
            raise ConfigError('{} SLF transitions cannot fill {} epochs'.format(
                transitions, config['filter']['slf']['epochs']))
        logging.info('Training SLF on %d transitions', transitions)
        try:
            model, rows = train_slf(slf_source(config), config['filter']['slf'],
                                    settings['horizon'], transitions, Rng(config['seed']),
                                    evaluate)
        except FloatingPointError as err:
            raise TrainingDivergenceError('SLF training diverged: {}'.format(err))
        path = run.path('slf.ckpt')
        save_slf(path, model, step=rows[-1]['step'], config_hash=digest)
        write_training_log(rows, training_log_path(path))
    else:
        result = train(config, checkpoint_dir=run.root_path, config_hash=digest)
        path = run.path('daof_{}.ckpt'.format(result.policy.variant))
        save_daof(path, result.policy, step=result.steps, config_hash=digest,
                  extra={'score': result.score})
        write_training_log(result.log, training_log_path(path))
        logging.info('Best evaluation RMSE %.6g after %d steps', result.score, result.steps)
    logging.info('Saved %s', path)


def cmd_eval(args, config, run):
    if not args.checkpoint:
        raise ConfigError('eval needs --checkpoint')
    path = os.path.abspath(args.checkpoint)
    if not os.path.exists(path):
        raise IOError('checkpoint {} does not exist'.format(path))
    meta = checkpoint_load(path).metadata
    kind = meta.get('kind')
    if kind == 'daof':
        name = 'DAOF-{}'.format(meta['variant'])
    elif kind == 'slf':
        name = 'SLF'
    else:
        raise ConfigError('{} holds a {} model; eval takes daof or slf'.format(path, kind))
    config['bench']['roster'] = [{'name': name, 'kind': kind, 'checkpoint': path}]
    config['bench']['pf_particle_sweep'] = []
    _bench(config, run, None, args.threads)


def _bench(config, run, checkpoint_dir, threads):
    write_config_snapshot(config, run.path('config.yaml'))
    spec = benchmark.experiment_spec(config, run.root_path, checkpoint_dir, threads)
    report, _ = benchmark.run_experiment(spec)
    _log_table(report_table(report))
    return report


def cmd_bench(args, config, run):
    _bench(config, run, args.checkpoint_dir, args.threads)


def cmd_ablate(args, config, run):
    write_config_snapshot(config, run.path('config.yaml'))
    table = ablation.ablate_window(config, run.root_path, args.checkpoint_dir,
                                   threads=args.threads)
    _log_table(table)


def cmd_gen(args, config, run):
    write_config_snapshot(config, run.path('config.yaml'))
    rng = Rng(config['seed'])
    steps = config['system']['steps']
    count = config['gen']['trajectories']
    for k in range(count):
        trajectory = systems.collect(systems.make_source(config), steps, rng.child(k))
        if trajectory.diverged:
            logging.warning('Trajectory %d stopped early at %d steps', k, len(trajectory))
        write_trajectory_csv(trajectory, run.path('trajectory_{:04d}.csv'.format(k)))
    logging.info('Wrote %d trajectories of %d steps', count, steps)


COMMANDS = {
    'train': cmd_train,
    'eval': cmd_eval,
    'bench': cmd_bench,
    'ablate': cmd_ablate,
    'gen': cmd_gen,
}


def parse_args(argv=None):
    """ Parses command-line arguments."""
    argparser = argparse.ArgumentParser('Datatic approximate optimal filtering lab.')
    argparser.add_argument('command', choices=sorted(COMMANDS))

    argparser.add_argument(
        '--config', help='YAML config file or bundled preset name.')

    argparser.add_argument(
        '--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
        help='Override one config value, e.g. train.gamma=0.99. Repeatable.')

    argparser.add_argument('--seed', type=int, help='Overrides the config seed.')

    argparser.add_argument(
        '--out', help='Output directory; defaults to runs/<command>_<timestamp>.')

    argparser.add_argument(
        '--threads', type=int,
        help='Evaluation worker threads; overrides bench.threads.')

    argparser.add_argument('--runs', type=int, help='Monte Carlo runs; overrides bench.runs.')

    argparser.add_argument('--steps', type=int, help='Steps per run; overrides bench.steps.')

    argparser.add_argument(
        '--model', default='daof', choices=['daof', 'slf'],
        help='What `train` fits.')

    argparser.add_argument(
        '--checkpoint',
        help='Checkpoint evaluated by `eval`; for `train --model slf`, a DAOF checkpoint '
        'whose step count sets the SLF training budget.')

    argparser.add_argument(
        '--checkpoint_dir',
        help='Directory relative roster checkpoints (bench) or ablation checkpoints '
             '(ablate) are resolved against.')

    argparser.add_argument('--verbose', action='store_true', help='Log at DEBUG level.')

    return argparser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(format='%(asctime)s %(levelname)s %(message)s')
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append('seed={}'.format(args.seed))
    if args.threads is not None:
        overrides.append('bench.threads={}'.format(args.threads))
    for key in ['runs', 'steps']:
        if getattr(args, key) is not None:
            overrides.append('bench.{}={}'.format(key, getattr(args, key)))
    try:
        config = load_config(args.config, overrides)
        run = RunConfig.make(args.command, args.out)
        COMMANDS[args.command](args, config, run)
    except (ConfigError, benchmark.ScenarioMismatchError) as err:
        logging.error('Configuration error: %s', err)
        return EXIT_CONFIG
    except (TrainingDivergenceError, FilterDivergenceError) as err:
        logging.error('Diverged: %s', err)
        return EXIT_DIVERGENCE
    except (IOError, OSError) as err:
        logging.error('I/O error: %s', err)
        return EXIT_IO
    return EXIT_OK
