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
""" Experiment configuration.

    A config file is a partial YAML overlay of DEFAULTS. Keys that do not
    exist in DEFAULTS are rejected before anything runs, and every value is
    coerced to the type of its default. The resolved tree is hashed so the
    hash can be stamped into every artifact.
"""
import copy
import hashlib
import json
import logging
import os
import numpy as np
import yaml

PRESET_DIR = os.path.join(os.path.dirname(__file__), 'data')


class ConfigError(ValueError):
    pass


def _diag(values):
    return np.diag(values).tolist()


def _gmm(weights, means, variances):
    return {
        'kind': 'gmm',
        'weights': weights,
        'means': means,
        'covariances': [_diag(v) for v in variances],
        'location': [],
        'scale': [],
    }


def _laplace(scale):
    return {
        'kind': 'laplace',
        'weights': [],
        'means': [],
        'covariances': [],
        'location': [0.0] * len(scale),
        'scale': scale,
    }


def _gaussian(mean, variances):
    return {
        'kind': 'gaussian',
        'weights': [],
        'means': mean,
        'covariances': _diag(variances),
        'location': [],
        'scale': [],
    }


_OPAQUE_PROCESS_VARIANCE = [1e-4, 1e-7, 1e-6, 1e-8, 1e-6]

DEFAULTS = {
    'seed': 0,
    'system': {
        # bicycle2dof | linear | opaque_vehicle
        'name': 'bicycle2dof',
        'steps': 500,
        'bicycle2dof': {
            'mass': 1412.0,
            'yaw_inertia': 1536.7,
            'lf': 1.06,
            'lr': 1.85,
            'tire_b': 10.0,
            'tire_c': 1.5,
            # 0.75 * mass * 9.81 / 2
            'tire_d': 5194.395,
            'vx': 15.0,
            'dt': 0.02,
            'steer_amplitude': 0.1,
            # 0.5 * 2 * pi / (500 * dt)
            'steer_frequency': 0.3141592653589793,
            'initial_mean': [0.0, 0.0],
            'initial_std': [0.01, 0.01],
        },
        'linear': {
            'A': [[0.9, 0.1], [0.0, 0.8]],
            'C': [[1.0, 0.0]],
            'dt': 1.0,
            'initial_mean': [0.0, 0.0],
            'initial_std': [0.1, 0.1],
        },
        'opaque_vehicle': {
            'mass': 1412.0,
            'sprung_mass': 1200.0,
            'yaw_inertia': 1536.7,
            'roll_inertia': 400.0,
            'lf': 1.06,
            'lr': 1.85,
            'track': 1.55,
            'cg_height': 0.55,
            'roll_arm': 0.5,
            'roll_stiffness': 60000.0,
            'roll_damping': 4000.0,
            'mu': 0.9,
            'tire_b': 10.0,
            'tire_c': 1.5,
            'load_sensitivity': 0.3,
            'drag': 0.4,
            'speed_target': 20.0,
            'speed_gain': 0.5,
            'slip_stiffness': 15.0,
            'steer_ramp': 0.02,
            'steer_ramp_time': 2.0,
            'steer_amplitude': 0.01,
            'steer_frequency': 1.5707963267948966,
            'dt': 0.02,
            'substeps': 4,
            'initial_mean': [20.0, 0.0, 0.0, 0.0, 0.0],
            'initial_std': [0.5, 0.005, 0.01, 0.002, 0.01],
        },
    },
    'noise': {
        'bicycle2dof': {
            'process': _gmm([0.8, 0.2], [[0.0, 0.0], [0.02, 0.05]],
                            [[1e-6, 1e-5], [4e-6, 4e-5]]),
            'measurement': _laplace([0.05, 0.005]),
        },
        'linear': {
            'process': _gaussian([0.0, 0.0], [0.01, 0.01]),
            'measurement': _gaussian([0.0], [0.1]),
        },
        'opaque_vehicle': {
            'process': _gmm([0.8, 0.2],
                            [[0.0] * 5, [0.005, 0.0005, 0.002, 0.0002, 0.002]],
                            [_OPAQUE_PROCESS_VARIANCE,
                             [4 * v for v in _OPAQUE_PROCESS_VARIANCE]]),
            'measurement': _laplace([0.05, 0.05, 0.05, 0.05, 0.1, 0.1, 0.005,
                                     0.1, 0.1]),
        },
    },
    'filter': {
        'ukf': {
            'alpha': 0.1,
            'beta': 2.0,
            'kappa': 0.0,
        },
        'pf': {
            'particles': 1000,
            'resample_threshold': 0.5,
        },
        'slf': {
            'window_length': 20,
            'hidden_layers': [256, 256, 256],
            'learning_rate': 1e-4,
            'batch_size': 20,
            'epochs': 20,
            # Window/target pairs over all epochs, one Adam update each; 0 means
            # train.max_steps, the DAOF budget.
            'transitions': 0,
            # Directory of trajectory CSVs written by `gen`; empty means
            # closed-loop simulation.
            'dataset_dir': '',
        },
    },
    'daof': {
        # v1 | v2
        'variant': 'v1',
        'v1': {
            'window_length': 20,
            'hidden_layers': [256, 256, 256],
        },
        'v2': {
            'window_length': 20,
            'hidden_layers': [256, 256, 256],
        },
    },
    'train': {
        'gamma': 0.99,
        'tau': 0.005,
        'actor_lr': 1e-4,
        'critic_lr': 1e-4,
        'critic_hidden_layers': [256, 256, 256],
        'batch_size': 20,
        'buffer_size': 1000000,
        'policy_delay': 2,
        'reward_scale': 1.0,
        'horizon': 500,
        'warmup_steps': 5000,
        'warmup_episodes': 10,
        'exploration_start': 0.1,
        'exploration_end': 0.01,
        'exploration_anneal_steps': 100000,
        'target_noise': 0.01,
        'target_noise_clip': 0.02,
        'max_steps': 500000,
        'eval_interval': 5000,
        'eval_runs': 5,
        'eval_steps': 500,
        'plateau_evals': 20,
        'plateau_tolerance': 0.005,
        'divergence_factor': 1000.0,
    },
    'bench': {
        'runs': 100,
        'steps': 500,
        'roster': [
            {'name': 'UKF', 'kind': 'ukf'},
            {'name': 'PF', 'kind': 'pf'},
            {'name': 'SLF', 'kind': 'slf', 'checkpoint': 'slf.ckpt'},
            {'name': 'DAOF-v1', 'kind': 'daof', 'checkpoint': 'daof_v1.ckpt'},
            {'name': 'DAOF-v2', 'kind': 'daof', 'checkpoint': 'daof_v2.ckpt'},
        ],
        'latency_calls': 10000,
        'latency_warmup': 100,
        'divergence_bound': 10.0,
        'threads': 1,
        'pf_particle_sweep': [],
        'ablation_lengths': [1, 5, 10, 20],
        # Directory holding daof_v1_N<k>.ckpt files; missing ones are trained.
        'ablation_dir': '',
    },
    'gen': {
        'trajectories': 10,
    },
}

ROSTER_KEYS = {'name', 'kind', 'checkpoint', 'particles'}
FILTER_KINDS = ('kf', 'kf_stationary', 'ukf', 'pf', 'slf', 'daof', 'zoh', 'oracle')
# Kinds that load a trained model.
CHECKPOINT_KINDS = ('slf', 'daof')


def _coerce_leaf(value, default, key):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, bool):
            pass
        elif isinstance(value, int):
            return value
        elif isinstance(value, float) and value.is_integer():
            return int(value)
        elif isinstance(value, str):
            try:
                number = float(value)
            except ValueError:
                pass
            else:
                if number.is_integer():
                    return int(number)
    elif isinstance(default, float):
        if isinstance(value, (int, float, str)) and not isinstance(value, bool):
            try:
                return float(value)
            except ValueError:
                pass
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    raise ConfigError('{}: expected {}, got {!r}'.format(
        key, type(default).__name__, value))


def _coerce_numbers(value, key):
    """Numeric leaves inside list values, which PyYAML may hand over as strings."""
    if isinstance(value, list):
        return [_coerce_numbers(v, key) for v in value]
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError('{}: non-numeric list entry {!r}'.format(key, value))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError('{}: non-numeric list entry {!r}'.format(key, value))
    return value


def _roster(value, key):
    if not isinstance(value, list):
        raise ConfigError('{}: expected a list of filters'.format(key))
    roster = []
    for i, entry in enumerate(value):
        if not isinstance(entry, dict) or 'name' not in entry or 'kind' not in entry:
            raise ConfigError('{}[{}]: each filter needs a name and a kind'.format(
                key, i))
        unknown = sorted(set(entry) - ROSTER_KEYS)
        if unknown:
            raise ConfigError('{}[{}]: unknown keys {}'.format(key, i, unknown))
        entry = dict(entry)
        entry['name'] = str(entry['name'])
        entry['kind'] = str(entry['kind'])
        if entry['kind'] not in FILTER_KINDS:
            raise ConfigError('{}[{}]: unknown filter kind {!r} for {}'.format(
                key, i, entry['kind'], entry['name']))
        if entry['kind'] in CHECKPOINT_KINDS and not entry.get('checkpoint'):
            raise ConfigError('{}[{}]: {} ({}) needs a checkpoint'.format(
                key, i, entry['name'], entry['kind']))
        if 'checkpoint' in entry:
            entry['checkpoint'] = str(entry['checkpoint'])
        if 'particles' in entry:
            entry['particles'] = _coerce_leaf(entry['particles'], 0,
                                              '{}[{}].particles'.format(key, i))
        roster.append(entry)
    names = [entry['name'] for entry in roster]
    if len(set(names)) != len(names):
        raise ConfigError('{}: filter names must be unique, got {}'.format(key, names))
    return roster


def _merge(base, overlay, prefix, unknown):
    for k, value in overlay.items():
        key = prefix + str(k)
        if k not in base:
            unknown.append(key)
            continue
        default = base[k]
        if key == 'bench.roster':
            base[k] = _roster(value, key)
        elif isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError('{}: expected a table, got {!r}'.format(key, value))
            _merge(default, value, key + '.', unknown)
        elif isinstance(default, list):
            if not isinstance(value, list):
                raise ConfigError('{}: expected a list, got {!r}'.format(key, value))
            base[k] = _coerce_numbers(value, key)
        else:
            base[k] = _coerce_leaf(value, default, key)


def _parse_override(text):
    if '=' not in text:
        raise ConfigError('override must look like key=value: {!r}'.format(text))
    key, raw = text.split('=', 1)
    value = yaml.safe_load(raw)
    tree = {}
    node = tree
    parts = key.strip().split('.')
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return tree


def _validate(config):
    system = config['system']['name']
    if system not in ('bicycle2dof', 'linear', 'opaque_vehicle'):
        raise ConfigError('system.name: unknown system {!r}'.format(system))
    if config['daof']['variant'] not in ('v1', 'v2'):
        raise ConfigError('daof.variant: expected v1 or v2, got {!r}'.format(
            config['daof']['variant']))
    for key, value in [('system.steps', config['system']['steps']),
                       ('bench.runs', config['bench']['runs']),
                       ('bench.steps', config['bench']['steps']),
                       ('train.batch_size', config['train']['batch_size']),
                       ('train.horizon', config['train']['horizon'])]:
        if value < 1:
            raise ConfigError('{}: must be positive, got {}'.format(key, value))
    if not 0.0 <= config['train']['gamma'] < 1.0:
        raise ConfigError('train.gamma: must lie in [0, 1)')
    if not 0.0 <= config['train']['tau'] <= 1.0:
        raise ConfigError('train.tau: must lie in [0, 1]')
    if config['filter']['slf']['epochs'] < 1:
        raise ConfigError('filter.slf.epochs: must be positive')
    if config['filter']['slf']['transitions'] < 0:
        raise ConfigError('filter.slf.transitions: must not be negative')


def resolve_config_path(path):
    """A path that does not exist is looked up among the bundled presets."""
    if os.path.exists(path):
        return path
    preset = os.path.join(PRESET_DIR, os.path.basename(path))
    if os.path.exists(preset):
        return preset
    raise ConfigError('config file not found: {}'.format(path))


def load_config(path=None, overrides=()):
    """ Resolve a config from DEFAULTS, an optional file and overrides.

    Args:
        path: YAML file or preset name, or None for the defaults.
        overrides: iterable of 'dotted.key=value' strings.

    Returns:
        the resolved config as a nested dict.

    Raises:
        ConfigError: unknown keys, badly typed values or a missing file.
    """
    config = copy.deepcopy(DEFAULTS)
    layers = []
    if path:
        with open(resolve_config_path(path)) as f:
            layer = yaml.safe_load(f.read()) or {}
        if not isinstance(layer, dict):
            raise ConfigError('{}: top level must be a table'.format(path))
        layers.append(layer)
    layers.extend(_parse_override(x) for x in overrides)
    unknown = []
    for layer in layers:
        _merge(config, layer, '', unknown)
    if unknown:
        raise ConfigError('unknown config keys: {}'.format(', '.join(unknown)))
    _validate(config)
    logging.debug('Resolved config %s', config_hash(config))
    return config


def config_hash(config):
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'))
    return hashlib.blake2b(canonical.encode('utf-8'), digest_size=16).hexdigest()


def write_config_snapshot(config, path):
    with open(path, 'w') as f:
        f.write('# config_hash: {}\n'.format(config_hash(config)))
        yaml.safe_dump(config, f, default_flow_style=False, sort_keys=True)
