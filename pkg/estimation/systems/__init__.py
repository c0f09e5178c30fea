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

import numpy as np
from estimation.noise import noise_from_config
from .base import ExplicitSource, ExplicitSystem, OpaqueSource, simulate, collect
from .bicycle import BicycleParams, BicycleSystem
from .linear import LinearSystem
from .opaque_vehicle import OpaqueVehicleSource, VehicleParams

EXPLICIT_SYSTEMS = ['bicycle2dof', 'linear']
OPAQUE_SYSTEMS = ['opaque_vehicle']


def _initial_distribution(section):
    mean = np.asarray(section['initial_mean'], dtype=np.float64)
    std = np.asarray(section['initial_std'], dtype=np.float64)
    return mean, np.diag(std ** 2)


def _noises(config, name, n, m):
    section = config['noise'][name]
    return (noise_from_config(section['process'], n),
            noise_from_config(section['measurement'], m))


def has_explicit_model(config):
    return config['system']['name'] in EXPLICIT_SYSTEMS


def make_system(config):
    """ Build the ExplicitSystem named by `config['system']['name']`.

    Raises:
        ValueError: the named system has no explicit model.
    """
    name = config['system']['name']
    section = config['system'].get(name)
    if name == 'bicycle2dof':
        params = BicycleParams.from_config(section)
        mean, cov = _initial_distribution(section)
        process, measurement = _noises(config, name, 2, 2)
        return BicycleSystem(params, process, measurement, mean, cov)
    elif name == 'linear':
        A = np.atleast_2d(np.asarray(section['A'], dtype=np.float64))
        C = np.atleast_2d(np.asarray(section['C'], dtype=np.float64))
        mean, cov = _initial_distribution(section)
        process, measurement = _noises(config, name, A.shape[0], C.shape[0])
        return LinearSystem(A, C, process, measurement, mean, cov,
                            dt=section['dt'])
    elif name in OPAQUE_SYSTEMS:
        raise ValueError('system {} has no explicit model'.format(name))
    raise ValueError('unknown system: {}'.format(name))


def make_source(config):
    """Build an OpaqueSource for the configured system."""
    name = config['system']['name']
    if name in EXPLICIT_SYSTEMS:
        return ExplicitSource(make_system(config))
    elif name == 'opaque_vehicle':
        section = config['system'][name]
        params = VehicleParams(**{k: section[k] for k in VehicleParams._fields})
        params = params._replace(substeps=int(params.substeps))
        mean, cov = _initial_distribution(section)
        process, measurement = _noises(config, name, 5, 9)
        return OpaqueVehicleSource(params, process, measurement, mean, cov)
    raise ValueError('unknown system: {}'.format(name))
