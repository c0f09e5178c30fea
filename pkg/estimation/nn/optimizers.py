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

from collections import namedtuple
import numpy as np
from estimation.core import DimensionError
from .layers import NonFiniteError


class AdamState(namedtuple('AdamState', ['m', 'v', 'step', 'learning_rate',
                                         'beta1', 'beta2', 'epsilon'])):

    @classmethod
    def create(cls, params, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params],
                   0, float(learning_rate), beta1, beta2, epsilon)


def adam_step(params, grads, state, names=None):
    """ One bias-corrected Adam update.

    Args:
        params: list of parameter arrays.
        grads: matching list of gradients.
        state: AdamState.
        names: optional block names for error messages.

    Returns:
        (new_params, new_state)

    Raises:
        NonFiniteError: a gradient block contains NaN or Inf.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError('got {} params, {} grads and {} moment blocks'.format(
            len(params), len(grads), len(state.m)))
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise DimensionError('block {} has shape {} but gradient {}'.format(
                i, p.shape, g.shape))
        if not np.all(np.isfinite(g)):
            name = names[i] if names else 'block {}'.format(i)
            raise NonFiniteError('non-finite gradient in {}'.format(name))
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step
    correction2 = 1.0 - b2 ** step
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        update = (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        new_params.append(p - state.learning_rate * update)
        new_m.append(m)
        new_v.append(v)
    return new_params, state._replace(m=new_m, v=new_v, step=step)


def soft_update(target, online, tau):
    """target' = τ online + (1 − τ) target, for two MlpNets of equal shape."""
    if target.layer_dims != online.layer_dims:
        raise DimensionError('cannot blend nets {} and {}'.format(
            target.layer_dims, online.layer_dims))
    return target.with_params([
        tau * o + (1.0 - tau) * t
        for t, o in zip(target.params(), online.params())])
