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
""" DAOF policies deployed as online filters.

    v1:  x̂_t = f(x̂_{t-1}, t-1) + offset + scale * π(h_t)
    v2:  x̂_t = offset + scale * π(h_t)

    π is the actor net applied to the standardized flat window. The offset
    and scale map the actor's normalized output to state units.
"""
from collections import namedtuple
import numpy as np
from estimation.core import DimensionError, HistoryWindow, as_vector
from estimation.filters.base import FilterState, OnlineFilter
from estimation.nn import NonFiniteError, Standardizer, checkpoint_load, checkpoint_save

V1 = 'v1'
V2 = 'v2'
VARIANTS = (V1, V2)


class NonFiniteEstimateError(NonFiniteError):
    """Actor output became NaN or Inf; `window` holds the offending input."""

    def __init__(self, message, window):
        super(NonFiniteEstimateError, self).__init__(message)
        self.window = window


class DaofPolicy(namedtuple('DaofPolicy', ['variant', 'actor', 'input_scaler',
                                           'action_offset', 'action_scale',
                                           'window_length', 'transition'])):
    """ Trained or training DAOF actor plus its fixed input/output scaling.

    `transition` is f(x, t) of the explicit system for v1 and None for v2.
    """

    @classmethod
    def create(cls, variant, actor, window_length, transition=None, input_scaler=None,
               action_offset=None, action_scale=None):
        if variant not in VARIANTS:
            raise ValueError('unknown DAOF variant: {}'.format(variant))
        if variant == V1 and transition is None:
            raise ValueError('DAOF-v1 needs the system transition map')
        n = actor.output_dim
        return cls(variant, actor,
                   input_scaler or Standardizer.identity(actor.input_dim),
                   np.zeros(n) if action_offset is None else as_vector(action_offset, n),
                   np.ones(n) if action_scale is None else as_vector(action_scale, n),
                   int(window_length), transition if variant == V1 else None)

    @property
    def n(self):
        return self.actor.output_dim

    def act(self, windows):
        """Normalized actor output for flat windows [D] or [B, D]."""
        return self.actor(self.input_scaler.apply(windows))

    def to_estimate(self, action, prev_estimate, t):
        update = self.action_offset + self.action_scale * action
        if self.variant == V1:
            return self.transition(prev_estimate, t - 1) + update
        return update

    def to_action(self, estimate, prev_estimate, t):
        """Inverse of `to_estimate`."""
        update = estimate
        if self.variant == V1:
            update = estimate - self.transition(prev_estimate, t - 1)
        return (update - self.action_offset) / self.action_scale

    def with_actor(self, actor):
        return self._replace(actor=actor)


def daof_estimate(policy, window, prev_estimate, t=1):
    """ Estimate x̂_t from h_t and x̂_{t-1}.

    Raises:
        DimensionError: the window does not match the actor input.
        NonFiniteEstimateError: the actor produced NaN or Inf.
    """
    if window.flat_dim != policy.actor.input_dim:
        raise DimensionError('window has {} features, actor expects {}'.format(
            window.flat_dim, policy.actor.input_dim))
    action = policy.act(window.flatten())
    if not np.all(np.isfinite(action)):
        raise NonFiniteEstimateError('DAOF actor output is non-finite at step {}'.format(t),
                                     window)
    return policy.to_estimate(action, np.asarray(prev_estimate, dtype=np.float64), t)


def daof_step(state, y, policy):
    window = state.belief.update(state.estimate, y)
    t = state.t + 1
    return FilterState(daof_estimate(policy, window, state.estimate, t), window, t)


class DaofFilter(OnlineFilter):

    def __init__(self, policy):
        self.policy = policy
        self.requires_model = policy.variant == V1

    def reset(self, initial_estimate, first_measurement, rng):
        window = HistoryWindow.padded(self.policy.window_length, initial_estimate,
                                      first_measurement)
        return FilterState(as_vector(initial_estimate), window, 0)

    def step(self, state, measurement, rng):
        return daof_step(state, as_vector(measurement, name='measurement'), self.policy)


def save_daof(path, policy, adam_state=None, step=0, config_hash='', extra=None):
    metadata = {'kind': 'daof',
                'variant': policy.variant,
                'window_length': policy.window_length,
                'input_scaler': policy.input_scaler.to_dict(),
                'action_offset': policy.action_offset.tolist(),
                'action_scale': policy.action_scale.tolist()}
    metadata.update(extra or {})
    checkpoint_save(path, policy.actor, adam_state=adam_state, step=step,
                    config_hash=config_hash, metadata=metadata)


def policy_from_checkpoint(checkpoint, system=None):
    """ Rebuild a DaofPolicy; v1 needs the ExplicitSystem it was trained on. """
    meta = checkpoint.metadata
    if meta.get('kind') != 'daof':
        raise ValueError('checkpoint holds a {} model, not a DAOF policy'.format(
            meta.get('kind')))
    variant = meta['variant']
    if variant == V1 and system is None:
        raise ValueError('DAOF-v1 checkpoint needs an explicit system model')
    return DaofPolicy.create(variant, checkpoint.net, int(meta['window_length']),
                             transition=system.transition if variant == V1 else None,
                             input_scaler=Standardizer.from_dict(meta['input_scaler']),
                             action_offset=meta['action_offset'],
                             action_scale=meta['action_scale'])


def load_daof(path, system=None):
    return policy_from_checkpoint(checkpoint_load(path), system)
