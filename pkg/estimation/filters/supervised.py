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
""" Supervised-learning filter (SLF).

    An MLP regresses the true state from the flattened history window and is
    trained by plain mean squared error. Training windows are filled with the
    filter's own rolling estimates; the dataset is regenerated every epoch
    from the current net.
"""
from collections import namedtuple
import logging
import time
import numpy as np
from estimation.core import DimensionError, HistoryWindow, as_vector
from estimation.nn import (AdamState, MlpNet, NonFiniteError, Standardizer,
                           adam_step, checkpoint_load, checkpoint_save)
from estimation.systems.base import SourceExhausted
from .base import FilterState, OnlineFilter

SlfConfig = namedtuple('SlfConfig', ['hidden_layers', 'learning_rate', 'batch_size',
                                     'updates'])

SlfResult = namedtuple('SlfResult', ['model', 'adam_state', 'loss_trace'])


class SupervisedModel(namedtuple('SupervisedModel', ['net', 'input_scaler',
                                                     'target_scaler',
                                                     'window_length'])):

    def estimate(self, window):
        if window.flat_dim != self.net.input_dim:
            raise DimensionError('window has {} features, net expects {}'.format(
                window.flat_dim, self.net.input_dim))
        output = self.net(self.input_scaler.apply(window.flatten()))
        return self.target_scaler.invert(output)


def _as_arrays(dataset):
    if isinstance(dataset, tuple) and len(dataset) == 2 and isinstance(
            dataset[0], np.ndarray):
        inputs, targets = dataset
    else:
        if not dataset:
            raise ValueError('SLF dataset is empty')
        inputs = np.array([window.flatten() for window, _ in dataset])
        targets = np.array([np.asarray(x, dtype=np.float64) for _, x in dataset])
    inputs = np.atleast_2d(inputs)
    targets = np.atleast_2d(targets)
    if len(inputs) == 0 or len(inputs) != len(targets):
        raise ValueError('SLF dataset has {} inputs and {} targets'.format(
            len(inputs), len(targets)))
    return inputs, targets


def slf_train(dataset, net_config, rng, initial_model=None, adam_state=None):
    """ Fit the SLF net by Adam mini-batches on mean squared error.

    Args:
        dataset: sequence of (HistoryWindow, x_true) pairs, or a tuple of
            arrays (flat windows [B, D], targets [B, n]).
        net_config: SlfConfig.
        rng: Rng for initialization and batch sampling.
        initial_model: SupervisedModel to continue from; a fresh net and
            scalers fitted to this dataset are used when omitted.
        adam_state: optimizer state to continue from.

    Returns:
        SlfResult(model, adam_state, loss_trace)

    Raises:
        NonFiniteError: the loss became NaN or Inf.
    """
    inputs, targets = _as_arrays(dataset)
    if initial_model is None:
        input_scaler = Standardizer.fit(inputs)
        target_scaler = Standardizer.fit(targets)
        dims = [inputs.shape[1]] + list(net_config.hidden_layers) + [targets.shape[1]]
        net = MlpNet.create(dims, rng.child(0))
        window_length = None
    else:
        net, input_scaler, target_scaler, window_length = initial_model
    if adam_state is None:
        adam_state = AdamState.create(net.params(), net_config.learning_rate)
    scaled_inputs = input_scaler.apply(inputs)
    scaled_targets = target_scaler.apply(targets)
    batch = min(net_config.batch_size, len(inputs))
    names = net.param_names()
    batches = rng.child(1)
    loss_trace = []
    for step in range(net_config.updates):
        idx = batches.choice(len(inputs), size=batch, replace=False)
        output, cache = net.forward(scaled_inputs[idx])
        residual = output - scaled_targets[idx]
        loss = float(np.mean(residual ** 2))
        if not np.isfinite(loss):
            raise NonFiniteError('SLF loss became {} at update {} (last finite {})'.format(
                loss, step, loss_trace[-1] if loss_trace else None))
        grads, _ = net.backward(cache, 2.0 * residual / residual.size)
        params, adam_state = adam_step(net.params(), grads, adam_state, names)
        net = net.with_params(params)
        loss_trace.append(loss)
    model = SupervisedModel(net, input_scaler, target_scaler, window_length)
    return SlfResult(model, adam_state, loss_trace)


def slf_step(state, y, model):
    """Push (x̂_{t-1}, y_t) into the window and regress x̂_t from it."""
    window = state.belief.update(state.estimate, y)
    estimate = model.estimate(window)
    if not np.all(np.isfinite(estimate)):
        raise NonFiniteError('SLF estimate is non-finite at step {}'.format(state.t + 1))
    return FilterState(estimate, window, state.t + 1)


class SupervisedLearningFilter(OnlineFilter):

    def __init__(self, model):
        self.model = model

    def reset(self, initial_estimate, first_measurement, rng):
        window = HistoryWindow.padded(self.model.window_length, initial_estimate,
                                      first_measurement)
        return FilterState(as_vector(initial_estimate), window, 0)

    def step(self, state, measurement, rng):
        return slf_step(state, as_vector(measurement, name='measurement'), self.model)


def rollout_pairs(source, model, window_length, steps, seed):
    """ One closed-loop episode of (flat window, true state) pairs.

    Windows hold the model's own estimates; without a model the prior mean is
    held as the estimate.
    """
    x, y = source.reset(seed)
    prior = np.asarray(source.initial_mean, dtype=np.float64)
    window = HistoryWindow.padded(window_length, prior, y)
    estimate = prior
    inputs, targets = [], []
    for _ in range(1, steps):
        try:
            x, y = source.step()
        except SourceExhausted:
            break
        if source.diverged:
            break
        window = window.update(estimate, y)
        inputs.append(window.flatten())
        targets.append(x)
        if model is not None:
            estimate = model.estimate(window)
            if not np.all(np.isfinite(estimate)):
                raise NonFiniteError('SLF estimate is non-finite during data generation')
    return inputs, targets


def slf_transitions(config, daof_steps=None):
    """ Training transitions for the SLF, one Adam update each.

    This is the DAOF budget: the steps a DAOF run actually took when known,
    else `filter.slf.transitions`, else `train.max_steps`.
    """
    if daof_steps:
        return int(daof_steps)
    return int(config['filter']['slf']['transitions'] or config['train']['max_steps'])


def epoch_quotas(transitions, epochs):
    """Split `transitions` over `epochs` as evenly as possible."""
    if epochs < 1 or transitions < epochs:
        raise ValueError('cannot spread {} transitions over {} epochs'.format(
            transitions, epochs))
    base, extra = divmod(int(transitions), int(epochs))
    return [base + (1 if epoch < extra else 0) for epoch in range(epochs)]


def train_slf(source, settings, steps, transitions, rng, evaluate=None):
    """ Closed-loop SLF training.

    Each epoch regenerates its share of `transitions` window/target pairs
    with the current net and then takes one Adam update per pair, so the SLF
    sees the data volume and update count of a DAOF run of `transitions`
    steps.

    Args:
        source: OpaqueSource supplying truths and measurements.
        settings: the `filter.slf` config section.
        steps: episode length.
        transitions: total pairs over all epochs; see `slf_transitions`.
        rng: Rng.
        evaluate: optional callable(model) -> per-state RMSE list, called
            after every epoch.

    Returns:
        (SupervisedModel, log rows) where each row is a dict with step,
        episode, train_loss, eval_rmse_<i>... and wall_ms.
    """
    window_length = settings['window_length']
    model, adam_state = None, None
    rows = []
    total, episode = 0, 0
    start = time.perf_counter()
    for epoch, quota in enumerate(epoch_quotas(transitions, settings['epochs'])):
        inputs, targets = [], []
        while len(inputs) < quota:
            episode_inputs, episode_targets = rollout_pairs(source, model, window_length,
                                                            steps, rng.child(0).child(episode))
            if not episode_inputs:
                raise ValueError('source yielded no transitions in episode {}'.format(episode))
            episode += 1
            inputs.extend(episode_inputs)
            targets.extend(episode_targets)
        inputs, targets = inputs[:quota], targets[:quota]
        net_config = SlfConfig(settings['hidden_layers'], settings['learning_rate'],
                               settings['batch_size'], quota)
        result = slf_train((np.array(inputs), np.array(targets)), net_config,
                           rng.child(1).child(epoch), model, adam_state)
        model = result.model._replace(window_length=window_length)
        adam_state = result.adam_state
        total += quota
        row = {'step': total, 'episode': episode,
               'train_loss': float(np.mean(result.loss_trace[-100:]))}
        if evaluate is not None:
            for i, value in enumerate(evaluate(SupervisedLearningFilter(model))):
                row['eval_rmse_{}'.format(i)] = value
        row['wall_ms'] = 1000.0 * (time.perf_counter() - start)
        rows.append(row)
        logging.info('SLF epoch %d: %d samples, loss %.4g', epoch, quota, row['train_loss'])
    return model, rows


def save_slf(path, model, step=0, config_hash='', extra=None):
    metadata = {'kind': 'slf',
                'window_length': model.window_length,
                'input_scaler': model.input_scaler.to_dict(),
                'target_scaler': model.target_scaler.to_dict()}
    metadata.update(extra or {})
    checkpoint_save(path, model.net, step=step, config_hash=config_hash,
                    metadata=metadata)


def model_from_checkpoint(checkpoint):
    meta = checkpoint.metadata
    if meta.get('kind') != 'slf':
        raise ValueError('checkpoint holds a {} model, not an SLF'.format(meta.get('kind')))
    return SupervisedModel(checkpoint.net, Standardizer.from_dict(meta['input_scaler']),
                           Standardizer.from_dict(meta['target_scaler']),
                           int(meta['window_length']))


def load_slf(path):
    return model_from_checkpoint(checkpoint_load(path))
