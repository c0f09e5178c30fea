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
""" Actor-critic training of DAOF policies.

    Twin critics with clipped double-Q targets, target-policy smoothing and a
    delayed actor update. Every environment step after warm-up runs one
    critic update; every `policy_delay` critic updates run one actor update
    followed by soft updates of all target nets.
"""
from collections import namedtuple
import logging
import os
import time
import numpy as np
import pandas as pd
from estimation import systems
from estimation.config import ConfigError
from estimation.core import Rng
from estimation.metrics.report import overall_rmse
from estimation.nn import AdamState, MlpNet, Standardizer, adam_step, soft_update
from .environment import MfpEnv
from .evaluation import evaluation_rmse
from .objectives import actor_loss, critic_input, critic_loss
from .policy import V1, DaofFilter, DaofPolicy, NonFiniteEstimateError, save_daof
from .replay import ReplayBuffer

MIN_ACTION_SCALE = 1e-6

TRAIN_KEYS = ['gamma', 'tau', 'actor_lr', 'critic_lr', 'critic_hidden_layers', 'batch_size',
              'buffer_size', 'policy_delay', 'reward_scale', 'horizon', 'warmup_steps',
              'warmup_episodes', 'exploration_start', 'exploration_end',
              'exploration_anneal_steps', 'target_noise', 'target_noise_clip', 'max_steps',
              'eval_interval', 'eval_runs', 'eval_steps', 'plateau_evals',
              'plateau_tolerance', 'divergence_factor']


class TrainConfig(namedtuple('TrainConfig', ['variant', 'window_length', 'hidden_layers'] +
                             TRAIN_KEYS)):

    @classmethod
    def from_config(cls, config):
        variant = config['daof']['variant']
        section = config['daof'][variant]
        return cls(variant, section['window_length'], list(section['hidden_layers']),
                   *[config['train'][key] for key in TRAIN_KEYS])


WarmupStats = namedtuple('WarmupStats', ['input_scaler', 'action_offset', 'action_scale'])

TrainResult = namedtuple('TrainResult', ['policy', 'log', 'learner', 'steps', 'score'])


class TrainingDivergenceError(RuntimeError):
    """Evaluation RMSE blew up; `checkpoint_path` holds the dumped policy."""

    def __init__(self, message, checkpoint_path=None):
        super(TrainingDivergenceError, self).__init__(message)
        self.checkpoint_path = checkpoint_path


def exploration_sigma(step, settings):
    """Linear anneal from exploration_start to exploration_end."""
    fraction = min(1.0, step / float(max(1, settings.exploration_anneal_steps)))
    return (settings.exploration_start +
            fraction * (settings.exploration_end - settings.exploration_start))


def plateaued(scores, evals, tolerance):
    """ True once the last `evals` scores improve on the one before them by
        less than `tolerance` in total (relative). """
    if len(scores) <= evals:
        return False
    reference = scores[-evals - 1]
    if not np.isfinite(reference) or reference <= 0:
        return False
    return reference - min(scores[-evals:]) < tolerance * reference


def warmup_statistics(env, variant, transition, episodes, rng):
    """ Input and action scaling from zero-policy episodes.

    The zero policy predicts open loop with f for v1 and holds the prior
    mean for v2. v1 actions are scaled by the RMS of x_t − f(x̂_{t-1}); v2
    actions by the mean and standard deviation of the true states.
    """
    windows, truths, residuals = [], [], []
    for episode in range(episodes):
        window = env.reset(rng.child(episode))
        while not env.done:
            prev = window.newest_estimate
            if variant == V1:
                estimate = transition(prev, env.t - 1)
                residuals.append(env.truth - estimate)
            else:
                estimate = prev
            windows.append(window.flatten())
            truths.append(env.truth)
            window = env.step(estimate).window
    if not windows:
        raise ValueError('warm-up produced no transitions')
    input_scaler = Standardizer.fit(np.array(windows))
    if variant == V1:
        offset = np.zeros(env.n)
        scale = np.sqrt(np.mean(np.square(residuals), axis=0))
    else:
        offset = np.mean(truths, axis=0)
        scale = np.std(truths, axis=0)
    logging.info('Action scale %s, offset %s', scale, offset)
    return WarmupStats(input_scaler, offset, np.maximum(scale, MIN_ACTION_SCALE))


def standardize_batch(batch, scaler):
    return batch._replace(windows=scaler.apply(batch.windows),
                          next_windows=scaler.apply(batch.next_windows))


class Learner(object):
    """ Nets, targets and Adam states of the twin-critic actor-critic.

    Works on standardized batches; see `standardize_batch`.
    """

    def __init__(self, actor, critics, settings, rng):
        self.settings = settings
        self.rng = rng
        self.actor = actor
        self.actor_target = actor.copy()
        self.critics = list(critics)
        self.critic_targets = [critic.copy() for critic in self.critics]
        self.actor_adam = AdamState.create(actor.params(), settings.actor_lr)
        self.critic_adams = [AdamState.create(c.params(), settings.critic_lr)
                             for c in self.critics]
        self.updates = 0

    def q_value(self, windows, actions):
        return self.critics[0](critic_input(windows, actions))

    def update_critics(self, batch):
        s = self.settings
        result = critic_loss(batch, self.critics, self.critic_targets, self.actor_target,
                             s.gamma, reward_scale=s.reward_scale, rng=self.rng,
                             target_noise=s.target_noise,
                             target_noise_clip=s.target_noise_clip)
        for i, critic in enumerate(self.critics):
            params, self.critic_adams[i] = adam_step(critic.params(), result.grads[i],
                                                     self.critic_adams[i],
                                                     critic.param_names())
            self.critics[i] = critic.with_params(params)
        self.updates += 1
        return float(np.mean(result.losses))

    def update_actor(self, batch):
        s = self.settings
        result = actor_loss(batch.windows, self.actor, self.critics[0])
        params, self.actor_adam = adam_step(self.actor.params(), result.grads,
                                            self.actor_adam, self.actor.param_names())
        self.actor = self.actor.with_params(params)
        self.actor_target = soft_update(self.actor_target, self.actor, s.tau)
        self.critic_targets = [soft_update(target, critic, s.tau)
                               for target, critic in zip(self.critic_targets, self.critics)]
        return result.loss

    def update(self, batch):
        """ One critic update, plus an actor update every `policy_delay`.

        Returns:
            (critic loss, actor loss or None)
        """
        critic_value = self.update_critics(batch)
        actor_value = None
        if self.updates % self.settings.policy_delay == 0:
            actor_value = self.update_actor(batch)
        return critic_value, actor_value


def build_learner(settings, window_dim, n, rng):
    actor = MlpNet.create([window_dim] + list(settings.hidden_layers) + [n], rng.child(0))
    critics = [MlpNet.create([window_dim + n] + list(settings.critic_hidden_layers) + [1],
                             rng.child(1 + i))
               for i in range(2)]
    return Learner(actor, critics, settings, rng.child(3))


def _mean_or_nan(values):
    return float(np.mean(values)) if values else float('nan')


def _dump(checkpoint_dir, policy, learner, step, config_hash, reason):
    if not checkpoint_dir:
        return None
    path = os.path.join(checkpoint_dir, 'diverged.ckpt')
    save_daof(path, policy, learner.actor_adam, step, config_hash, extra={'reason': reason})
    logging.error('Dumped diverged policy to %s', path)
    return path


def train(config, make_source=None, checkpoint_dir=None, config_hash=''):
    """ Train a DAOF policy.

    Args:
        config: resolved config dict.
        make_source: callable returning a fresh OpaqueSource; built from the
            config when omitted.
        checkpoint_dir: where a diverged policy is dumped.
        config_hash: recorded in dumped checkpoints.

    Returns:
        TrainResult(policy, log, learner, steps, score); `policy` is the one
        with the best evaluation score and `log` a DataFrame.

    Raises:
        ConfigError: v1 requested on a system without an explicit model.
        TrainingDivergenceError: evaluation RMSE exceeded divergence_factor
            times its initial value, or training hit a non-finite value.
    """
    settings = TrainConfig.from_config(config)
    rng = Rng(config['seed'])
    transition = None
    if settings.variant == V1:
        if not systems.has_explicit_model(config):
            raise ConfigError('DAOF-v1 needs an explicit transition model; system {} '
                              'has none'.format(config['system']['name']))
        transition = systems.make_system(config).transition
    if make_source is None:
        make_source = lambda: systems.make_source(config)
    env = MfpEnv(make_source(), settings.window_length, settings.horizon, settings.gamma)
    n, window_dim = env.n, settings.window_length * (env.n + env.m)

    stats = warmup_statistics(env, settings.variant, transition, settings.warmup_episodes,
                              rng.child(0))
    learner = build_learner(settings, window_dim, n, rng.child(1))
    policy = DaofPolicy.create(settings.variant, learner.actor, settings.window_length,
                               transition, *stats)
    buffer = ReplayBuffer(settings.buffer_size, settings.window_length, env.n, env.m)
    episode_rng, explore_rng, batch_rng = rng.child(2), rng.child(3), rng.child(4)
    eval_rng = rng.child(5)

    def evaluate(candidate):
        return evaluation_rmse(lambda: DaofFilter(candidate), make_source,
                               settings.eval_runs, settings.eval_steps, eval_rng)

    rows = []
    start = time.perf_counter()

    def record(step, episode, accumulated_cost, rmse_values, critic_losses, actor_losses):
        row = {'step': step, 'episode': episode, 'accumulated_cost': accumulated_cost}
        for i, value in enumerate(rmse_values):
            row['eval_rmse_{}'.format(i)] = value
        row['critic_loss'] = _mean_or_nan(critic_losses)
        row['actor_loss'] = _mean_or_nan(actor_losses)
        row['wall_ms'] = 1000.0 * (time.perf_counter() - start)
        rows.append(row)

    initial_rmse = evaluate(policy)
    initial = overall_rmse(initial_rmse)
    record(0, 0, float('nan'), initial_rmse, [], [])
    logging.info('Initial evaluation RMSE %s', initial_rmse)
    best_score, best_policy = initial, policy
    scores = [initial]

    episode, episode_cost, last_episode_cost = 0, 0.0, float('nan')
    critic_losses, actor_losses = [], []
    window = env.reset(episode_rng.child(episode))
    step = 0
    try:
        while step < settings.max_steps:
            if step < settings.warmup_steps:
                action = explore_rng.standard_normal(n)
            else:
                sigma = exploration_sigma(step, settings)
                action = policy.act(window.flatten()) + explore_rng.normal(0.0, sigma, n)
            estimate = policy.to_estimate(action, window.newest_estimate, env.t)
            if not np.all(np.isfinite(estimate)):
                raise NonFiniteEstimateError('training estimate is non-finite at step '
                                             '{}'.format(step), window)
            outcome = env.step(estimate)
            buffer.add(window.flatten(), action, estimate, outcome.cost,
                       outcome.window.flatten(), outcome.terminal)
            episode_cost += outcome.cost
            step += 1

            if step > settings.warmup_steps and len(buffer) >= settings.batch_size:
                batch = standardize_batch(buffer.sample(settings.batch_size, batch_rng),
                                          policy.input_scaler)
                critic_value, actor_value = learner.update(batch)
                critic_losses.append(critic_value)
                if actor_value is not None:
                    actor_losses.append(actor_value)
                    policy = policy.with_actor(learner.actor)

            if outcome.done:
                logging.debug('Episode %d: accumulated cost %.6g', episode, episode_cost)
                last_episode_cost = episode_cost
                episode += 1
                episode_cost = 0.0
                window = env.reset(episode_rng.child(episode))
            else:
                window = outcome.window

            if step % settings.eval_interval == 0:
                rmse_values = evaluate(policy)
                score = overall_rmse(rmse_values)
                record(step, episode, last_episode_cost, rmse_values, critic_losses,
                       actor_losses)
                logging.info('Step %d: evaluation RMSE %s, critic loss %.4g, actor loss %.4g',
                             step, rmse_values, rows[-1]['critic_loss'],
                             rows[-1]['actor_loss'])
                critic_losses, actor_losses = [], []
                if not np.isfinite(score) or score > settings.divergence_factor * initial:
                    reason = 'evaluation RMSE {} exceeds {} x initial {}'.format(
                        score, settings.divergence_factor, initial)
                    path = _dump(checkpoint_dir, policy, learner, step, config_hash, reason)
                    raise TrainingDivergenceError(reason, path)
                if score < best_score:
                    best_score, best_policy = score, policy
                scores.append(score)
                if plateaued(scores, settings.plateau_evals, settings.plateau_tolerance):
                    logging.info('Evaluation RMSE plateaued at step %d', step)
                    break
    except FloatingPointError as err:
        path = _dump(checkpoint_dir, policy, learner, step, config_hash, str(err))
        raise TrainingDivergenceError('training hit a non-finite value at step {}: {}'.format(
            step, err), path)

    logging.info('Training finished after %d steps; best evaluation RMSE %.6g', step,
                 best_score)
    return TrainResult(best_policy, pd.DataFrame(rows), learner, step, best_score)
