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
""" Critic and actor objectives for the filtering actor-critic.

    Critics take the standardized flat window concatenated with the
    normalized action and predict the discounted cost-to-go. Batches here
    are already standardized: `windows` and `next_windows` are net inputs.
"""
from collections import namedtuple
import numpy as np
from estimation.nn import NonFiniteError

CriticLoss = namedtuple('CriticLoss', ['losses', 'grads', 'targets'])
ActorLoss = namedtuple('ActorLoss', ['loss', 'grads', 'action_grads'])


def critic_input(windows, actions):
    return np.concatenate([np.atleast_2d(windows), np.atleast_2d(actions)], axis=-1)


def td_targets(batch, target_critics, actor_target, gamma, reward_scale=1.0, rng=None,
               target_noise=0.0, target_noise_clip=0.0):
    """ cost + γ min_i Q'_i(h', π'(h') + clipped noise), without bootstrap on
        terminal transitions. Returns a column [B, 1]. """
    next_actions = actor_target(batch.next_windows)
    if rng is not None and target_noise > 0:
        noise = rng.normal(0.0, target_noise, next_actions.shape)
        next_actions = next_actions + np.clip(noise, -target_noise_clip, target_noise_clip)
    next_inputs = critic_input(batch.next_windows, next_actions)
    next_q = np.minimum.reduce([critic(next_inputs) for critic in target_critics])
    bootstrap = np.where(np.asarray(batch.terminals)[:, None], 0.0, gamma * next_q)
    targets = reward_scale * np.asarray(batch.costs, dtype=np.float64)[:, None] + bootstrap
    if not np.all(np.isfinite(targets)):
        raise NonFiniteError('TD targets are non-finite')
    return targets


def critic_loss(batch, critics, target_critics, actor_target, gamma, **kwargs):
    """ ½ mean (Q_i(h, a) − y)² for each critic against shared TD targets y.

    Args:
        batch: replay Batch with standardized windows.
        critics: online critic nets.
        target_critics: target critic nets for the clipped double-Q target.
        actor_target: target actor net.
        gamma: discount.
        **kwargs: reward_scale, rng, target_noise, target_noise_clip.

    Returns:
        CriticLoss(losses, grads, targets); grads[i] follows critics[i].params().
    """
    targets = td_targets(batch, target_critics, actor_target, gamma, **kwargs)
    inputs = critic_input(batch.windows, batch.actions)
    B = len(targets)
    losses, grads = [], []
    for critic in critics:
        q, cache = critic.forward(inputs)
        residual = q - targets
        losses.append(0.5 * float(np.mean(residual ** 2)))
        grads.append(critic.backward(cache, residual / B)[0])
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError('critic loss is non-finite: {}'.format(losses))
    return CriticLoss(losses, grads, targets)


def actor_loss(windows, actor, critic):
    """ mean Q(h, π(h)); the gradient is ∂Q/∂a chained through the actor.

    Returns:
        ActorLoss(loss, grads, action_grads) with grads in actor.params()
        layout and action_grads the per-sample ∂loss/∂a.
    """
    actions, actor_cache = actor.forward(windows)
    q, critic_cache = critic.forward(critic_input(windows, actions))
    loss = float(np.mean(q))
    if not np.isfinite(loss):
        raise NonFiniteError('actor loss is non-finite')
    _, input_grad = critic.backward(critic_cache, np.full(q.shape, 1.0 / len(q)))
    action_grads = input_grad[:, -actor.output_dim:]
    grads, _ = actor.backward(actor_cache, action_grads)
    return ActorLoss(loss, grads, action_grads)
