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
""" End-to-end reproductions. Each trains real policies and takes minutes to
    hours; they run only with DAOF_RUN_SLOW=1.
"""
import os
import numpy as np
import pytest
from estimation import daof, systems
from estimation.config import load_config
from estimation.core import Rng
from estimation.daof import (DaofFilter, DaofPolicy, MfpEnv, ReplayBuffer, TrainConfig,
                             build_learner, critic_loss, standardize_batch, warmup_statistics)
from estimation.filters import (ParticleFilter, StationaryKalmanFilter, SupervisedLearningFilter,
                                UnscentedKalmanFilter, ZeroOrderHold, slf_transitions,
                                train_slf)
from estimation.metrics import ablation
from estimation.metrics.benchmark import filter_latency
from estimation.metrics.report import overall_rmse, summarize
from estimation.metrics.rollout import evaluate_filter
from estimation.nn import MlpNet

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.environ.get('DAOF_RUN_SLOW') != '1',
                       reason='set DAOF_RUN_SLOW=1 to run acceptance reproductions'),
]


def _bench(config, make_filter, name):
    bench = config['bench']
    results = evaluate_filter(make_filter, lambda: systems.make_source(config), bench['runs'],
                              bench['steps'], Rng(config['seed']).child(0),
                              bench['threads'], bench['divergence_bound'], name)
    return summarize(name, results)


def _train_slf(config, daof_steps=None):
    settings = config['train']
    model, _ = train_slf(systems.make_source(config), config['filter']['slf'],
                         settings['horizon'], slf_transitions(config, daof_steps),
                         Rng(config['seed']))
    return model


class LinearEquivalenceTest(object):

    def test_matches_stationary_kalman(self):
        config = load_config('linear_sanity.yaml')
        policy = daof.train(config).policy
        system = systems.make_system(config)
        learned = _bench(config, lambda: DaofFilter(policy), 'DAOF-v1')
        reference = _bench(config, lambda: StationaryKalmanFilter(system), 'KF')
        assert (abs(overall_rmse(learned.rmse_mean) - overall_rmse(reference.rmse_mean)) <=
                0.1 * overall_rmse(reference.rmse_mean))

    def test_critic_loss_falls_with_frozen_actor(self):
        config = load_config('linear_sanity.yaml')
        settings = TrainConfig.from_config(config)
        system = systems.make_system(config)
        env = MfpEnv(systems.make_source(config), settings.window_length, settings.horizon,
                     settings.gamma)
        rng = Rng(0)
        stats = warmup_statistics(env, daof.V1, system.transition, 5, rng.child(0))
        learner = build_learner(settings, settings.window_length * (env.n + env.m), env.n,
                                rng.child(1))
        policy = DaofPolicy.create(daof.V1, learner.actor, settings.window_length,
                                   system.transition, *stats)
        buffer = ReplayBuffer(50000, settings.window_length, env.n, env.m)
        explore, episodes = rng.child(2), rng.child(3)
        episode = 0
        window = env.reset(episodes.child(episode))
        while len(buffer) < 20000:
            action = policy.act(window.flatten()) + explore.normal(0.0, 0.1, env.n)
            estimate = policy.to_estimate(action, window.newest_estimate, env.t)
            outcome = env.step(estimate)
            buffer.add(window.flatten(), action, estimate, outcome.cost,
                       outcome.window.flatten(), outcome.terminal)
            if outcome.done:
                episode += 1
                window = env.reset(episodes.child(episode))
            else:
                window = outcome.window
        held_out = standardize_batch(buffer.sample(1000, rng.child(4)), policy.input_scaler)

        def loss():
            return np.mean(critic_loss(held_out, learner.critics, learner.critic_targets,
                                       learner.actor_target, settings.gamma).losses)

        before = loss()
        batches = rng.child(5)
        for _ in range(10000):
            learner.update_critics(standardize_batch(
                buffer.sample(settings.batch_size, batches), policy.input_scaler))
        assert loss() <= 0.5 * before


class ExperimentOneTest(object):

    def test_ordering(self):
        config = load_config('exp1_bench.yaml')
        system = systems.make_system(config)
        trained = daof.train(load_config('exp1_daof_v1.yaml'))
        v1 = trained.policy
        slf = _train_slf(load_config('exp1_slf.yaml'), trained.steps)
        rows = {
            'DAOF-v1': _bench(config, lambda: DaofFilter(v1), 'DAOF-v1'),
            'SLF': _bench(config, lambda: SupervisedLearningFilter(slf), 'SLF'),
            'UKF': _bench(config, lambda: UnscentedKalmanFilter(system), 'UKF'),
            'PF': _bench(config, lambda: ParticleFilter(system, 1000), 'PF'),
        }
        daof_rmse = rows['DAOF-v1'].rmse_mean
        assert np.all(daof_rmse < rows['SLF'].rmse_mean)
        assert np.all(daof_rmse <= 1.25 * rows['PF'].rmse_mean)
        ukf = rows['UKF']
        if not ukf.diverged.all():
            assert np.all(daof_rmse < ukf.rmse_mean)
        assert (ukf.diverged.any() or
                ukf.rmse_mean[0] == max(row.rmse_mean[0] for row in rows.values()))

    def test_window_trend(self, tmp_path):
        config = load_config('ablation.yaml')
        table = ablation.ablate_window(config, str(tmp_path), lengths=[1, 10, 20])
        rmse = list(table['rmse'])
        assert rmse[2] <= 0.95 * rmse[1]
        assert rmse[1] <= 0.95 * rmse[0]
        cost = list(table['cost_ms'])
        assert cost[0] <= cost[1] <= cost[2]

    def test_latency_ratio(self):
        config = load_config('exp1_daof_v1.yaml')
        system = systems.make_system(config)
        N = config['daof']['v1']['window_length']
        dims = [N * (system.n + system.m)] + config['daof']['v1']['hidden_layers'] + [system.n]
        policy = DaofPolicy.create(daof.V1, MlpNet.create(dims, Rng(0)), N, system.transition)
        make_source = lambda: systems.make_source(config)
        learned = filter_latency(lambda: DaofFilter(policy), make_source, 10000, 100, Rng(1))
        particle = filter_latency(lambda: ParticleFilter(system, 1000), make_source, 10000,
                                  100, Rng(1))
        assert particle >= 10.0 * learned


class ExperimentTwoTest(object):

    def test_model_free_filtering(self):
        config = load_config('exp2_bench.yaml')
        trained = daof.train(load_config('exp2_daof_v2.yaml'))
        v2 = trained.policy
        slf = _train_slf(load_config('exp2_slf.yaml'), trained.steps)
        learned = _bench(config, lambda: DaofFilter(v2), 'DAOF-v2').rmse_mean
        supervised = _bench(config, lambda: SupervisedLearningFilter(slf), 'SLF').rmse_mean
        hold = _bench(config, ZeroOrderHold, 'ZOH').rmse_mean
        assert np.sum(learned < supervised) >= 4
        assert np.all(learned < hold)
