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

import copy
import numpy as np
import pytest
import scipy.linalg
from estimation import config as config_module
from estimation.core import Rng, write_trajectory_csv, read_trajectory_csv
from estimation.noise import GaussianMixture, ZeroNoise
from estimation import systems
from estimation.systems import bicycle, integrators, linear, opaque_vehicle
from estimation.systems.base import ExplicitSource, TrajectorySource, collect


def _scalar_linear(a, c=1.0, q=0.0, r=0.0, x0=1.0, p0=0.0):
    process = GaussianMixture.gaussian([0.0], [[q]]) if q else ZeroNoise(1)
    measurement = GaussianMixture.gaussian([0.0], [[r]]) if r else ZeroNoise(1)
    return linear.LinearSystem([[a]], [[c]], process, measurement, [x0], [[p0]])


class _GrowingSystem(linear.LinearSystem):

    def within_guard(self, x):
        return abs(x[0]) < 10.0


def _default_config(name):
    config = copy.deepcopy(config_module.DEFAULTS)
    config['system']['name'] = name
    return config


class SimulateTest(object):

    def test_zero_noise_closed_form(self):
        trajectory = systems.simulate(_scalar_linear(0.5), 4, Rng(0))
        assert trajectory.true_states[3, 0] == 0.125
        assert len(trajectory) == 4

    def test_partly_known_initial_state(self):
        config = _default_config('linear')
        config['system']['linear']['initial_std'] = [0.1, 0.0]
        system = systems.make_system(config)
        starts = np.array([systems.simulate(system, 5, Rng(seed)).true_states[0]
                           for seed in range(20)])
        assert np.all(starts[:, 1] == system.initial_mean[1])
        assert np.std(starts[:, 0]) > 0.0

    def test_identity_transition_is_constant(self):
        trajectory = systems.simulate(_scalar_linear(1.0, x0=2.5), 10, Rng(3))
        assert np.all(trajectory.true_states == 2.5)

    def test_seeded_runs_are_identical(self):
        system = systems.make_system(_default_config('bicycle2dof'))
        first = systems.simulate(system, 50, Rng(11))
        second = systems.simulate(system, 50, Rng(11))
        np.testing.assert_array_equal(first.true_states, second.true_states)
        np.testing.assert_array_equal(first.measurements, second.measurements)
        np.testing.assert_array_equal(first.controls, second.controls)

    def test_zero_noise_follows_transition_exactly(self):
        config = _default_config('bicycle2dof')
        system = systems.make_system(config)
        system.process_noise = ZeroNoise(2)
        system.measurement_noise = ZeroNoise(2)
        trajectory = systems.simulate(system, 100, Rng(5))
        for t in range(99):
            expected = system.transition(trajectory.true_states[t], t)
            np.testing.assert_array_equal(trajectory.true_states[t + 1], expected)
            np.testing.assert_array_equal(
                trajectory.measurements[t],
                system.measurement(trajectory.true_states[t], t))

    def test_guard_truncates_and_flags(self):
        system = _GrowingSystem([[2.0]], [[1.0]], ZeroNoise(1), ZeroNoise(1),
                                [1.0], [[0.0]])
        trajectory = systems.simulate(system, 20, Rng(0))
        assert trajectory.diverged
        np.testing.assert_array_equal(trajectory.true_states[:, 0], [1, 2, 4, 8])

    def test_rejects_empty_rollout(self):
        with pytest.raises(ValueError):
            systems.simulate(_scalar_linear(0.5), 0, Rng(0))


class BicycleTest(object):
    params = bicycle.BicycleParams.defaults()

    def test_equilibrium(self):
        np.testing.assert_array_equal(
            bicycle.bicycle_derivatives([0.0, 0.0], 0.0, self.params), [0.0, 0.0])

    def test_positive_steer_yaws_left(self):
        derivative = bicycle.bicycle_derivatives([0.0, 0.0], 0.05, self.params)
        assert derivative[1] > 0

    def test_small_angle_matches_linear_model(self):
        p = self.params
        u = 0.005
        cornering = p.tire_b * p.tire_c * p.tire_d
        expected = np.array([cornering * u / (p.mass * p.vx),
                             p.lf * cornering * u / p.yaw_inertia])
        derivative = bicycle.bicycle_derivatives([0.0, 0.0], u, p)
        np.testing.assert_allclose(derivative, expected, rtol=1e-2)

    def test_vectorized_over_batch(self):
        states = np.array([[0.01, 0.02], [-0.03, 0.1], [0.0, 0.0]])
        batch = bicycle.bicycle_derivatives(states, 0.02, self.params)
        for state, row in zip(states, batch):
            np.testing.assert_allclose(
                bicycle.bicycle_derivatives(state, 0.02, self.params), row)

    def test_unforced_motion_decays(self):
        params = self.params._replace(steer_amplitude=0.0)
        system = bicycle.BicycleSystem(params, ZeroNoise(2), ZeroNoise(2),
                                       [0.05, 0.1], np.zeros((2, 2)))
        trajectory = systems.simulate(system, 2001, Rng(0))
        assert np.linalg.norm(trajectory.true_states[2000]) < 1e-6

    def test_guard(self):
        system = systems.make_system(_default_config('bicycle2dof'))
        assert system.within_guard(np.array([0.1, 1.0]))
        assert not system.within_guard(np.array([2.0, 0.0]))
        assert not system.within_guard(np.array([np.nan, 0.0]))

    def test_defaults_match_config(self):
        config = config_module.DEFAULTS['system']['bicycle2dof']
        from_config = bicycle.BicycleParams.from_config(config)
        for name in bicycle.BicycleParams._fields:
            assert getattr(from_config, name) == pytest.approx(
                getattr(self.params, name), rel=1e-6)


class IntegratorTest(object):

    @staticmethod
    def _decay_error(substeps):
        x = integrators.rk4_integrate(lambda t, x: -x, np.array([1.0]), 0.0, 1.0,
                                      substeps)
        return abs(x[0] - np.exp(-1.0)) / np.exp(-1.0)

    def test_accuracy(self):
        assert self._decay_error(10) < 1e-6

    def test_fourth_order(self):
        order = np.log2(self._decay_error(10) / self._decay_error(20))
        assert 3.7 <= order <= 4.3

    def test_time_dependent_rhs(self):
        x = integrators.rk4_integrate(lambda t, x: np.array([3 * t * t]),
                                      np.array([0.0]), 0.0, 2.0, 4)
        np.testing.assert_allclose(x, [8.0], rtol=1e-12)


class KfReferenceTest(object):

    def test_scalar_hand_solution(self):
        result = linear.kf_reference(_scalar_linear(0.0, q=1.0, r=1.0))
        np.testing.assert_allclose(result.prior_covariance, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(result.gain, [[0.5]], atol=1e-12)

    def test_uninformative_measurements(self):
        result = linear.kf_reference(_scalar_linear(0.5, q=1.0, r=1e12))
        assert abs(result.gain[0, 0]) < 1e-9

    def test_known_static_state(self):
        system = linear.LinearSystem([[1.0]], [[1.0]], ZeroNoise(1),
                                     GaussianMixture.gaussian([0.0], [[1.0]]),
                                     [0.0], [[0.0]])
        result = linear.kf_reference(system)
        assert result.gain[0, 0] == 0.0

    def test_matches_algebraic_riccati_solution(self):
        system = systems.make_system(_default_config('linear'))
        result = linear.kf_reference(system)
        Q = system.process_noise.covariance
        R = system.measurement_noise.covariance
        expected = scipy.linalg.solve_discrete_are(system.A.T, system.C.T, Q, R)
        np.testing.assert_allclose(result.prior_covariance, expected, atol=1e-9)
        assert linear.riccati_residual(system, result.prior_covariance) < 1e-10

    def test_non_convergence_names_residual(self):
        system = _scalar_linear(0.9, q=1.0, r=1.0)
        with pytest.raises(linear.RiccatiConvergenceError, match='residual'):
            linear.kf_reference(system, max_iterations=2)


class OpaqueVehicleTest(object):

    def _source(self, **noise):
        config = _default_config('opaque_vehicle')
        source = systems.make_source(config)
        if noise.get('silent'):
            source._process_noise = ZeroNoise(5)
            source._measurement_noise = ZeroNoise(9)
        return source

    def test_equal_seeds_replay(self):
        first, second = self._source(), self._source()
        a = [first.reset(7)] + [first.step() for _ in range(30)]
        b = [second.reset(7)] + [second.step() for _ in range(30)]
        for (xa, ya), (xb, yb) in zip(a, b):
            np.testing.assert_array_equal(xa, xb)
            np.testing.assert_array_equal(ya, yb)

    def test_silent_measurements_are_exact(self):
        source = self._source(silent=True)
        params = source._params
        x, y = source.reset(1)
        np.testing.assert_array_equal(y, opaque_vehicle.vehicle_outputs(0.0, x, params))
        for k in range(1, 20):
            x, y = source.step()
            np.testing.assert_array_equal(
                y, opaque_vehicle.vehicle_outputs(k * params.dt, x, params))

    def test_step_before_reset(self):
        with pytest.raises(RuntimeError):
            self._source().step()

    def test_default_rollout_stays_in_envelope(self):
        trajectory = collect(self._source(), 200, Rng(2))
        assert not trajectory.diverged
        assert len(trajectory) == 200
        assert trajectory.n == 5 and trajectory.m == 9
        assert np.all((trajectory.true_states[:, 0] > 15) &
                      (trajectory.true_states[:, 0] < 25))

    def test_has_no_explicit_model(self):
        config = _default_config('opaque_vehicle')
        assert not systems.has_explicit_model(config)
        with pytest.raises(ValueError):
            systems.make_system(config)


class TrajectorySourceTest(object):

    def test_replays_stored_files(self, tmp_path):
        system = systems.make_system(_default_config('bicycle2dof'))
        stored = systems.simulate(system, 25, Rng(4))
        path = str(tmp_path / 'trajectory.csv')
        write_trajectory_csv(stored, path)
        source = TrajectorySource([read_trajectory_csv(path)])
        replayed = collect(source, 100, Rng(0))
        assert len(replayed) == 25
        np.testing.assert_allclose(replayed.true_states, stored.true_states,
                                   rtol=1e-11)

    def test_explicit_source_matches_simulate(self):
        system = systems.make_system(_default_config('linear'))
        direct = systems.simulate(system, 30, Rng(9))
        online = collect(ExplicitSource(system), 30, Rng(9))
        np.testing.assert_array_equal(direct.measurements, online.measurements)
