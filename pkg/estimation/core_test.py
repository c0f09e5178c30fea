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
import pytest
from estimation.core import (DimensionError, HistoryWindow, Rng, Trajectory, covariance_factor,
                             read_trajectory_csv, rmse, write_trajectory_csv)


def _window(pairs):
    return HistoryWindow([x for x, _ in pairs], [y for _, y in pairs])


class HistoryWindowTest(object):

    def test_single_slot_replacement(self):
        window = HistoryWindow.padded(1, [1.0], [2.0])
        assert window.update([3.0], [4.0]) == _window([([3.0], [4.0])])

    def test_shift(self):
        window = _window([([1.0], [10.0]), ([0.0], [9.0])])
        assert window.update([2.0], [11.0]) == _window([([2.0], [11.0]), ([1.0], [10.0])])

    def test_padding_fully_evicted(self):
        window = HistoryWindow.padded(3, [0.0, 0.0], [0.0])
        for i in range(1, 4):
            window = window.update([i, -i], [10.0 * i])
        np.testing.assert_array_equal(window.estimates, [[3, -3], [2, -2], [1, -1]])
        np.testing.assert_array_equal(window.measurements, [[30.0], [20.0], [10.0]])

    def test_random_pushes_keep_last_pairs(self):
        rng = Rng(11)
        N, n, m = 4, 3, 2
        window = HistoryWindow.padded(N, np.zeros(n), np.zeros(m))
        pushed = []
        for _ in range(25):
            pair = (rng.standard_normal(n), rng.standard_normal(m))
            pushed.append(pair)
            window = window.update(*pair)
        expected = _window(list(reversed(pushed[-N:])))
        assert window == expected
        assert window.capacity == N

    def test_update_leaves_input_untouched(self):
        window = HistoryWindow.padded(2, [1.0], [1.0])
        window.update([5.0], [5.0])
        assert window == HistoryWindow.padded(2, [1.0], [1.0])
        with pytest.raises(ValueError):
            window.estimates[0, 0] = 3.0

    def test_update_dimension_mismatch(self):
        window = HistoryWindow.padded(2, [1.0, 2.0], [1.0])
        with pytest.raises(DimensionError):
            window.update([1.0], [1.0])
        with pytest.raises(DimensionError):
            window.update([1.0, 2.0], [1.0, 2.0])

    def test_flatten_layout(self):
        assert list(HistoryWindow.padded(1, [2.0], [3.0]).flatten()) == [2.0, 3.0]
        np.testing.assert_array_equal(HistoryWindow.padded(3, [0.0, 0.0], [0.0]).flatten(),
                                      np.zeros(9))
        window = _window([([1.0, 2.0], [3.0]), ([4.0, 5.0], [6.0])])
        assert list(window.flatten()) == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        assert window.flat_dim == 6
        np.testing.assert_array_equal(window.newest_estimate, [1.0, 2.0])

    def test_unflatten_inverts_flatten(self):
        rng = Rng(5)
        for _ in range(20):
            N, n, m = rng.integers(1, 6, size=3)
            window = HistoryWindow(rng.standard_normal((N, n)), rng.standard_normal((N, m)))
            assert HistoryWindow.unflatten(window.flatten(), N, n, m) == window


class RmseTest(object):

    def test_exact(self):
        x = np.arange(12.0).reshape(6, 2)
        assert rmse(x, x, 1) == 0.0

    def test_constant_offset(self):
        x = np.zeros((5, 1))
        assert rmse(x - 0.7, x, 0) == pytest.approx(0.7)

    def test_alternating(self):
        errors = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        assert rmse(errors, np.zeros((4, 1)), 0) == 1.0

    def test_permutation_and_scaling(self):
        rng = Rng(3)
        errors = rng.standard_normal((50, 2))
        truths = np.zeros((50, 2))
        base = rmse(errors, truths, 0)
        assert rmse(errors[rng.generator.permutation(50)], truths, 0) == pytest.approx(base)
        assert rmse(-3.0 * errors, truths, 0) == pytest.approx(3.0 * base)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            rmse(np.zeros((0, 1)), np.zeros((0, 1)), 0)
        with pytest.raises(DimensionError):
            rmse(np.zeros((3, 1)), np.zeros((4, 1)), 0)
        with pytest.raises(DimensionError):
            rmse(np.zeros((3, 1)), np.zeros((3, 1)), 1)

    def test_flat_sequence_is_scalar_state(self):
        assert rmse([2.0, 0.0], [0.0, 0.0], 0) == pytest.approx(np.sqrt(2.0))
        with pytest.raises(DimensionError):
            rmse([2.0, 0.0], [0.0, 0.0], 1)


class RngTest(object):

    def test_same_seed_same_draws(self):
        np.testing.assert_array_equal(Rng(42).standard_normal(10000),
                                      Rng(42).standard_normal(10000))
        np.testing.assert_array_equal(Rng(42).child(3).uniform(size=100),
                                      Rng(42).child(3).uniform(size=100))

    def test_child_streams_uncorrelated(self):
        parent = Rng(42)
        a = parent.child(0).standard_normal(10000)
        b = parent.child(1).standard_normal(10000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
        assert not np.array_equal(a, parent.standard_normal(10000))


class TrajectoryTest(object):

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            Trajectory(np.zeros((5, 2)), np.zeros((4, 1)), 0.1)
        with pytest.raises(ValueError):
            Trajectory(np.zeros((5, 2)), np.zeros((5, 1)), 0.0)

    def test_csv_columns_and_reload(self, tmp_path):
        rng = Rng(0)
        trajectory = Trajectory(rng.standard_normal((6, 2)), rng.standard_normal((6, 3)),
                                0.01, estimates=rng.standard_normal((6, 2)),
                                controls=rng.standard_normal(6))
        path = str(tmp_path / 'trajectory.csv')
        write_trajectory_csv(trajectory, path)
        with open(path) as f:
            header = f.readline().strip().split(',')
        assert header == ['t', 'x_true_0', 'x_true_1', 'y_0', 'y_1', 'y_2',
                          'x_hat_0', 'x_hat_1', 'u']
        loaded = read_trajectory_csv(path)
        np.testing.assert_allclose(loaded.true_states, trajectory.true_states, rtol=1e-11)
        np.testing.assert_allclose(loaded.estimates, trajectory.estimates, rtol=1e-11)
        assert loaded.dt == pytest.approx(0.01)

    def test_flat_states_are_scalar(self):
        trajectory = Trajectory([1.0, 0.5, 0.25], [1.0, 0.5, 0.25], 1.0)
        assert len(trajectory) == 3
        assert trajectory.n == 1
        assert trajectory.m == 1

    def test_single_step_csv_needs_dt(self, tmp_path):
        path = str(tmp_path / 'one.csv')
        write_trajectory_csv(Trajectory(np.ones((1, 2)), np.ones((1, 1)), 0.05), path)
        with pytest.raises(ValueError):
            read_trajectory_csv(path)
        assert read_trajectory_csv(path, dt=0.05).dt == pytest.approx(0.05)


class CovarianceFactorTest(object):

    def test_positive_definite_is_cholesky(self):
        covariance = np.array([[4.0, 1.0], [1.0, 3.0]])
        np.testing.assert_array_equal(covariance_factor(covariance),
                                      np.linalg.cholesky(covariance))

    def test_semidefinite(self):
        covariance = np.diag([0.01, 0.0])
        factor = covariance_factor(covariance)
        np.testing.assert_allclose(factor.dot(factor.T), covariance, atol=1e-15)
        np.testing.assert_allclose(factor[1], 0.0)

    def test_rank_one(self):
        v = np.array([[1.0], [2.0]])
        factor = covariance_factor(v.dot(v.T))
        np.testing.assert_allclose(factor.dot(factor.T), v.dot(v.T), atol=1e-12)

    def test_rejects_indefinite(self):
        with pytest.raises(np.linalg.LinAlgError):
            covariance_factor(np.diag([1.0, -1.0]))
