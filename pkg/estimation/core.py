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
""" Shared numeric vocabulary: vectors, history windows, seeded streams and
    trajectories.

    States and measurements are plain float64 numpy vectors. A `StateVec`
    is any 1-D array of the system state dimension n, a `MeasVec` one of the
    measurement dimension m.
"""
import logging
import os
import numpy as np
import pandas as pd

FLOAT_FORMAT = '%.12g'


class DimensionError(ValueError):
    pass


def as_vector(values, dim=None, name='vector'):
    """Convert `values` to a finite float64 vector, checking its dimension."""
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if dim is not None and vec.shape[0] != dim:
        raise DimensionError('{} has dimension {}, expected {}'.format(
            name, vec.shape[0], dim))
    if not np.all(np.isfinite(vec)):
        raise FloatingPointError('{} contains non-finite entries: {}'.format(
            name, vec))
    return vec


def covariance_factor(covariance):
    """ L with L L^T = covariance, for positive semidefinite covariances.

    Cholesky when the matrix is positive definite; a symmetric eigen factor
    otherwise, so components with zero variance stay fixed.

    Raises:
        np.linalg.LinAlgError: the matrix has a clearly negative eigenvalue.
    """
    covariance = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        values, vectors = np.linalg.eigh(covariance)
        scale = max(1.0, float(np.max(np.abs(values))))
        if np.min(values) < -1e-9 * scale:
            raise np.linalg.LinAlgError(
                'covariance is not positive semidefinite: eigenvalues {}'.format(values))
        return vectors * np.sqrt(np.clip(values, 0.0, None))


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.flags.writeable = False
    return array


class Rng(object):
    """ Seeded random stream.

    Draws come from numpy's counter-based Philox generator keyed by a
    `SeedSequence(seed, spawn_key=stream)`. The same (seed, stream) pair
    yields the same draws on every platform, and streams with different
    spawn keys are independent by construction.

    Args:
        seed: 64 bit integer seed.
        stream: tuple of stream indices identifying a child stream.
    """

    def __init__(self, seed, stream=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = tuple(int(x) for x in stream)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, index):
        return Rng(self.seed, self.stream + (int(index),))

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)

    def __repr__(self):
        return 'Rng(seed={}, stream={})'.format(self.seed, self.stream)


class HistoryWindow(object):
    """ Fixed-length window of (estimate, measurement) pairs, newest first.

    At time t the window holds (x̂_{t-1}, y_t), (x̂_{t-2}, y_{t-1}), ...,
    (x̂_{t-N}, y_{t-N+1}). Instances are immutable; `update` returns a new
    window.
    """

    def __init__(self, estimates, measurements):
        estimates = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
        measurements = np.atleast_2d(np.asarray(measurements, dtype=np.float64))
        if len(estimates) != len(measurements) or len(estimates) == 0:
            raise DimensionError(
                'window needs the same positive number of estimates and '
                'measurements, got {} and {}'.format(
                    len(estimates), len(measurements)))
        self._estimates = _frozen(estimates)
        self._measurements = _frozen(measurements)

    @classmethod
    def padded(cls, capacity, estimate, measurement):
        """Window filled with `capacity` copies of one pair."""
        if capacity < 1:
            raise DimensionError('window capacity must be positive')
        estimate = as_vector(estimate, name='estimate')
        measurement = as_vector(measurement, name='measurement')
        return cls(np.tile(estimate, (capacity, 1)),
                   np.tile(measurement, (capacity, 1)))

    @classmethod
    def unflatten(cls, flat, capacity, n, m):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (capacity * (n + m),):
            raise DimensionError('flat window has shape {}, expected ({},)'.format(
                flat.shape, capacity * (n + m)))
        rows = flat.reshape(capacity, n + m)
        return cls(rows[:, :n], rows[:, n:])

    @property
    def capacity(self):
        return self._estimates.shape[0]

    @property
    def n(self):
        return self._estimates.shape[1]

    @property
    def m(self):
        return self._measurements.shape[1]

    @property
    def flat_dim(self):
        return self.capacity * (self.n + self.m)

    @property
    def estimates(self):
        return self._estimates

    @property
    def measurements(self):
        return self._measurements

    @property
    def pairs(self):
        return tuple(zip(self._estimates, self._measurements))

    @property
    def newest_estimate(self):
        return self._estimates[0]

    def update(self, estimate, measurement):
        """Drop the oldest pair and insert (estimate, measurement) as newest."""
        estimate = as_vector(estimate, self.n, 'estimate')
        measurement = as_vector(measurement, self.m, 'measurement')
        estimates = np.concatenate([estimate[None], self._estimates[:-1]])
        measurements = np.concatenate(
            [measurement[None], self._measurements[:-1]])
        return HistoryWindow(estimates, measurements)

    def flatten(self):
        """Flat vector (x̂_{t-1}, y_t, x̂_{t-2}, y_{t-1}, ...)."""
        return np.concatenate([self._estimates, self._measurements],
                              axis=1).reshape(-1)

    def __eq__(self, other):
        return (isinstance(other, HistoryWindow) and
                np.array_equal(self._estimates, other._estimates) and
                np.array_equal(self._measurements, other._measurements))

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'HistoryWindow(N={}, n={}, m={})'.format(
            self.capacity, self.n, self.m)


def _as_steps(values):
    """[T, k] float array; a flat sequence is T scalar steps."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim < 2:
        values = values.reshape(-1, 1)
    return values


def rmse(estimates, truths, component):
    """Root mean squared error of one state component over a trajectory."""
    estimates = _as_steps(estimates)
    truths = _as_steps(truths)
    if len(estimates) == 0 or estimates.size == 0:
        raise ValueError('rmse needs at least one step')
    if estimates.shape != truths.shape:
        raise DimensionError('estimates {} and truths {} differ in shape'.format(
            estimates.shape, truths.shape))
    if not 0 <= component < estimates.shape[1]:
        raise DimensionError('component {} out of range for n={}'.format(
            component, estimates.shape[1]))
    errors = estimates[:, component] - truths[:, component]
    return float(np.sqrt(np.mean(errors ** 2)))


class Trajectory(object):
    """ One rollout: truths, measurements, optional estimates and controls.

    Args:
        true_states: array [T, n].
        measurements: array [T, m].
        dt: seconds per step.
        estimates: optional array [T, n].
        controls: optional array [T].
        diverged: True if the simulation guard truncated the rollout.
    """

    def __init__(self, true_states, measurements, dt, estimates=None,
                 controls=None, diverged=False):
        self.true_states = _as_steps(true_states)
        self.measurements = _as_steps(measurements)
        self.estimates = None if estimates is None else _as_steps(estimates)
        self.controls = None if controls is None else np.asarray(
            controls, dtype=np.float64).reshape(-1)
        self.dt = float(dt)
        self.diverged = bool(diverged)
        if self.dt <= 0:
            raise ValueError('dt must be positive, got {}'.format(dt))
        T = len(self.true_states)
        for name in ['measurements', 'estimates', 'controls']:
            value = getattr(self, name)
            if value is not None and len(value) != T:
                raise DimensionError('{} has length {}, expected {}'.format(
                    name, len(value), T))

    def __len__(self):
        return len(self.true_states)

    @property
    def n(self):
        return self.true_states.shape[1]

    @property
    def m(self):
        return self.measurements.shape[1]

    def with_estimates(self, estimates):
        return Trajectory(self.true_states, self.measurements, self.dt,
                          estimates, self.controls, self.diverged)

    def to_dataframe(self):
        columns = {'t': np.arange(len(self)) * self.dt}
        for i in range(self.n):
            columns['x_true_{}'.format(i)] = self.true_states[:, i]
        for i in range(self.m):
            columns['y_{}'.format(i)] = self.measurements[:, i]
        if self.estimates is not None:
            for i in range(self.n):
                columns['x_hat_{}'.format(i)] = self.estimates[:, i]
        if self.controls is not None:
            columns['u'] = self.controls
        return pd.DataFrame(columns)


def write_trajectory_csv(trajectory, path):
    trajectory.to_dataframe().to_csv(path, index=False,
                                     float_format=FLOAT_FORMAT)
    logging.debug('Wrote %d steps to %s', len(trajectory), path)


def read_trajectory_csv(path, dt=None):
    """ Read a trajectory written by `write_trajectory_csv`.

    The step is taken from the `t` column; a single-row file carries none,
    so `dt` must be given for it.
    """
    df = pd.read_csv(path)

    def block(prefix):
        names = sorted([c for c in df.columns if c.startswith(prefix)],
                       key=lambda c: int(c[len(prefix):]))
        return df[names].values if names else None

    t = df['t'].values
    if len(t) > 1:
        dt = float(t[1] - t[0])
    elif dt is None:
        raise ValueError('{} has a single step; pass dt explicitly'.format(path))
    controls = df['u'].values if 'u' in df.columns else None
    return Trajectory(block('x_true_'), block('y_'), dt,
                      estimates=block('x_hat_'), controls=controls)


def training_log_path(checkpoint_path):
    """The training-log CSV kept next to a checkpoint."""
    return os.path.splitext(checkpoint_path)[0] + '_training_log.csv'


def write_training_log(log, path):
    """Write a training log, a DataFrame or a list of row dicts."""
    pd.DataFrame(log).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logging.info('Wrote training log to %s', path)


def read_training_log(checkpoint_path):
    """The training log stored next to `checkpoint_path`, or None."""
    path = training_log_path(checkpoint_path)
    if not os.path.exists(path):
        logging.info('No training log at %s', path)
        return None
    return pd.read_csv(path)
