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

import abc
import logging
import numpy as np
from estimation.core import Rng, Trajectory, covariance_factor


class ExplicitSystem(object, metaclass=abc.ABCMeta):
    """ Stochastic system with known transition and measurement maps.

        x_{t+1} = f(x_t, t) + ξ_t
        y_t     = g(x_t, t) + ζ_t

    `transition` and `measurement` are pure and accept a single state or a
    batch [..., n]; any control input is folded in through its time index.
    """

    state_names = None
    measurement_names = None

    def __init__(self, process_noise, measurement_noise, initial_mean,
                 initial_covariance, dt):
        self.process_noise = process_noise
        self.measurement_noise = measurement_noise
        self.initial_mean = np.asarray(initial_mean, dtype=np.float64).reshape(-1)
        self.initial_covariance = np.atleast_2d(
            np.asarray(initial_covariance, dtype=np.float64))
        self.dt = float(dt)
        if process_noise.dim != self.n or measurement_noise.dim != self.m:
            raise ValueError(
                'noise dimensions ({}, {}) do not match system ({}, {})'.format(
                    process_noise.dim, measurement_noise.dim, self.n, self.m))

    @property
    @abc.abstractmethod
    def n(self):
        pass

    @property
    @abc.abstractmethod
    def m(self):
        pass

    @abc.abstractmethod
    def transition(self, x, t):
        pass

    @abc.abstractmethod
    def measurement(self, x, t):
        pass

    def control(self, t):
        return 0.0

    def within_guard(self, x):
        return bool(np.all(np.isfinite(x)))

    def sample_initial(self, rng):
        z = rng.standard_normal(self.n)
        if not np.any(self.initial_covariance):
            return self.initial_mean.copy()
        return self.initial_mean + covariance_factor(self.initial_covariance).dot(z)


class SourceExhausted(RuntimeError):
    pass


class OpaqueSource(object, metaclass=abc.ABCMeta):
    """ Data source exposing only (truth, measurement) pairs.

    Nothing about f or g is reachable through this interface. The truth is
    returned for training labels and evaluation only; filters are handed
    the measurement alone.
    """

    system = None
    state_names = None
    measurement_names = None

    @property
    @abc.abstractmethod
    def n(self):
        pass

    @property
    @abc.abstractmethod
    def m(self):
        pass

    @property
    @abc.abstractmethod
    def dt(self):
        pass

    @property
    @abc.abstractmethod
    def initial_mean(self):
        pass

    @abc.abstractmethod
    def reset(self, seed):
        """Start a new trajectory; returns (x_0, y_0)."""
        pass

    @abc.abstractmethod
    def step(self):
        """Advance one step; returns (x_{t+1}, y_{t+1})."""
        pass

    @property
    def diverged(self):
        return False

    @staticmethod
    def _as_rng(seed):
        return seed if isinstance(seed, Rng) else Rng(seed)


class ExplicitSource(OpaqueSource):
    """Steps an ExplicitSystem online, one noise draw at a time."""

    def __init__(self, system):
        self.system = system
        self.state_names = system.state_names
        self.measurement_names = system.measurement_names
        self._rng = None
        self._x = None
        self._t = 0
        self._diverged = False

    @property
    def n(self):
        return self.system.n

    @property
    def m(self):
        return self.system.m

    @property
    def dt(self):
        return self.system.dt

    @property
    def initial_mean(self):
        return self.system.initial_mean

    @property
    def diverged(self):
        return self._diverged

    @property
    def t(self):
        return self._t

    def _measure(self):
        return (self.system.measurement(self._x, self._t) +
                self.system.measurement_noise.sample(self._rng))

    def reset(self, seed):
        self._rng = self._as_rng(seed)
        self._t = 0
        self._diverged = False
        self._x = self.system.sample_initial(self._rng)
        return self._x.copy(), self._measure()

    def step(self):
        if self._rng is None:
            raise RuntimeError('source stepped before reset')
        if self._diverged:
            raise RuntimeError('source stepped after divergence')
        self._x = (self.system.transition(self._x, self._t) +
                   self.system.process_noise.sample(self._rng))
        self._t += 1
        if not self.system.within_guard(self._x):
            self._diverged = True
            logging.debug('State guard violated at step %d: %s', self._t, self._x)
            return self._x.copy(), np.full(self.m, np.nan)
        return self._x.copy(), self._measure()


class TrajectorySource(OpaqueSource):
    """Replays stored trajectories, e.g. files written by `gen`."""

    def __init__(self, trajectories, initial_mean=None):
        if not trajectories:
            raise ValueError('TrajectorySource needs at least one trajectory')
        self.trajectories = list(trajectories)
        first = self.trajectories[0]
        self._initial_mean = (np.mean([tr.true_states[0] for tr in self.trajectories], axis=0)
                              if initial_mean is None else np.asarray(initial_mean, dtype=np.float64))
        self._dt = first.dt
        self._current = None
        self._t = 0

    @property
    def n(self):
        return self.trajectories[0].n

    @property
    def m(self):
        return self.trajectories[0].m

    @property
    def dt(self):
        return self._dt

    @property
    def initial_mean(self):
        return self._initial_mean

    def reset(self, seed):
        rng = self._as_rng(seed)
        self._current = self.trajectories[int(rng.integers(len(self.trajectories)))]
        self._t = 0
        return self._current.true_states[0].copy(), self._current.measurements[0].copy()

    def step(self):
        if self._current is None:
            raise RuntimeError('source stepped before reset')
        if self._t >= len(self._current) - 1:
            raise SourceExhausted('stored trajectory exhausted')
        self._t += 1
        return (self._current.true_states[self._t].copy(),
                self._current.measurements[self._t].copy())


def collect(source, steps, seed):
    """ Roll a source forward and record its trajectory.

    Args:
        source: an OpaqueSource.
        steps: number of recorded steps T >= 1.
        seed: int seed or Rng for the source.

    Returns:
        a Trajectory of length <= T; shorter, with `diverged` set, when the
        source's guard stopped the rollout.
    """
    if steps < 1:
        raise ValueError('steps must be at least 1')
    x, y = source.reset(seed)
    states, measurements = [x], [y]
    system = source.system
    controls = [system.control(0)] if system is not None else None
    diverged = False
    for t in range(1, steps):
        try:
            x, y = source.step()
        except SourceExhausted:
            break
        if source.diverged:
            diverged = True
            break
        states.append(x)
        measurements.append(y)
        if controls is not None:
            controls.append(system.control(t))
    return Trajectory(np.array(states), np.array(measurements), source.dt,
                      controls=controls, diverged=diverged)


def simulate(system, steps, rng):
    """Sample a trajectory of `steps` steps from an ExplicitSystem."""
    return collect(ExplicitSource(system), steps, rng)
