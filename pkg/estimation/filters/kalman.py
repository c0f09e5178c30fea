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
from estimation.core import as_vector
from estimation.systems.linear import kf_reference
from .base import FilterState, OnlineFilter


def kf_step(mean, covariance, y, system, t):
    """ Kalman predict with A, Q then update with C, R at time t.

    Noise means are added to the predicted state and measurement, so
    moment-matched non-Gaussian noise is handled the same way.
    """
    A, C = system.A, system.C
    prior_mean = A.dot(mean) + system.process_noise.mean
    prior_cov = A.dot(covariance).dot(A.T) + system.process_noise.covariance
    innovation = y - (C.dot(prior_mean) + system.measurement_noise.mean)
    S = C.dot(prior_cov).dot(C.T) + system.measurement_noise.covariance
    K = np.linalg.solve(S.T, C.dot(prior_cov.T)).T
    posterior_mean = prior_mean + K.dot(innovation)
    posterior_cov = prior_cov - K.dot(S).dot(K.T)
    return posterior_mean, 0.5 * (posterior_cov + posterior_cov.T)


class KalmanFilter(OnlineFilter):
    """Time-varying Kalman filter of a LinearSystem."""

    requires_model = True

    def __init__(self, system):
        self.system = system

    def reset(self, initial_estimate, first_measurement, rng):
        mean = as_vector(initial_estimate, self.system.n, 'initial_estimate')
        return FilterState(mean, (mean, self.system.initial_covariance.copy()), 0)

    def step(self, state, measurement, rng):
        mean, cov = state.belief
        t = state.t + 1
        mean, cov = kf_step(mean, cov, as_vector(measurement, self.system.m), self.system, t)
        return FilterState(mean, (mean, cov), t)


class StationaryKalmanFilter(OnlineFilter):
    """Fixed-gain Kalman filter using the Riccati fixed point."""

    requires_model = True

    def __init__(self, system, gain=None):
        self.system = system
        self.gain = kf_reference(system).gain if gain is None else np.atleast_2d(gain)

    def reset(self, initial_estimate, first_measurement, rng):
        mean = as_vector(initial_estimate, self.system.n, 'initial_estimate')
        return FilterState(mean, None, 0)

    def step(self, state, measurement, rng):
        system = self.system
        prior = system.A.dot(state.estimate) + system.process_noise.mean
        innovation = (as_vector(measurement, system.m) -
                      system.C.dot(prior) - system.measurement_noise.mean)
        return FilterState(prior + self.gain.dot(innovation), None, state.t + 1)
