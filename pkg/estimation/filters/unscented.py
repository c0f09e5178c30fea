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
""" Unscented Kalman filter with scaled sigma points.

    Non-Gaussian noise is moment matched: the filter sees only the mean and
    covariance of the process and measurement noise models.
"""
from collections import namedtuple
import logging
import numpy as np
from estimation.core import as_vector
from .base import FilterDivergenceError, FilterState, OnlineFilter

JITTER = 1e-9
MAX_CHOLESKY_FAILURES = 3


class UkfParams(namedtuple('UkfParams', ['alpha', 'beta', 'kappa', 'process_mean',
                                         'process_cov', 'measurement_mean',
                                         'measurement_cov'])):

    @classmethod
    def from_system(cls, system, alpha=0.1, beta=2.0, kappa=0.0):
        return cls(alpha, beta, kappa,
                   system.process_noise.mean, system.process_noise.covariance,
                   system.measurement_noise.mean, system.measurement_noise.covariance)

    def spread(self, n):
        """λ = α²(n + κ) − n"""
        lam = self.alpha ** 2 * (n + self.kappa) - n
        if lam <= -n:
            raise ValueError('sigma point spread {} must exceed {}'.format(lam, -n))
        return lam


def sigma_weights(n, params):
    lam = params.spread(n)
    mean_weights = np.full(2 * n + 1, 1.0 / (2 * (n + lam)))
    cov_weights = mean_weights.copy()
    mean_weights[0] = lam / (n + lam)
    cov_weights[0] = mean_weights[0] + (1.0 - params.alpha ** 2 + params.beta)
    return mean_weights, cov_weights


def _cholesky(covariance):
    n = covariance.shape[0]
    for failure in range(MAX_CHOLESKY_FAILURES):
        try:
            return np.linalg.cholesky(covariance + failure * JITTER * np.eye(n))
        except np.linalg.LinAlgError:
            logging.warning('UKF covariance not positive definite; adding %g I',
                            (failure + 1) * JITTER)
    raise FilterDivergenceError('UKF covariance could not be factorized after {} '
                                'attempts'.format(MAX_CHOLESKY_FAILURES))


def sigma_points(mean, covariance, params):
    """Rows are x̄, x̄ + √(n+λ) L_i, x̄ − √(n+λ) L_i."""
    n = len(mean)
    root = np.sqrt(n + params.spread(n)) * _cholesky(covariance)
    return np.vstack([mean[None], mean + root.T, mean - root.T])


def _moments(points, mean_weights, cov_weights):
    mean = mean_weights.dot(points)
    centered = points - mean
    return mean, (centered * cov_weights[:, None]).T.dot(centered)


def ukf_step(state, y, system, params):
    """ One UKF predict/update against an ExplicitSystem. """
    mean, cov = state.belief
    t = state.t + 1
    n = system.n
    wm, wc = sigma_weights(n, params)

    propagated = system.transition(sigma_points(mean, cov, params), t - 1)
    prior_mean, prior_cov = _moments(propagated, wm, wc)
    prior_mean = prior_mean + params.process_mean
    prior_cov = prior_cov + params.process_cov

    points = sigma_points(prior_mean, prior_cov, params)
    predicted = system.measurement(points, t) + params.measurement_mean
    y_mean, S = _moments(predicted, wm, wc)
    S = S + params.measurement_cov
    cross = ((points - prior_mean) * wc[:, None]).T.dot(predicted - y_mean)
    try:
        K = np.linalg.solve(S.T, cross.T).T
    except np.linalg.LinAlgError:
        raise FilterDivergenceError('UKF innovation covariance is singular')
    posterior_mean = prior_mean + K.dot(y - y_mean)
    posterior_cov = prior_cov - K.dot(S).dot(K.T)
    posterior_cov = 0.5 * (posterior_cov + posterior_cov.T)
    if not np.all(np.isfinite(posterior_mean)):
        raise FilterDivergenceError('UKF estimate became non-finite at step {}'.format(t))
    return FilterState(posterior_mean, (posterior_mean, posterior_cov), t)


class UnscentedKalmanFilter(OnlineFilter):

    requires_model = True

    def __init__(self, system, alpha=0.1, beta=2.0, kappa=0.0):
        self.system = system
        self.params = UkfParams.from_system(system, alpha, beta, kappa)

    def reset(self, initial_estimate, first_measurement, rng):
        mean = as_vector(initial_estimate, self.system.n, 'initial_estimate')
        return FilterState(mean, (mean, self.system.initial_covariance.copy()), 0)

    def step(self, state, measurement, rng):
        return ukf_step(state, as_vector(measurement, self.system.m), self.system,
                        self.params)
