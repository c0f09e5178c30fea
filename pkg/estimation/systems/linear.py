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

from collections import namedtuple
import logging
import numpy as np
from .base import ExplicitSystem

StationaryGain = namedtuple('StationaryGain',
                            ['gain', 'prior_covariance', 'posterior_covariance',
                             'iterations'])


class RiccatiConvergenceError(ArithmeticError):
    pass


class LinearSystem(ExplicitSystem):
    """ x_{t+1} = A x_t + ξ_t,  y_t = C x_t + ζ_t """

    def __init__(self, A, C, process_noise, measurement_noise, initial_mean,
                 initial_covariance, dt=1.0):
        self.A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.C = np.atleast_2d(np.asarray(C, dtype=np.float64))
        if self.A.shape != (self.A.shape[0], self.A.shape[0]):
            raise ValueError('A must be square, got {}'.format(self.A.shape))
        if self.C.shape[1] != self.A.shape[0]:
            raise ValueError('C has {} columns, expected {}'.format(
                self.C.shape[1], self.A.shape[0]))
        self.state_names = ['x{}'.format(i) for i in range(self.A.shape[0])]
        self.measurement_names = ['y{}'.format(i) for i in range(self.C.shape[0])]
        super(LinearSystem, self).__init__(process_noise, measurement_noise,
                                           initial_mean, initial_covariance, dt)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.C.shape[0]

    def transition(self, x, t):
        return np.asarray(x).dot(self.A.T)

    def measurement(self, x, t):
        return np.asarray(x).dot(self.C.T)


def _riccati_map(A, C, Q, R, P):
    S = C.dot(P).dot(C.T) + R
    K = np.linalg.solve(S.T, C.dot(P.T)).T
    posterior = P - K.dot(S).dot(K.T)
    posterior = 0.5 * (posterior + posterior.T)
    prior = A.dot(posterior).dot(A.T) + Q
    return 0.5 * (prior + prior.T), K, posterior


def riccati_residual(system, prior_covariance):
    """Max abs residual of the filter Riccati equation at `prior_covariance`."""
    Q = system.process_noise.covariance
    R = system.measurement_noise.covariance
    update, _, _ = _riccati_map(system.A, system.C, Q, R, prior_covariance)
    return float(np.max(np.abs(update - prior_covariance)))


def kf_reference(system, initial_covariance=None, tol=1e-12,
                 max_iterations=100000):
    """ Stationary Kalman filter of a linear-Gaussian system.

    Iterates the discrete Riccati recursion from `initial_covariance` (the
    system's initial covariance by default) until successive prior
    covariances agree to `tol`.

    Returns:
        StationaryGain with the steady-state gain, prior (predicted) and
        posterior error covariances.

    Raises:
        RiccatiConvergenceError: the recursion did not settle.
    """
    A, C = system.A, system.C
    Q = system.process_noise.covariance
    R = system.measurement_noise.covariance
    P0 = (system.initial_covariance if initial_covariance is None
          else np.atleast_2d(np.asarray(initial_covariance, dtype=np.float64)))
    prior = A.dot(P0).dot(A.T) + Q
    residual = np.inf
    for i in range(1, max_iterations + 1):
        update, K, posterior = _riccati_map(A, C, Q, R, prior)
        residual = np.max(np.abs(update - prior))
        prior = update
        if residual < tol:
            _, K, posterior = _riccati_map(A, C, Q, R, prior)
            logging.debug('Riccati recursion converged after %d iterations', i)
            return StationaryGain(K, prior, posterior, i)
    raise RiccatiConvergenceError(
        'Riccati recursion did not converge in {} iterations; residual {:.3g}'.format(
            max_iterations, residual))
