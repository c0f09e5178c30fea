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
""" Bootstrap particle filter.

    Particles are propagated through f with draws from the true process
    noise model and reweighted with the measurement noise density, so GMM
    and Laplace noise are used exactly rather than moment matched.
"""
from collections import namedtuple
import logging
import numpy as np
from scipy.special import logsumexp
from estimation.core import as_vector, covariance_factor
from .base import FilterState, OnlineFilter

ParticleSet = namedtuple('ParticleSet', ['particles', 'log_weights',
                                         'resample_threshold', 'degeneracy_count'])


def normalize_log_weights(log_weights):
    """ Returns (normalized log weights, degenerate flag). """
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        return np.full(len(log_weights), -np.log(len(log_weights))), True
    return log_weights - total, False


def effective_sample_size(weights):
    return 1.0 / np.sum(weights ** 2)


def weighted_mean(particles, weights):
    # Centered on one particle so identical particles give that particle.
    anchor = particles[0]
    return anchor + weights.dot(particles - anchor)


def systematic_resample(weights, rng):
    """ Offspring indices by systematic resampling with one uniform draw. """
    P = len(weights)
    positions = (rng.uniform() + np.arange(P)) / P
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.minimum(np.searchsorted(cumulative, positions, side='right'), P - 1)


def pf_step(state, y, system, rng):
    """ Propagate, reweight, estimate, and resample when the ESS is low.

    The estimate is the weighted mean before resampling.
    """
    belief = state.belief
    t = state.t + 1
    P = len(belief.particles)
    particles = (system.transition(belief.particles, t - 1) +
                 system.process_noise.sample_n(rng, P))
    residuals = y - system.measurement(particles, t)
    log_weights, degenerate = normalize_log_weights(
        belief.log_weights + system.measurement_noise.logpdf(residuals))
    degeneracy_count = belief.degeneracy_count
    if degenerate:
        degeneracy_count += 1
        logging.warning('Particle weights degenerate at step %d; reset to uniform', t)
    weights = np.exp(log_weights)
    estimate = weighted_mean(particles, weights)
    if effective_sample_size(weights) < belief.resample_threshold * P:
        particles = particles[systematic_resample(weights, rng)]
        log_weights = np.full(P, -np.log(P))
    return FilterState(estimate,
                       ParticleSet(particles, log_weights, belief.resample_threshold,
                                   degeneracy_count),
                       t)


class ParticleFilter(OnlineFilter):

    requires_model = True

    def __init__(self, system, particles=1000, resample_threshold=0.5):
        self.system = system
        self.num_particles = int(particles)
        self.resample_threshold = float(resample_threshold)

    def reset(self, initial_estimate, first_measurement, rng):
        mean = as_vector(initial_estimate, self.system.n, 'initial_estimate')
        covariance = self.system.initial_covariance
        z = rng.standard_normal((self.num_particles, self.system.n))
        if np.any(covariance):
            particles = mean + z.dot(covariance_factor(covariance).T)
        else:
            particles = np.tile(mean, (self.num_particles, 1))
        log_weights = np.full(self.num_particles, -np.log(self.num_particles))
        return FilterState(mean, ParticleSet(particles, log_weights,
                                             self.resample_threshold, 0), 0)

    def step(self, state, measurement, rng):
        return pf_step(state, as_vector(measurement, self.system.m), self.system, rng)
