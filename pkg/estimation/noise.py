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
""" Additive noise models.

    Terminology in the context of noise models.

    sample: a single draw, a vector of dimension d.
    sample_n: a batch of draws, an array [size, d].
    logpdf: log density, evaluated on a vector or on a batch [..., d].
    mean / covariance: first two moments, used to moment-match Gaussian
        filters against non-Gaussian noise.
"""
import abc
import numpy as np
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)


class NoiseModel(object, metaclass=abc.ABCMeta):

    @property
    @abc.abstractmethod
    def dim(self):
        pass

    @abc.abstractmethod
    def sample_n(self, rng, size):
        pass

    @abc.abstractmethod
    def logpdf(self, x):
        pass

    @property
    @abc.abstractmethod
    def mean(self):
        pass

    @property
    @abc.abstractmethod
    def covariance(self):
        pass

    def sample(self, rng):
        return self.sample_n(rng, 1)[0]

    def _check_dim(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError('expected trailing dimension {}, got shape {}'.format(
                self.dim, x.shape))
        return x


class GaussianMixture(NoiseModel):
    """ Mixture of multivariate normals.

    Args:
        weights: K nonnegative weights summing to 1.
        means: K mean vectors of dimension d.
        covariances: K symmetric positive definite d x d matrices.
    """

    def __init__(self, weights, means, covariances):
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        K, d = means.shape
        covariances = np.asarray(covariances, dtype=np.float64).reshape(K, d, d)
        if weights.shape != (K,):
            raise ValueError('got {} weights for {} components'.format(
                len(weights), K))
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError('mixture weights must be a probability vector: {}'.format(
                weights))
        if not np.allclose(covariances, np.transpose(covariances, (0, 2, 1))):
            raise ValueError('mixture covariances must be symmetric')
        try:
            self.cholesky = np.linalg.cholesky(covariances)
        except np.linalg.LinAlgError:
            raise ValueError('mixture covariances must be positive definite')
        self.weights = weights
        self.means = means
        self.covariances = covariances
        self._precisions = np.linalg.inv(covariances)
        self._log_norm = np.array([
            -0.5 * (d * LOG_2PI + 2.0 * np.sum(np.log(np.diag(L))))
            for L in self.cholesky])
        with np.errstate(divide='ignore'):
            self._log_weights = np.log(weights)

    @classmethod
    def gaussian(cls, mean, covariance):
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        d = len(mean)
        return cls([1.0], [mean], np.asarray(covariance, dtype=np.float64).reshape(1, d, d))

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def num_components(self):
        return len(self.weights)

    @property
    def mean(self):
        return self.weights.dot(self.means)

    @property
    def covariance(self):
        """ Σᵢ wᵢ (Σᵢ + μᵢμᵢᵀ) − μ̄μ̄ᵀ """
        mu = self.mean
        second = np.einsum('k,kij->ij', self.weights,
                           self.covariances + np.einsum('ki,kj->kij', self.means, self.means))
        cov = second - np.outer(mu, mu)
        return 0.5 * (cov + cov.T)

    def sample_n(self, rng, size):
        # Categorical component first, then the component's normal.
        components = rng.choice(self.num_components, size=size, p=self.weights)
        z = rng.standard_normal((size, self.dim))
        return self.means[components] + np.einsum(
            'kij,kj->ki', self.cholesky[components], z)

    def logpdf(self, x):
        x = self._check_dim(x)
        diff = x[..., None, :] - self.means
        mahalanobis = np.einsum('...ki,kij,...kj->...k', diff, self._precisions, diff)
        return logsumexp(self._log_weights + self._log_norm - 0.5 * mahalanobis,
                         axis=-1)


class LaplaceNoise(NoiseModel):
    """ Componentwise independent Laplace noise with location μ and scale b. """

    def __init__(self, location, scale):
        self.location = np.asarray(location, dtype=np.float64).reshape(-1)
        self.scale = np.asarray(scale, dtype=np.float64).reshape(-1)
        if self.location.shape != self.scale.shape:
            raise ValueError('location and scale dimensions differ')
        if np.any(self.scale <= 0):
            raise ValueError('Laplace scales must be strictly positive: {}'.format(
                self.scale))

    @property
    def dim(self):
        return len(self.location)

    @property
    def mean(self):
        return self.location.copy()

    @property
    def covariance(self):
        return np.diag(2.0 * self.scale ** 2)

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=np.float64)
        c = p - 0.5
        return self.location - self.scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))

    def sample_n(self, rng, size):
        # p = 0 maps to -inf; the floor is the smallest p with p - 0.5 > -0.5.
        p = np.maximum(rng.uniform(size=(size, self.dim)), 2.0 ** -54)
        return self.inverse_cdf(p)

    def logpdf(self, x):
        x = self._check_dim(x)
        return np.sum(-np.log(2.0 * self.scale) -
                      np.abs(x - self.location) / self.scale, axis=-1)


class ZeroNoise(NoiseModel):
    """Noise switched off: draws are zero and only an exact zero has mass."""

    def __init__(self, dim):
        self._dim = int(dim)

    @property
    def dim(self):
        return self._dim

    @property
    def mean(self):
        return np.zeros(self._dim)

    @property
    def covariance(self):
        return np.zeros((self._dim, self._dim))

    def sample_n(self, rng, size):
        return np.zeros((size, self._dim))

    def logpdf(self, x):
        x = self._check_dim(x)
        return np.where(np.all(x == 0.0, axis=-1), 0.0, -np.inf)


def _matrices(values, count, dim):
    """Covariances may be given nested or flattened row-major."""
    return np.asarray(values, dtype=np.float64).reshape(count, dim, dim)


def noise_from_config(section, dim=None):
    """ Build a noise model from a config table.

    Args:
        section: dict with 'kind' in {'gmm', 'gaussian', 'laplace', 'none'}
            and the matching parameters.
        dim: noise dimension, only used by 'none'.

    Returns:
        a NoiseModel.
    """
    kind = section['kind']
    if kind == 'gmm':
        means = np.atleast_2d(np.asarray(section['means'], dtype=np.float64))
        K, d = means.shape
        return GaussianMixture(section['weights'], means,
                               _matrices(section['covariances'], K, d))
    elif kind == 'gaussian':
        mean = np.asarray(section['means'], dtype=np.float64).reshape(-1)
        return GaussianMixture.gaussian(
            mean, _matrices(section['covariances'], 1, len(mean))[0])
    elif kind == 'laplace':
        return LaplaceNoise(section['location'], section['scale'])
    elif kind == 'none':
        return ZeroNoise(dim)
    raise ValueError('unknown noise kind: {}'.format(kind))
