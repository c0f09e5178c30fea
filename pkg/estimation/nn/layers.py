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
""" Multilayer perceptron with hand-derived reverse-mode gradients.

    Weights are stored [fan_in, fan_out] so a batch [B, fan_in] maps to
    [B, fan_out] with `x.dot(W) + b`; a single vector works the same way.
"""
import numpy as np
from scipy.special import erf
from estimation.core import DimensionError

SQRT_HALF = np.sqrt(0.5)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

IDENTITY = 'identity'
GELU = 'gelu'

# Tags written into checkpoints.
ACTIVATION_TAGS = {IDENTITY: 0, GELU: 1}


class NonFiniteError(FloatingPointError):
    pass


def gelu(z):
    """Exact Gelu, z Φ(z)."""
    return 0.5 * z * (1.0 + erf(z * SQRT_HALF))


def gelu_grad(z):
    """ d/dz z Φ(z) = Φ(z) + z φ(z) """
    cdf = 0.5 * (1.0 + erf(z * SQRT_HALF))
    return cdf + z * INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _activate(tag, z):
    return gelu(z) if tag == GELU else z


def _activate_grad(tag, z, g):
    return g * gelu_grad(z) if tag == GELU else g


class MlpNet(object):
    """ Affine layers with Gelu hidden activations and an identity output.

    Args:
        layer_dims: [in, hidden..., out].
        weights: one [fan_in, fan_out] array per layer.
        biases: one [fan_out] array per layer.
        activations: one tag per layer; Gelu hidden and identity output
            when omitted.
    """

    def __init__(self, layer_dims, weights, biases, activations=None):
        self.layer_dims = [int(d) for d in layer_dims]
        if len(self.layer_dims) < 2:
            raise DimensionError('a net needs at least input and output dims')
        if activations is None:
            activations = [GELU] * (len(self.layer_dims) - 2) + [IDENTITY]
        self.activations = list(activations)
        self.weights = list(weights)
        self.biases = list(biases)
        if not (len(self.weights) == len(self.biases) == len(self.activations) ==
                len(self.layer_dims) - 1):
            raise DimensionError('layer count mismatch in {}'.format(self.layer_dims))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != shape or b.shape != shape[1:]:
                raise DimensionError('layer {} has weights {} and biases {}, '
                                     'expected {}'.format(i, w.shape, b.shape, shape))

    @classmethod
    def create(cls, layer_dims, rng, dtype=np.float64):
        """Uniform fan-in initialization in ±√(1/fan_in)."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = np.sqrt(1.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)).astype(dtype))
            biases.append(rng.uniform(-bound, bound, fan_out).astype(dtype))
        return cls(layer_dims, weights, biases)

    @classmethod
    def zeros(cls, layer_dims, dtype=np.float64):
        return cls(layer_dims,
                   [np.zeros((i, o), dtype) for i, o in zip(layer_dims[:-1], layer_dims[1:])],
                   [np.zeros(o, dtype) for o in layer_dims[1:]])

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    @property
    def num_layers(self):
        return len(self.weights)

    def forward(self, x):
        """ Returns (output, cache); the cache holds every layer's input and
            pre-activation. """
        x = np.asarray(x, dtype=self.weights[0].dtype)
        if x.shape[-1] != self.input_dim:
            raise DimensionError('net input has dimension {}, expected {}'.format(
                x.shape[-1], self.input_dim))
        cache = []
        for w, b, tag in zip(self.weights, self.biases, self.activations):
            z = x.dot(w) + b
            cache.append((x, z))
            x = _activate(tag, z)
        return x, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, output_grad):
        """ Reverse pass for a scalar loss with d loss / d output = output_grad.

        Returns:
            (grads, input_grad) where grads follows the `params()` layout.
            Batch gradients are summed over the batch.
        """
        g = np.asarray(output_grad, dtype=self.weights[0].dtype)
        grads = [None] * (2 * self.num_layers)
        for i in reversed(range(self.num_layers)):
            x, z = cache[i]
            dz = _activate_grad(self.activations[i], z, g)
            if dz.ndim == 1:
                grads[2 * i] = np.outer(x, dz)
                grads[2 * i + 1] = dz
            else:
                grads[2 * i] = x.T.dot(dz)
                grads[2 * i + 1] = dz.sum(axis=0)
            g = dz.dot(self.weights[i].T)
        return grads, g

    def params(self):
        """[W_0, b_0, W_1, b_1, ...]"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def param_names(self):
        out = []
        for i in range(self.num_layers):
            out.extend(['layer {} weights'.format(i), 'layer {} biases'.format(i)])
        return out

    def with_params(self, params):
        return MlpNet(self.layer_dims, params[0::2], params[1::2], self.activations)

    def copy(self):
        return self.with_params([p.copy() for p in self.params()])

    def astype(self, dtype):
        return self.with_params([p.astype(dtype) for p in self.params()])

    def is_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.params())

    def __repr__(self):
        return 'MlpNet({})'.format(self.layer_dims)
