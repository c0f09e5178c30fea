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


class Standardizer(object):
    """ Affine feature scaling (x - feature_means) / (feature_stds + epsilon). """

    def __init__(self, feature_means, feature_stds, epsilon=1e-6):
        self.feature_means = np.asarray(feature_means, dtype=np.float64)
        self.feature_stds = np.asarray(feature_stds, dtype=np.float64)
        self.epsilon = float(epsilon)
        self._scale = self.feature_stds + self.epsilon

    @classmethod
    def fit(cls, samples):
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        return cls(samples.mean(axis=0), samples.std(axis=0))

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim), epsilon=0.0)

    @property
    def dim(self):
        return len(self.feature_means)

    def apply(self, x):
        return (x - self.feature_means) / self._scale

    def invert(self, z):
        return z * self._scale + self.feature_means

    def to_dict(self):
        return {'feature_means': self.feature_means.tolist(),
                'feature_stds': self.feature_stds.tolist(),
                'epsilon': self.epsilon}

    @classmethod
    def from_dict(cls, d):
        return cls(d['feature_means'], d['feature_stds'], d.get('epsilon', 1e-6))
