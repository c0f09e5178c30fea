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
""" Online filter interface shared by every estimator.

    Time convention: `reset` returns the state at t = 0, whose estimate is
    the prior mean x̂_0. Each `step(state, y_t)` predicts from x̂_{t-1} with
    the transition indexed t - 1 and then corrects with y_t.
"""
import abc
from collections import namedtuple

FilterState = namedtuple('FilterState', ['estimate', 'belief', 't'])


class FilterDivergenceError(ArithmeticError):
    pass


class OnlineFilter(object, metaclass=abc.ABCMeta):

    # Needs an ExplicitSystem (f and g).
    requires_model = False
    # Reads the true state; only test baselines set this.
    requires_truth = False

    @abc.abstractmethod
    def reset(self, initial_estimate, first_measurement, rng):
        pass

    @abc.abstractmethod
    def step(self, state, measurement, rng):
        pass
