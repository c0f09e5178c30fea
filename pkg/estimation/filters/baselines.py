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
from .base import FilterState, OnlineFilter


class ZeroOrderHold(OnlineFilter):
    """x̂_t = x̂_{t-1}: the prior mean held forever."""

    def reset(self, initial_estimate, first_measurement, rng):
        return FilterState(np.array(initial_estimate, dtype=np.float64), None, 0)

    def step(self, state, measurement, rng):
        return FilterState(state.estimate, None, state.t + 1)


class OracleFilter(OnlineFilter):
    """Returns the true state. Test baseline only."""

    requires_truth = True

    def reset(self, initial_estimate, first_measurement, rng, truth=None):
        return FilterState(np.array(truth, dtype=np.float64), None, 0)

    def step(self, state, measurement, rng, truth=None):
        return FilterState(np.array(truth, dtype=np.float64), None, state.t + 1)
