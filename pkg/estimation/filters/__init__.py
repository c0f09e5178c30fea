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

from .base import FilterDivergenceError, FilterState, OnlineFilter
from .baselines import OracleFilter, ZeroOrderHold
from .kalman import KalmanFilter, StationaryKalmanFilter, kf_step
from .particle import ParticleFilter, ParticleSet, pf_step, systematic_resample
from .supervised import (SlfConfig, SupervisedLearningFilter, SupervisedModel,
                         epoch_quotas, load_slf, save_slf, slf_step, slf_train,
                         slf_transitions, train_slf)
from .unscented import UkfParams, UnscentedKalmanFilter, ukf_step
