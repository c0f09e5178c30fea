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
from .environment import EnvStep, MfpEnv
from .evaluation import evaluate, evaluation_rmse
from .objectives import ActorLoss, CriticLoss, actor_loss, critic_input, critic_loss, td_targets
from .policy import (V1, V2, DaofFilter, DaofPolicy, NonFiniteEstimateError, daof_estimate,
                     load_daof, policy_from_checkpoint, save_daof)
from .replay import Batch, ReplayBuffer, TransitionRecord
from .trainer import (Learner, TrainConfig, TrainResult, TrainingDivergenceError, build_learner,
                      exploration_sigma, plateaued, standardize_batch, train,
                      warmup_statistics)
