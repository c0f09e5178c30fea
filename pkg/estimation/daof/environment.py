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
""" Markovian filtering environment.

    The agent observes a history window h_t and emits an estimate x̂_t; the
    environment charges ‖x_t − x̂_t‖² against the hidden true state and slides
    the window with (x̂_t, y_{t+1}). True states never leave this class except
    through `truth`, which only the trainer reads.
"""
from collections import namedtuple
import logging
import numpy as np
from estimation.core import HistoryWindow, as_vector
from estimation.systems.base import SourceExhausted

EnvStep = namedtuple('EnvStep', ['cost', 'window', 'done', 'terminal'])


class MfpEnv(object):
    """ Episodic environment over an OpaqueSource.

    Args:
        source: OpaqueSource (an ExplicitSource for simulated systems).
        window_length: history length N.
        horizon: cost-bearing steps per episode.
        gamma: discount, kept here for bookkeeping of returns.
    """

    def __init__(self, source, window_length, horizon=500, gamma=0.99):
        self.source = source
        self.window_length = int(window_length)
        self.horizon = int(horizon)
        self.gamma = float(gamma)
        self._window = None
        self._truth = None
        self._steps = 0
        self._done = True

    @property
    def n(self):
        return self.source.n

    @property
    def m(self):
        return self.source.m

    @property
    def window(self):
        return self._window

    @property
    def truth(self):
        return self._truth

    @property
    def t(self):
        """Time index of the state the next estimate is scored against."""
        return self._steps + 1

    @property
    def done(self):
        return self._done

    def reset(self, seed, initial_estimate=None):
        """ Start an episode; returns the first window h_1.

        The window is padded with (x̂_0, y_0), then receives (x̂_0, y_1).
        """
        x0, y0 = self.source.reset(seed)
        prior = as_vector(self.source.initial_mean if initial_estimate is None
                          else initial_estimate, self.n, 'initial_estimate')
        window = HistoryWindow.padded(self.window_length, prior, y0)
        x1, y1 = self.source.step()
        if self.source.diverged:
            raise RuntimeError('source diverged on its first step')
        self._window = window.update(prior, y1)
        self._truth = np.asarray(x1, dtype=np.float64)
        self._steps = 0
        self._done = False
        return self._window

    def step(self, estimate):
        """ Score `estimate` against x_t and advance to h_{t+1}.

        Returns:
            EnvStep(cost, window, done, terminal). `terminal` is set only when
            the underlying system left its guard or ran out of data; reaching
            the horizon sets `done` alone.
        """
        if self._done:
            raise RuntimeError('environment stepped after the episode ended')
        estimate = np.asarray(estimate, dtype=np.float64).reshape(-1)
        cost = float(np.sum((self._truth - estimate) ** 2))
        self._steps += 1
        terminal = False
        try:
            x, y = self.source.step()
        except SourceExhausted:
            x, y, terminal = None, None, True
        if not terminal and self.source.diverged:
            logging.debug('Source diverged at step %d; ending episode', self._steps)
            terminal = True
        if terminal:
            # The successor is never bootstrapped; keep it finite.
            y = self._window.measurements[0]
        else:
            self._truth = np.asarray(x, dtype=np.float64)
        self._window = self._window.update(estimate, y)
        self._done = terminal or self._steps >= self.horizon
        return EnvStep(cost, self._window, self._done, terminal)
