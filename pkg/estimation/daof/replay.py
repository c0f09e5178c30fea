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
""" FIFO replay of filtering transitions.

    Successor windows are not stored: h_{t+1} is (x̂_t, y_{t+1}) followed by
    the first N-1 pairs of h_t, so each record keeps y_{t+1} alone and the
    flat successor is rebuilt on read.
"""
from collections import namedtuple
import numpy as np
from estimation.core import DimensionError

TransitionRecord = namedtuple('TransitionRecord', ['window', 'action', 'estimate', 'cost',
                                                   'next_window', 'terminal'])

# Stacked TransitionRecord fields, one row per sample.
Batch = namedtuple('Batch', ['windows', 'actions', 'estimates', 'costs', 'next_windows',
                             'terminals'])

_INITIAL_ROWS = 4096


class ReplayBuffer(object):
    """ Ring buffer of transitions with uniform sampling without replacement.

    Args:
        capacity: maximum number of records; the oldest is evicted first.
        window_length: N.
        n: state dimension.
        m: measurement dimension.
        action_dim: width of the stored actor action; n by default.
    """

    def __init__(self, capacity, window_length, n, m, action_dim=None):
        if capacity < 1:
            raise ValueError('replay capacity must be positive')
        self.capacity = int(capacity)
        self.window_length = int(window_length)
        self.n = int(n)
        self.m = int(m)
        self.action_dim = self.n if action_dim is None else int(action_dim)
        self.window_dim = self.window_length * (self.n + self.m)
        self._next = 0
        self._size = 0
        self._inserted = 0
        self._arrays = self._allocate(min(self.capacity, _INITIAL_ROWS))

    def _allocate(self, rows):
        return {'windows': np.zeros((rows, self.window_dim)),
                'actions': np.zeros((rows, self.action_dim)),
                'estimates': np.zeros((rows, self.n)),
                'costs': np.zeros(rows),
                'next_measurements': np.zeros((rows, self.m)),
                'terminals': np.zeros(rows, dtype=bool)}

    def _grow(self):
        rows = len(self._arrays['costs'])
        grown = self._allocate(min(self.capacity, 2 * rows))
        for key, values in self._arrays.items():
            grown[key][:rows] = values
        self._arrays = grown

    def __len__(self):
        return self._size

    @property
    def inserted(self):
        """Records added over the buffer's lifetime, evicted ones included."""
        return self._inserted

    def add(self, window, action, estimate, cost, next_window, terminal):
        """ Store one transition; windows are flat vectors. """
        window = np.asarray(window, dtype=np.float64).reshape(-1)
        next_window = np.asarray(next_window, dtype=np.float64).reshape(-1)
        if window.shape != (self.window_dim,) or next_window.shape != (self.window_dim,):
            raise DimensionError('windows have shapes {} and {}, expected ({},)'.format(
                window.shape, next_window.shape, self.window_dim))
        if self._next >= len(self._arrays['costs']):
            self._grow()
        i = self._next
        arrays = self._arrays
        arrays['windows'][i] = window
        arrays['actions'][i] = action
        arrays['estimates'][i] = estimate
        arrays['costs'][i] = cost
        arrays['next_measurements'][i] = next_window[self.n:self.n + self.m]
        arrays['terminals'][i] = terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self._inserted += 1

    def _next_windows(self, idx):
        arrays = self._arrays
        pair = self.n + self.m
        return np.concatenate([arrays['estimates'][idx], arrays['next_measurements'][idx],
                               arrays['windows'][idx, :self.window_dim - pair]], axis=-1)

    def _slot(self, i):
        if not 0 <= i < self._size:
            raise IndexError('record {} out of range for {} records'.format(i, self._size))
        start = self._next if self._size == self.capacity else 0
        return (start + i) % self.capacity

    def get(self, i):
        """The i-th oldest surviving record."""
        j = self._slot(i)
        arrays = self._arrays
        return TransitionRecord(arrays['windows'][j].copy(), arrays['actions'][j].copy(),
                                arrays['estimates'][j].copy(), float(arrays['costs'][j]),
                                self._next_windows(j), bool(arrays['terminals'][j]))

    def sample(self, batch_size, rng):
        """ Uniform batch without replacement within the batch. """
        if batch_size > self._size:
            raise ValueError('cannot sample {} records from {}'.format(batch_size, self._size))
        idx = rng.choice(self._size, size=batch_size, replace=False)
        arrays = self._arrays
        return Batch(arrays['windows'][idx], arrays['actions'][idx], arrays['estimates'][idx],
                     arrays['costs'][idx], self._next_windows(idx), arrays['terminals'][idx])
