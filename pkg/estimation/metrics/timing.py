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
""" Estimator timing.

    Latency is the median over groups of the mean per-call time, after a
    warm-up, on the monotonic perf_counter clock.
"""
from collections import defaultdict
import contextlib
import time
import numpy as np

DEFAULT_GROUPS = 20


def measure_latency(call, calls=10000, warmup=100, groups=DEFAULT_GROUPS):
    """ Median-of-means latency of `call()` in milliseconds. """
    if calls < groups:
        raise ValueError('need at least {} calls, got {}'.format(groups, calls))
    for _ in range(warmup):
        call()
    per_group = calls // groups
    means = []
    for _ in range(groups):
        start = time.perf_counter()
        for _ in range(per_group):
            call()
        means.append((time.perf_counter() - start) / per_group)
    return 1000.0 * float(np.median(means))


def stepping_call(filter_, prior, measurements, rng, truths=None):
    """ A zero-argument callable that advances `filter_` by one measurement.

    Cycles through `measurements`, restarting the filter at the end of the
    sequence or when it raises.
    """
    extra = (lambda k: {'truth': truths[k]}) if filter_.requires_truth else (lambda k: {})
    cursor = {'k': 0, 'state': filter_.reset(prior, measurements[0], rng, **extra(0))}

    def call():
        k = cursor['k'] + 1
        if k >= len(measurements):
            cursor['state'] = filter_.reset(prior, measurements[0], rng, **extra(0))
            cursor['k'] = 0
            return
        try:
            cursor['state'] = filter_.step(cursor['state'], measurements[k], rng, **extra(k))
            cursor['k'] = k
        except (ArithmeticError, ValueError):
            cursor['state'] = filter_.reset(prior, measurements[0], rng, **extra(0))
            cursor['k'] = 0

    return call


class SplitTimer(object):
    """ Wall clock split into named sections.

    Sections must not nest; whatever the sections do not cover is `overhead`.
    """

    def __init__(self):
        self.totals = defaultdict(float)
        self.counts = defaultdict(int)
        self._start = None
        self.wall = 0.0

    def start(self):
        self._start = time.perf_counter()

    def stop(self):
        self.wall += time.perf_counter() - self._start
        self._start = None
        return self.wall

    @contextlib.contextmanager
    def section(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] += time.perf_counter() - start
            self.counts[name] += 1

    @property
    def overhead(self):
        return self.wall - sum(self.totals.values())

    def mean_ms(self, name):
        count = self.counts[name]
        return 1000.0 * self.totals[name] / count if count else float('nan')
