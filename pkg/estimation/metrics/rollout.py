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
""" Online filter rollouts against an OpaqueSource.

    Each run seeds its source with `rng.child(k).child(0)` and its filter
    with `rng.child(k).child(1)`, so every filter sees the same trajectories
    for the same base rng. Only filter calls fall inside the 'filter' timer
    section; source stepping is 'simulation'.
"""
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
import logging
import numpy as np
from estimation.core import Trajectory, rmse
from estimation.systems.base import SourceExhausted
from .timing import SplitTimer

RunResult = namedtuple('RunResult', ['run', 'trajectory', 'diverged', 'reason', 'timer'])

# Errors a filter may raise when its estimate blows up.
FILTER_FAILURES = (ArithmeticError, np.linalg.LinAlgError)


def run_filter(filter_, source, steps, rng, run=0, divergence_bound=None):
    """ Filter one trajectory of `steps` steps online.

    Args:
        filter_: OnlineFilter.
        source: OpaqueSource, reset here.
        steps: trajectory length T including t = 0.
        rng: run Rng; child 0 seeds the source, child 1 the filter.
        run: run index, recorded in the result.
        divergence_bound: max |error| above which the run is divergent.

    Returns:
        RunResult; the trajectory carries estimates for every recorded step
        and stops early if the filter raised.
    """
    filter_rng = rng.child(1)
    timer = SplitTimer()
    timer.start()
    with timer.section('simulation'):
        x, y = source.reset(rng.child(0))
        prior = np.asarray(source.initial_mean, dtype=np.float64)
    extra = {'truth': x} if filter_.requires_truth else {}
    diverged, reason = False, None
    states, measurements, estimates = [x], [y], []
    try:
        with timer.section('filter'):
            state = filter_.reset(prior, y, filter_rng, **extra)
        estimates.append(state.estimate)
        for _ in range(1, steps):
            with timer.section('simulation'):
                try:
                    x, y = source.step()
                except SourceExhausted:
                    break
            if source.diverged:
                break
            if filter_.requires_truth:
                extra = {'truth': x}
            with timer.section('filter'):
                state = filter_.step(state, y, filter_rng, **extra)
            states.append(x)
            measurements.append(y)
            estimates.append(state.estimate)
    except FILTER_FAILURES as err:
        diverged, reason = True, '{}: {}'.format(type(err).__name__, err)
        if not estimates:
            estimates = [np.full(len(states[0]), np.nan)]
        states, measurements = states[:len(estimates)], measurements[:len(estimates)]
    timer.stop()
    estimates = np.array(estimates)
    trajectory = Trajectory(np.array(states), np.array(measurements), source.dt,
                            estimates=estimates)
    if not diverged:
        errors = estimates - trajectory.true_states
        if not np.all(np.isfinite(errors)):
            diverged, reason = True, 'non-finite estimate'
        elif divergence_bound is not None and np.max(np.abs(errors)) > divergence_bound:
            diverged, reason = True, 'error exceeded {}'.format(divergence_bound)
    return RunResult(run, trajectory, diverged, reason, timer)


def run_rmse(result):
    """ Per-state RMSE over t >= 1; NaN when nothing past t = 0 was filtered. """
    trajectory = result.trajectory
    if len(trajectory) < 2:
        return np.full(trajectory.n, np.nan)
    return np.array([rmse(trajectory.estimates[1:], trajectory.true_states[1:], i)
                     for i in range(trajectory.n)])


def evaluate_filter(make_filter, make_source, runs, steps, rng, threads=1,
                    divergence_bound=None, name='filter'):
    """ Monte Carlo evaluation over `runs` independent runs.

    Args:
        make_filter: callable returning a fresh OnlineFilter.
        make_source: callable returning a fresh OpaqueSource.
        runs, steps: protocol shape R x T.
        rng: base Rng; run k uses rng.child(k).
        threads: worker threads; runs are independent.
        divergence_bound: see `run_filter`.
        name: label for log lines.

    Returns:
        list of RunResult in run order.
    """

    def one(k):
        return run_filter(make_filter(), make_source(), steps, rng.child(k), k,
                          divergence_bound)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(runs)))
    else:
        results = [one(k) for k in range(runs)]
    for result in results:
        if result.diverged:
            logging.warning('%s run %d diverged: %s', name, result.run, result.reason)
    return results
