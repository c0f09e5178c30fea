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
from estimation.metrics.report import BenchReport, summarize
from estimation.metrics.rollout import evaluate_filter
from .policy import DaofFilter


def evaluation_rmse(make_filter, make_source, runs, steps, rng):
    """ Mean per-state RMSE of noise-free rollouts; inf if any run failed. """
    results = evaluate_filter(make_filter, make_source, runs, steps, rng, name='eval')
    summary = summarize('eval', results)
    if np.any(summary.diverged):
        return np.full(len(summary.rmse_mean), np.inf)
    return summary.rmse_mean


def evaluate(policy, make_source, runs, steps, rng, name=None, threads=1,
             divergence_bound=None, config_hash=''):
    """ Monte Carlo evaluation of a DAOF policy without exploration noise.

    Args:
        policy: DaofPolicy.
        make_source: callable returning a fresh OpaqueSource per run.
        runs, steps: protocol shape, 100 x 500 by default in bench.
        rng: base Rng; run k uses rng.child(k).
        name: report row name, 'DAOF-<variant>' by default.
        threads: worker threads for runs.
        divergence_bound: max |error| before a run counts as divergent.
        config_hash: resolved config hash recorded in the report.

    Returns:
        BenchReport with a single filter row. `step_ms` is the mean
        wall-clock of filter calls only.
    """
    name = name or 'DAOF-{}'.format(policy.variant)
    source = make_source()
    results = evaluate_filter(lambda: DaofFilter(policy), make_source, runs, steps, rng,
                              threads=threads, divergence_bound=divergence_bound, name=name)
    summary = summarize(name, results)
    summary = summary._replace(latency_ms=summary.step_ms)
    state_names = list(getattr(source, 'state_names', None) or
                       ['x{}'.format(i) for i in range(source.n)])
    return BenchReport(state_names, [summary], runs, steps, config_hash,
                       [[rng.seed] + list(rng.child(k).stream) for k in range(runs)], {})
