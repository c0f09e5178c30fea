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


def rk4_step(fn, x, t, h):
    """ One classical 4th order Runge-Kutta step.

    Args:
        fn: derivative function fn(t, x).
        x: state at time t.
        t: time.
        h: step size.

    Returns:
        state at time t + h.
    """
    k1 = fn(t, x)
    k2 = fn(t + h / 2, x + h / 2 * k1)
    k3 = fn(t + h / 2, x + h / 2 * k2)
    k4 = fn(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_integrate(fn, x, t0, t1, substeps):
    h = (t1 - t0) / substeps
    t = t0
    for j in range(1, substeps + 1):
        x = rk4_step(fn, x, t, h)
        t = t0 + j * h
    return x
