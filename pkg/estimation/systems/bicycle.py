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
""" Two degree of freedom single-track vehicle with magic-formula tires.

    State is (δ, Ω): side slip angle [rad] and yaw rate [rad/s]. The
    steering input follows a fixed schedule u_t = A sin(ω t dt), so the
    model stays a pure function of (state, time index).
"""
from collections import namedtuple
import numpy as np
from .base import ExplicitSystem

GRAVITY = 9.81

_PARAM_FIELDS = ['mass', 'yaw_inertia', 'lf', 'lr', 'tire_b', 'tire_c',
                 'tire_d', 'vx', 'dt', 'steer_amplitude', 'steer_frequency']


class BicycleParams(namedtuple('BicycleParams', _PARAM_FIELDS)):
    """ Vehicle parameters in SI units.

    tire_d is the peak lateral force per axle [N]; steer_frequency is the
    angular frequency ω of the steering schedule [rad/s].
    """

    @classmethod
    def defaults(cls):
        mass = 1412.0
        dt = 0.02
        return cls(mass=mass,
                   yaw_inertia=1536.7,
                   lf=1.06,
                   lr=1.85,
                   tire_b=10.0,
                   tire_c=1.5,
                   tire_d=0.75 * mass * GRAVITY / 2,
                   vx=15.0,
                   dt=dt,
                   steer_amplitude=0.1,
                   steer_frequency=0.5 * 2 * np.pi / (500 * dt))

    @classmethod
    def from_config(cls, section):
        params = cls(**{k: float(section[k]) for k in _PARAM_FIELDS})
        if params.vx <= 0:
            raise ValueError('vx must be positive, got {}'.format(params.vx))
        if params.tire_d <= 0:
            raise ValueError('tire_d must be positive, got {}'.format(params.tire_d))
        return params


def magic_formula(alpha, params):
    return params.tire_d * np.sin(params.tire_c * np.arctan(params.tire_b * alpha))


def lateral_forces(state, u, params):
    """Front and rear axle lateral forces for state(s) [..., 2]."""
    state = np.asarray(state, dtype=np.float64)
    delta, omega = state[..., 0], state[..., 1]
    alpha_f = u - delta - params.lf * omega / params.vx
    alpha_r = -delta + params.lr * omega / params.vx
    return magic_formula(alpha_f, params), magic_formula(alpha_r, params)


def bicycle_derivatives(state, u, params):
    """ Continuous-time derivatives (dδ/dt, dΩ/dt).

    Args:
        state: array [..., 2] of (δ, Ω).
        u: front steering angle [rad].
        params: BicycleParams.

    Returns:
        array shaped like state.
    """
    state = np.asarray(state, dtype=np.float64)
    force_f, force_r = lateral_forces(state, u, params)
    d_delta = (force_f + force_r) / (params.mass * params.vx) - state[..., 1]
    d_omega = (params.lf * force_f - params.lr * force_r) / params.yaw_inertia
    return np.stack([d_delta, d_omega], axis=-1)


class BicycleSystem(ExplicitSystem):
    """ Euler-discretized 2-DOF vehicle, measured through [a_y, Ω]. """

    state_names = ['delta', 'omega']
    measurement_names = ['a_y', 'omega']

    def __init__(self, params, process_noise, measurement_noise, initial_mean,
                 initial_covariance):
        self.params = params
        super(BicycleSystem, self).__init__(process_noise, measurement_noise,
                                            initial_mean, initial_covariance,
                                            params.dt)

    @property
    def n(self):
        return 2

    @property
    def m(self):
        return 2

    def control(self, t):
        p = self.params
        return p.steer_amplitude * np.sin(p.steer_frequency * t * p.dt)

    def transition(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        return x + self.params.dt * bicycle_derivatives(x, self.control(t),
                                                        self.params)

    def measurement(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        force_f, force_r = lateral_forces(x, self.control(t), self.params)
        a_y = (force_f + force_r) / self.params.mass
        return np.stack([a_y, x[..., 1]], axis=-1)

    def within_guard(self, x):
        return bool(np.all(np.isfinite(x)) and abs(x[0]) < np.pi / 2)
