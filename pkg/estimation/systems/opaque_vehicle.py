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
""" Black-box vehicle used for model-free filtering.

    A 5 state vehicle with coupled roll and lateral dynamics, integrated with
    RK4 and exposed only as an OpaqueSource. The dynamics below are never
    handed to a filter; they produce data.

    States:
        v_x   longitudinal speed [m/s]
        beta  side slip angle [rad]
        omega yaw rate [rad/s]
        phi   roll angle [rad]
        p     roll rate [rad/s]

    Measurements:
        four wheel speeds (fl, fr, rl, rr) [m/s], a_x, a_y [m/s^2] as read by a
        body-fixed accelerometer, yaw rate [rad/s], and a GNSS-like velocity
        pair (v_x, v_y) [m/s].
"""
from collections import namedtuple
import logging
import numpy as np
from estimation.core import as_vector, covariance_factor
from .base import OpaqueSource
from .bicycle import GRAVITY
from .integrators import rk4_integrate

STATE_NAMES = ['v_x', 'beta', 'omega', 'phi', 'p']
MEASUREMENT_NAMES = ['wheel_fl', 'wheel_fr', 'wheel_rl', 'wheel_rr', 'a_x',
                     'a_y', 'omega', 'gnss_vx', 'gnss_vy']

VehicleParams = namedtuple('VehicleParams', [
    'mass', 'sprung_mass', 'yaw_inertia', 'roll_inertia', 'lf', 'lr', 'track',
    'cg_height', 'roll_arm', 'roll_stiffness', 'roll_damping', 'mu', 'tire_b',
    'tire_c', 'load_sensitivity', 'drag', 'speed_target', 'speed_gain',
    'slip_stiffness', 'steer_ramp', 'steer_ramp_time', 'steer_amplitude',
    'steer_frequency', 'dt', 'substeps'])


def _forces(t, state, params):
    vx, beta, omega, phi, p = state
    wheelbase = params.lf + params.lr
    steer = (params.steer_ramp * min(t / params.steer_ramp_time, 1.0) +
             params.steer_amplitude * np.sin(params.steer_frequency * t))
    vy = vx * np.tan(beta)

    drive = params.mass * params.speed_gain * (params.speed_target - vx)
    drag = params.drag * vx * vx

    # Longitudinal load transfer from net traction.
    transfer = (drive - drag) * params.cg_height / wheelbase
    load_f = params.mass * GRAVITY * params.lr / wheelbase - transfer
    load_r = params.mass * GRAVITY * params.lf / wheelbase + transfer

    # Lateral load transfer from the roll moment erodes axle grip.
    lateral = (params.roll_stiffness * phi + params.roll_damping * p) / params.track / 2

    def peak(load):
        ratio = min(abs(lateral) / max(load, 1.0), 1.0)
        return params.mu * load * (1.0 - params.load_sensitivity * ratio * ratio)

    alpha_f = steer - (vy + params.lf * omega) / vx
    alpha_r = -(vy - params.lr * omega) / vx
    shape = params.tire_c
    force_f = peak(load_f) * np.sin(shape * np.arctan(params.tire_b * alpha_f))
    force_r = peak(load_r) * np.sin(shape * np.arctan(params.tire_b * alpha_r))

    a_x = (drive - force_f * np.sin(steer) - drag) / params.mass
    a_y = (force_f * np.cos(steer) + force_r) / params.mass
    return steer, vy, drive, load_r, force_f, force_r, a_x, a_y


def vehicle_derivatives(t, state, params):
    vx, beta, omega, phi, p = state
    steer, vy, _, _, force_f, force_r, a_x, a_y = _forces(t, state, params)
    d_vx = a_x + omega * vy
    d_beta = a_y / vx - omega
    d_omega = (params.lf * force_f * np.cos(steer) -
               params.lr * force_r) / params.yaw_inertia
    d_p = (params.sprung_mass * params.roll_arm *
           (a_y * np.cos(phi) + GRAVITY * np.sin(phi)) -
           params.roll_stiffness * phi - params.roll_damping * p) / params.roll_inertia
    return np.array([d_vx, d_beta, d_omega, p, d_p])


def vehicle_outputs(t, state, params):
    """Noise-free sensor readings for a state at continuous time t."""
    vx, beta, omega, phi, p = state
    steer, vy, drive, load_r, _, _, a_x, a_y = _forces(t, state, params)
    half = params.track / 2
    front_lateral = vy + params.lf * omega
    wheel_fl = (vx - omega * half) * np.cos(steer) + front_lateral * np.sin(steer)
    wheel_fr = (vx + omega * half) * np.cos(steer) + front_lateral * np.sin(steer)
    drive_slip = drive / (params.slip_stiffness * load_r)
    wheel_rl = (vx - omega * half) * (1.0 + drive_slip)
    wheel_rr = (vx + omega * half) * (1.0 + drive_slip)
    return np.array([wheel_fl, wheel_fr, wheel_rl, wheel_rr, a_x,
                     a_y + GRAVITY * np.sin(phi), omega, vx, vy])


def within_guard(state):
    vx, beta, _, phi, _ = state
    return bool(np.all(np.isfinite(state)) and vx > 1.0 and
                abs(beta) < np.pi / 2 and abs(phi) < 0.5)


class OpaqueVehicleSource(OpaqueSource):
    """ RK4-integrated vehicle behind the OpaqueSource interface.

    Args:
        params: VehicleParams.
        process_noise: 5-d noise added once per control period.
        measurement_noise: 9-d noise added to every reading.
        initial_mean, initial_covariance: Gaussian over the initial state.
    """

    state_names = STATE_NAMES
    measurement_names = MEASUREMENT_NAMES

    def __init__(self, params, process_noise, measurement_noise, initial_mean,
                 initial_covariance):
        self._params = params
        self._process_noise = process_noise
        self._measurement_noise = measurement_noise
        self._initial_mean = as_vector(initial_mean, 5, 'initial_mean')
        covariance = np.atleast_2d(np.asarray(initial_covariance, dtype=np.float64))
        self._initial_chol = (covariance_factor(covariance) if np.any(covariance)
                              else np.zeros((5, 5)))
        if process_noise.dim != 5 or measurement_noise.dim != 9:
            raise ValueError('opaque vehicle needs 5-d process and 9-d '
                             'measurement noise, got {} and {}'.format(
                                 process_noise.dim, measurement_noise.dim))
        self._rng = None
        self._x = None
        self._k = 0
        self._diverged = False

    @property
    def n(self):
        return 5

    @property
    def m(self):
        return 9

    @property
    def dt(self):
        return self._params.dt

    @property
    def initial_mean(self):
        return self._initial_mean

    @property
    def diverged(self):
        return self._diverged

    def _measure(self):
        t = self._k * self._params.dt
        return (vehicle_outputs(t, self._x, self._params) +
                self._measurement_noise.sample(self._rng))

    def reset(self, seed):
        self._rng = self._as_rng(seed)
        self._k = 0
        self._diverged = False
        z = self._rng.standard_normal(5)
        self._x = self._initial_mean + self._initial_chol.dot(z)
        return self._x.copy(), self._measure()

    def step(self):
        if self._rng is None:
            raise RuntimeError('source stepped before reset')
        if self._diverged:
            raise RuntimeError('source stepped after divergence')
        params = self._params
        t0 = self._k * params.dt
        x = rk4_integrate(lambda t, s: vehicle_derivatives(t, s, params),
                          self._x, t0, t0 + params.dt, params.substeps)
        self._x = x + self._process_noise.sample(self._rng)
        self._k += 1
        if not within_guard(self._x):
            self._diverged = True
            logging.debug('Vehicle guard violated at step %d: %s', self._k, self._x)
            return self._x.copy(), np.full(9, np.nan)
        return self._x.copy(), self._measure()
