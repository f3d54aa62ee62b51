"""Interaction-matrix machinery and the servoing control laws.

All controllers are pure functions of their inputs.  The feature error is
``e = observed.xy - desired.xy`` (8-vector, normalized coordinates); camera
twists are body-frame (vx, vy, vz, wx, wy, wz).
"""

from __future__ import annotations

import math

import numpy as np

from ._validation import as_matrix, as_vector, require_positive
from .camera import FeatureVector, Scenario, desired_features
from .se3 import Twist

# Relative singular-value cutoff for pseudoinversion.
SVD_CUTOFF = 1e-10


def visual_error(observed: FeatureVector, desired: FeatureVector) -> np.ndarray:
    """Feature error e (8,): observed minus desired normalized coordinates."""
    return observed.xy - desired.xy


def interaction_matrix(features: FeatureVector) -> np.ndarray:
    """The 8x6 map from camera twist to feature rate for 4 point features.

    Each point (x, y) at depth Z contributes the standard two rows
    [-1/Z, 0, x/Z, xy, -(1+x^2), y] and [0, -1/Z, y/Z, 1+y^2, -xy, -x].
    """
    L = np.empty((8, 6))
    for i in range(4):
        x, y = features.xy[2 * i], features.xy[2 * i + 1]
        z = features.depths[i]
        if z <= 0.0:
            raise ValueError(f"feature depth must be positive, got {z}")
        L[2 * i] = (-1.0 / z, 0.0, x / z, x * y, -(1.0 + x * x), y)
        L[2 * i + 1] = (0.0, -1.0 / z, y / z, 1.0 + y * y, -x * y, -x)
    return L


def pseudoinverse(m) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD with a relative cutoff on singular values."""
    m = np.asarray(m, dtype=float)
    return np.linalg.pinv(m, rcond=SVD_CUTOFF)


def goal_interaction_pinv(scenario: Scenario) -> np.ndarray:
    """The constant 6x8 pseudoinverse frozen at the convergence configuration.

    Computed once per scenario from the desired features (all depths at the
    goal depth) and reused for the whole run.
    """
    return pseudoinverse(interaction_matrix(desired_features(scenario)))


def vs_control(e, gain: float, lpinv) -> Twist:
    """Plain servoing law: v = -gain * Lp @ e."""
    e = as_vector(e, 8, "visual error")
    lpinv = as_matrix(lpinv, (6, 8), "pseudoinverse")
    return Twist.from_array(-float(gain) * (lpinv @ e))


def target_feature_rate(features: FeatureVector, target_twist_cam: Twist) -> np.ndarray:
    """Feature drift (8,) caused by target translation, camera held still.

    ``target_twist_cam`` is the target's velocity expressed in the camera
    frame; its angular part is assumed zero (belt translation).  Per point:
    dx/dt = vx/Z - x*vz/Z and dy/dt = vy/Z - y*vz/Z.
    """
    v = target_twist_cam.linear
    rate = np.empty(8)
    for i in range(4):
        z = features.depths[i]
        if z <= 0.0:
            raise ValueError(f"feature depth must be positive, got {z}")
        x, y = features.xy[2 * i], features.xy[2 * i + 1]
        rate[2 * i] = (v[0] - x * v[2]) / z
        rate[2 * i + 1] = (v[1] - y * v[2]) / z
    return rate


def tracking_control(e, gain: float, lpinv, de_dt) -> Twist:
    """Servoing with feedforward: v = -gain * Lp @ e - Lp @ de_dt."""
    e = as_vector(e, 8, "visual error")
    de_dt = as_vector(de_dt, 8, "feature rate")
    lpinv = as_matrix(lpinv, (6, 8), "pseudoinverse")
    return Twist.from_array(-float(gain) * (lpinv @ e) - lpinv @ de_dt)


def vanishing_gain(t: float, t_cut: float, tau: float) -> float:
    """Suppression factor for the corrective term: 1 until ``t_cut``, then
    exponential decay with time constant ``tau``."""
    require_positive(tau, "tau")
    if t <= t_cut:
        return 1.0
    return math.exp(-(t - t_cut) / tau)


def reshaped_control(e, gain: float, lpinv, correction: Twist, h: float) -> Twist:
    """Servoing plus a gated corrective twist: v = -gain * Lp @ e + h * correction."""
    base = vs_control(e, gain, lpinv)
    return Twist.from_array(base.as_array() + float(h) * correction.as_array())


def ilvs_control(e, gain: float, lpinv, model) -> Twist:
    """Servoing plus the learned compensation, always active.

    The model maps the pseudoinverse-mapped error eps = Lp @ e to the
    compensating twist; v = -gain * Lp @ e + model(eps).
    """
    e = as_vector(e, 8, "visual error")
    lpinv = as_matrix(lpinv, (6, 8), "pseudoinverse")
    eps = lpinv @ e
    return Twist.from_array(-float(gain) * eps + model.predict_compensation(eps))


def oracle_controller(e, features: FeatureVector, camera_rotation,
                      target_twist_world: Twist, gain: float, lpinv) -> Twist:
    """Ideal tracking law fed the true target velocity from the simulator.

    The world-frame target twist is expressed in the camera frame through
    ``camera_rotation`` and cancelled with the exact feedforward term; with
    a static target this reduces to the plain servoing law.
    """
    vt_cam = Twist(
        np.asarray(camera_rotation, dtype=float).T @ target_twist_world.linear,
        np.zeros(3))
    return tracking_control(e, gain, lpinv, target_feature_rate(features, vt_cam))
