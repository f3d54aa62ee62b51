"""Rigid-body poses, twists, and closed-form twist integration.

Poses store a rotation matrix and a translation; twists are body-frame
6-D velocities (linear, angular).  Integration uses the closed-form
exponential map so episodes are deterministic and step-size independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_vector, require_rotation

# Below this rotation magnitude (rad) the exponential map switches to its
# second-order series to avoid 0/0.
SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class Pose:
    """Rigid transform: ``rotation`` (3x3) and ``translation`` (3,) in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", as_vector(self.translation, 3, "translation"))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def translated(self, offset) -> "Pose":
        """This pose with ``offset`` (world frame, m) added to the translation."""
        return Pose(self.rotation, self.translation + as_vector(offset, 3, "offset"))


@dataclass(frozen=True)
class Twist:
    """Body-frame spatial velocity: ``linear`` (m/s) and ``angular`` (rad/s)."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", as_vector(self.linear, 3, "linear"))
        object.__setattr__(self, "angular", as_vector(self.angular, 3, "angular"))

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(v) -> "Twist":
        v = as_vector(v, 6, "twist")
        return Twist(v[:3], v[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


def compose(a: Pose, b: Pose) -> Pose:
    """Rigid composition: apply ``b`` in the frame of ``a``."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rt, -rt @ p.translation)


def transform_point(p: Pose, x) -> np.ndarray:
    """Map a point through the transform: R x + t."""
    return p.rotation @ as_vector(x, 3, "point") + p.translation


def skew(w) -> np.ndarray:
    w = as_vector(w, 3, "vector")
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def rotation_exp(w) -> np.ndarray:
    """Rodrigues formula: rotation matrix for the rotation vector ``w``."""
    w = as_vector(w, 3, "rotation vector")
    theta = np.linalg.norm(w)
    wx = skew(w)
    if theta < SMALL_ANGLE:
        return np.eye(3) + wx + 0.5 * wx @ wx
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * wx + b * wx @ wx


def _translation_coupling(w: np.ndarray) -> np.ndarray:
    # V matrix of the SE(3) exponential: couples constant angular velocity
    # into the translation swept over the step.
    theta = np.linalg.norm(w)
    wx = skew(w)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * wx + wx @ wx / 6.0
    b = (1.0 - np.cos(theta)) / theta**2
    c = (theta - np.sin(theta)) / theta**3
    return np.eye(3) + b * wx + c * wx @ wx


def integrate_twist(p: Pose, v: Twist, dt: float) -> Pose:
    """Propagate ``p`` by holding the body-frame twist ``v`` constant for ``dt`` seconds."""
    if dt < 0.0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    w = v.angular * dt
    r = rotation_exp(w)
    t = _translation_coupling(w) @ (v.linear * dt)
    return compose(p, Pose(r, t))


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    r = np.asarray(r, dtype=float)
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0.0:
        s = np.sqrt(trace + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s,
                      0.25 * s,
                      (r[0, 1] + r[1, 0]) / s,
                      (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s,
                      (r[0, 1] + r[1, 0]) / s,
                      0.25 * s,
                      (r[1, 2] + r[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s,
                      (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_rotation(q) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to rotation matrix; normalizes the input."""
    q = as_vector(q, 4, "quaternion")
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("quaternion has zero norm")
    w, x, y, z = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def pose_to_dict(p: Pose) -> dict:
    """Serialize as translation + unit quaternion (w, x, y, z)."""
    return {"xyz": list(p.translation), "quat_wxyz": list(rotation_to_quat(p.rotation))}


def pose_from_dict(d: dict) -> Pose:
    """Deserialize; the quaternion is normalized and the rotation re-checked."""
    t = as_vector(d["xyz"], 3, "xyz")
    r = quat_to_rotation(d["quat_wxyz"])
    return Pose(require_rotation(r), t)
