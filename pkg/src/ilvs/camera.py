"""Pinhole camera, marker target on a conveyor belt, and feature observation.

The world has z up, the marker lies flat on the belt (marker z up), and the
camera's goal pose hovers above the marker looking straight down.  Features
are geometric projections of the four marker corners; there is no rendering
or tag decoding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import se3
from ._validation import as_vector, require_positive
from .errors import BehindCameraError, ConfigError
from .se3 import Pose

# Camera orientation at the goal: x along world x, optical axis down world -z.
GOAL_ROTATION = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cu: float
    cv: float
    width: int
    height: int

    def __post_init__(self):
        require_positive(self.fx, "fx")
        require_positive(self.fy, "fy")
        if not (0.0 < self.cu < self.width and 0.0 < self.cv < self.height):
            raise ValueError("principal point must lie inside the image")


def intrinsics_from_fov(width: int, height: int, hfov: float, vfov: float) -> CameraIntrinsics:
    """Intrinsics from image size (px) and horizontal/vertical field of view (rad)."""
    if not (0.0 < hfov < math.pi and 0.0 < vfov < math.pi):
        raise ValueError(f"fields of view must lie in (0, pi), got {hfov}, {vfov}")
    return CameraIntrinsics(
        fx=(width / 2.0) / math.tan(hfov / 2.0),
        fy=(height / 2.0) / math.tan(vfov / 2.0),
        cu=width / 2.0,
        cv=height / 2.0,
        width=width,
        height=height,
    )


def marker_corners(side: float) -> np.ndarray:
    """The 4 marker-frame corner points (m), counter-clockwise from (-s/2, -s/2)."""
    s = require_positive(side, "marker side") / 2.0
    return np.array([
        [-s, -s, 0.0],
        [s, -s, 0.0],
        [s, s, 0.0],
        [-s, s, 0.0],
    ])


def project(intr: CameraIntrinsics, p_cam) -> tuple[np.ndarray, np.ndarray]:
    """Project a camera-frame point: returns normalized (x, y) and pixel (u, v)."""
    p = as_vector(p_cam, 3, "camera-frame point")
    if p[2] <= 0.0:
        raise BehindCameraError(f"point has non-positive depth {p[2]:.6g} m")
    xy = p[:2] / p[2]
    uv = np.array([intr.cu + intr.fx * xy[0], intr.cv + intr.fy * xy[1]])
    return xy, uv


@dataclass(frozen=True)
class FeatureVector:
    """Observed marker corners.

    ``xy`` holds the 8 normalized image coordinates (x0, y0, ..., x3, y3) in
    the fixed corner order; ``depths`` the 4 camera-frame depths (m), carried
    so controllers that need the true interaction matrix never re-query the
    world; ``pixels`` the corresponding pixel coordinates.  ``out_of_view``
    flags any corner outside the image bounds (a flag, not a failure).
    """

    xy: np.ndarray
    depths: np.ndarray
    pixels: np.ndarray
    out_of_view: bool

    def __post_init__(self):
        object.__setattr__(self, "xy", as_vector(self.xy, 8, "xy"))
        object.__setattr__(self, "depths", as_vector(self.depths, 4, "depths"))
        object.__setattr__(self, "pixels", as_vector(self.pixels, 8, "pixels"))


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one simulated setup.

    The belt accelerates linearly from rest to ``belt_speed`` over
    ``belt_ramp_time`` seconds and then holds it.  ``camera_pose0`` of None
    means "start at the goal pose above ``target_pose0``".
    """

    intrinsics: CameraIntrinsics
    marker_side: float = 0.04
    belt_speed: float = 0.1
    belt_ramp_time: float = 0.5
    belt_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    target_pose0: Pose = field(default_factory=Pose.identity)
    camera_pose0: Pose | None = None
    desired_depth: float = 0.09116
    dt: float = 0.01
    duration: float = 10.0
    pixel_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        require_positive(self.marker_side, "marker_side")
        require_positive(self.desired_depth, "desired_depth")
        require_positive(self.dt, "dt")
        if self.belt_speed < 0.0:
            raise ValueError("belt_speed must be non-negative")
        d = as_vector(self.belt_direction, 3, "belt_direction")
        n = np.linalg.norm(d)
        if n == 0.0:
            raise ValueError("belt_direction must be non-zero")
        object.__setattr__(self, "belt_direction", d / n)

    def initial_camera_pose(self) -> Pose:
        if self.camera_pose0 is not None:
            return self.camera_pose0
        return goal_camera_pose(self.target_pose0, self.desired_depth)


def default_scenario(**overrides) -> Scenario:
    """The baseline setup: 1920x1080 at 69x42 deg FOV, 0.1 m/s belt, 0.09116 m depth."""
    intr = intrinsics_from_fov(1920, 1080, math.radians(69.0), math.radians(42.0))
    return replace(Scenario(intrinsics=intr), **overrides) if overrides else Scenario(intrinsics=intr)


def goal_camera_pose(target_pose: Pose, depth: float) -> Pose:
    """Camera pose centered over the marker at ``depth``, looking straight down."""
    offset = Pose(GOAL_ROTATION, np.array([0.0, 0.0, require_positive(depth, "depth")]))
    return se3.compose(target_pose, offset)


def observe(camera: Pose, target: Pose, scenario: Scenario) -> FeatureVector:
    """Project the marker corners into the camera.

    Raises BehindCameraError when any corner has non-positive depth; corners
    outside the image only set ``out_of_view``.
    """
    corners = marker_corners(scenario.marker_side)
    cam_inv = se3.inverse(camera)
    intr = scenario.intrinsics
    xy = np.empty(8)
    uv = np.empty(8)
    depths = np.empty(4)
    for i, corner in enumerate(corners):
        p_cam = se3.transform_point(cam_inv, se3.transform_point(target, corner))
        pt_xy, pt_uv = project(intr, p_cam)
        xy[2 * i : 2 * i + 2] = pt_xy
        uv[2 * i : 2 * i + 2] = pt_uv
        depths[i] = p_cam[2]
    oov = bool(
        np.any(uv[0::2] < 0.0) or np.any(uv[0::2] > intr.width)
        or np.any(uv[1::2] < 0.0) or np.any(uv[1::2] > intr.height)
    )
    return FeatureVector(xy=xy, depths=depths, pixels=uv, out_of_view=oov)


def desired_features(scenario: Scenario) -> FeatureVector:
    """Features seen from the goal pose; all four depths equal ``desired_depth``."""
    cam = goal_camera_pose(scenario.target_pose0, scenario.desired_depth)
    return observe(cam, scenario.target_pose0, scenario)


def add_pixel_noise(features: FeatureVector, intr: CameraIntrinsics, sigma: float,
                    rng: np.random.Generator) -> FeatureVector:
    """Gaussian pixel noise; normalized coordinates are recomputed from the
    noisy pixels so u = cu + fx*x holds exactly for every emitted sample."""
    if sigma <= 0.0:
        return features
    noisy = features.pixels + rng.normal(0.0, sigma, size=8)
    xy = np.empty(8)
    xy[0::2] = (noisy[0::2] - intr.cu) / intr.fx
    xy[1::2] = (noisy[1::2] - intr.cv) / intr.fy
    # re-derive pixels from the stored normalized values so the
    # u = cu + fx*x relation holds bit-exactly on the emitted sample
    uv = np.empty(8)
    uv[0::2] = intr.cu + intr.fx * xy[0::2]
    uv[1::2] = intr.cv + intr.fy * xy[1::2]
    oov = bool(
        np.any(uv[0::2] < 0.0) or np.any(uv[0::2] > intr.width)
        or np.any(uv[1::2] < 0.0) or np.any(uv[1::2] > intr.height)
    )
    return FeatureVector(xy=xy, depths=features.depths, pixels=uv, out_of_view=oov)


def belt_profile(scenario: Scenario, t: float) -> tuple[float, float]:
    """Belt speed (m/s) and traveled distance (m) at time ``t``."""
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    ramp = scenario.belt_ramp_time
    v = scenario.belt_speed
    if ramp <= 0.0 or t >= ramp:
        distance = v * (t - ramp / 2.0) if ramp > 0.0 else v * t
        return v, distance
    return v * t / ramp, v * t * t / (2.0 * ramp)


def step_target(scenario: Scenario, t: float) -> tuple[Pose, se3.Twist]:
    """Target pose and world-frame twist at time ``t`` (no rotation)."""
    speed, distance = belt_profile(scenario, t)
    pose = scenario.target_pose0.translated(distance * scenario.belt_direction)
    twist = se3.Twist(speed * scenario.belt_direction, np.zeros(3))
    return pose, twist


def displace_target(pose: Pose, offset) -> Pose:
    """Shift the target by ``offset`` (world frame, m) at the current instant."""
    return pose.translated(offset)


# Scenario JSON keys, fixed file-format contract.
_SCENARIO_KEYS = (
    "width_px", "height_px", "hfov_deg", "vfov_deg", "marker_side_m",
    "belt_speed_mps", "belt_ramp_s", "belt_dir", "target_pose0",
    "camera_pose0", "desired_depth_m", "dt_s", "duration_s",
    "pixel_noise_sigma", "seed",
)


def scenario_to_dict(s: Scenario) -> dict:
    hfov = 2.0 * math.atan((s.intrinsics.width / 2.0) / s.intrinsics.fx)
    vfov = 2.0 * math.atan((s.intrinsics.height / 2.0) / s.intrinsics.fy)
    return {
        "width_px": s.intrinsics.width,
        "height_px": s.intrinsics.height,
        "hfov_deg": math.degrees(hfov),
        "vfov_deg": math.degrees(vfov),
        "marker_side_m": s.marker_side,
        "belt_speed_mps": s.belt_speed,
        "belt_ramp_s": s.belt_ramp_time,
        "belt_dir": list(s.belt_direction),
        "target_pose0": se3.pose_to_dict(s.target_pose0),
        "camera_pose0": None if s.camera_pose0 is None else se3.pose_to_dict(s.camera_pose0),
        "desired_depth_m": s.desired_depth,
        "dt_s": s.dt,
        "duration_s": s.duration,
        "pixel_noise_sigma": s.pixel_noise_sigma,
        "seed": s.seed,
    }


def scenario_from_dict(d: dict) -> Scenario:
    unknown = set(d) - set(_SCENARIO_KEYS)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    base = scenario_to_dict(default_scenario())
    base.update(d)
    try:
        intr = intrinsics_from_fov(
            int(base["width_px"]), int(base["height_px"]),
            math.radians(float(base["hfov_deg"])), math.radians(float(base["vfov_deg"])),
        )
        return Scenario(
            intrinsics=intr,
            marker_side=float(base["marker_side_m"]),
            belt_speed=float(base["belt_speed_mps"]),
            belt_ramp_time=float(base["belt_ramp_s"]),
            belt_direction=np.asarray(base["belt_dir"], dtype=float),
            target_pose0=se3.pose_from_dict(base["target_pose0"]),
            camera_pose0=None if base["camera_pose0"] is None
            else se3.pose_from_dict(base["camera_pose0"]),
            desired_depth=float(base["desired_depth_m"]),
            dt=float(base["dt_s"]),
            duration=float(base["duration_s"]),
            pixel_noise_sigma=float(base["pixel_noise_sigma"]),
            seed=int(base["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    try:
        with open(path) as f:
            return scenario_from_dict(json.load(f))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(s), f, indent=2, sort_keys=True)
        f.write("\n")


def scenario_hash(s: Scenario) -> str:
    """Stable fingerprint of a scenario's canonical JSON form."""
    canon = json.dumps(scenario_to_dict(s), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()
