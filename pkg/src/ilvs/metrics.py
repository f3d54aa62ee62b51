"""Episode metrics: replay RMSE, steady-state and tracking-phase statistics.

The scalar pixel error of a step is the mean over the four corners of the
Euclidean pixel distance to the corresponding desired corner.  The tracking
phase of an episode starts when that scalar first drops below the threshold
(5 px by default).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .camera import Scenario, desired_features, goal_camera_pose, step_target

DEFAULT_THRESHOLD_PX = 5.0


@dataclass
class Metrics:
    """Summary statistics of one episode; fields are None when inapplicable.

    The rmse_* pairs are (mean, std) across the 8 pixel coordinates, the 3
    position axes, or the 3 linear-velocity axes of per-coordinate RMSEs
    against a reference demonstration.  The steady_state/tracking fields
    describe the phase after the pixel error first crosses the threshold.
    """

    rmse_features_px: tuple | None = None
    rmse_position_mm: tuple | None = None
    rmse_velocity_mms: tuple | None = None
    steady_state_mean_err_px: float | None = None
    steady_state_std_err_px: float | None = None
    convergence_time_to_5px_s: float | None = None
    tracking_position_mm: tuple | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def pixel_error_series(trace, desired_px) -> np.ndarray:
    """Mean corner pixel distance to the desired corners, per step."""
    if len(trace.pixels) == 0:
        return np.empty(0)
    diff = (trace.pixels - np.asarray(desired_px)).reshape(-1, 4, 2)
    return np.linalg.norm(diff, axis=2).mean(axis=1)


def _coordinate_rmse(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((a - b) ** 2, axis=0))


def replay_rmse_components(trace, demo) -> dict:
    """Per-coordinate replay RMSEs against a reference demonstration.

    Both logs must share dt; they are truncated to the common length.
    Returns arrays keyed 'features_px' (8 pixel coordinates), 'position_mm'
    (3 axes), and 'velocity_mms' (3 linear axes).
    """
    if abs(trace.dt - demo.dt) > 1e-12:
        raise ValueError(f"dt mismatch: trace {trace.dt} vs demonstration {demo.dt}")
    n = min(len(trace.t), len(demo.t))
    return {
        "features_px": _coordinate_rmse(trace.pixels[:n], demo.pixels[:n]),
        "position_mm": _coordinate_rmse(trace.camera_xyz[:n], demo.camera_xyz[:n]) * 1000.0,
        "velocity_mms": _coordinate_rmse(trace.twists[:n, :3], demo.twists[:n, :3]) * 1000.0,
    }


def rmse_vs_demo(trace, demo) -> Metrics:
    """Replay accuracy summary: (mean, std) of each per-coordinate RMSE set."""
    parts = replay_rmse_components(trace, demo)
    feat, pos, vel = parts["features_px"], parts["position_mm"], parts["velocity_mms"]
    return Metrics(
        rmse_features_px=(float(feat.mean()), float(feat.std())),
        rmse_position_mm=(float(pos.mean()), float(pos.std())),
        rmse_velocity_mms=(float(vel.mean()), float(vel.std())),
    )


def tracking_phase_metrics(trace, desired_px, threshold_px: float = DEFAULT_THRESHOLD_PX,
                           scenario: Scenario | None = None) -> Metrics:
    """Statistics over the phase after the error first drops below threshold.

    Returns an explicit no-phase result (all None) when the trace never
    crosses the threshold.  Camera-position statistics use the in-loop
    distances to the ideal tracking pose when the trace has them, otherwise
    they are reconstructed from ``scenario`` (valid only for unperturbed
    runs) or omitted.
    """
    err = pixel_error_series(trace, desired_px)
    below = err < threshold_px
    if not below.any():
        return Metrics()
    start = int(np.argmax(below))
    phase = err[start:]
    pos_err = trace.position_error[start:]
    if np.any(np.isnan(pos_err)) and scenario is not None:
        pos_err = np.array([
            np.linalg.norm(
                trace.camera_xyz[i]
                - goal_camera_pose(step_target(scenario, trace.t[i])[0],
                                   scenario.desired_depth).translation)
            for i in range(start, len(trace.t))
        ])
    has_pos = len(pos_err) and not np.any(np.isnan(pos_err))
    return Metrics(
        steady_state_mean_err_px=float(phase.mean()),
        steady_state_std_err_px=float(phase.std()),
        convergence_time_to_5px_s=float(trace.t[start] - trace.t[0]),
        tracking_position_mm=(
            (float(pos_err.mean() * 1000.0), float(pos_err.std() * 1000.0))
            if has_pos else None),
    )


def episode_metrics(trace, scenario: Scenario, demo=None,
                    threshold_px: float = DEFAULT_THRESHOLD_PX) -> Metrics:
    """Combined metrics for one run: tracking phase plus optional replay RMSE."""
    desired_px = desired_features(scenario).pixels
    m = tracking_phase_metrics(trace, desired_px, threshold_px, scenario=scenario)
    if demo is not None:
        r = rmse_vs_demo(trace, demo)
        m.rmse_features_px = r.rmse_features_px
        m.rmse_position_mm = r.rmse_position_mm
        m.rmse_velocity_mms = r.rmse_velocity_mms
    return m


def write_metrics_json(metrics: Metrics, path) -> None:
    with open(path, "w") as f:
        json.dump(metrics.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
