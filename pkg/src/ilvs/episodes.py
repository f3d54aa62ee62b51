"""Closed-loop episode runner and the trace file format.

One episode loops observe -> error -> controller -> integrate camera twist ->
step target at a fixed period.  Runs are deterministic for a given
configuration and seed; identical configurations produce byte-identical
trace files.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import se3
from .camera import (Scenario, add_pixel_noise, desired_features, displace_target,
                     goal_camera_pose, observe, step_target)
from .control import (goal_interaction_pinv, oracle_controller, vanishing_gain,
                      vs_control)
from .errors import BehindCameraError, ConfigError
from .gmr import CompensationModel
from .metrics import pixel_error_series
from .se3 import Pose, Twist

CONTROLLERS = ("vs", "oracle", "ilvs", "reshaped")

# Trace/demonstration CSV columns, fixed file-format contract.  Traces from
# learning controllers append comp_vx..comp_wz for the compensation twist.
CSV_COLUMNS = (
    ["t"]
    + [f"e{i}" for i in range(8)]
    + ["vx", "vy", "vz", "wx", "wy", "wz"]
    + ["u0", "v0", "u1", "v1", "u2", "v2", "u3", "v3"]
    + ["px", "py", "pz", "qw", "qx", "qy", "qz"]
)
COMP_COLUMNS = ["comp_vx", "comp_vy", "comp_vz", "comp_wx", "comp_wy", "comp_wz"]


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to run one episode."""

    scenario: Scenario
    controller: str = "vs"
    gain: float = 2.0
    model: CompensationModel | None = None
    initial_camera_pose: Pose | None = None
    perturbations: tuple = ()  # ((time_s, (dx, dy, dz)), ...)
    t_cut: float = 5.0
    tau: float = 1.0
    seed: int | None = None  # None: use the scenario seed
    abort_on_out_of_view: bool = False
    t_start: float = 0.0
    initial_target_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if not self.gain > 0.0:
            raise ConfigError(f"gain must be positive, got {self.gain}")
        if self.controller in ("ilvs", "reshaped") and self.model is None:
            raise ConfigError(f"{self.controller} controller requires a model")


@dataclass
class Trace:
    """Per-step log of one episode.

    Array fields are aligned on the same timestamps.  ``compensation`` is
    None for controllers without a learned term.  ``position_error`` is the
    distance (m) from the camera to its ideal tracking pose over the current
    target, computed in-loop where the true target state is known.
    ``aborted`` names the reason the episode stopped early, or None.
    """

    dt: float
    t: np.ndarray
    errors: np.ndarray        # (N, 8) normalized feature error
    twists: np.ndarray        # (N, 6) commanded camera twist
    pixels: np.ndarray        # (N, 8) observed corner pixels
    camera_xyz: np.ndarray    # (N, 3)
    camera_quat: np.ndarray   # (N, 4) w, x, y, z
    compensation: np.ndarray | None
    out_of_view: np.ndarray   # (N,) bool
    position_error: np.ndarray  # (N,) m
    aborted: str | None
    final_camera_pose: Pose
    final_target_offset: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def run_episode(config: RunConfig) -> Trace:
    """Simulate one episode; returns a partial trace when aborted.

    Out-of-view corners are recorded per step and do not stop the run unless
    ``abort_on_out_of_view`` is set (features remain geometrically defined
    while the marker stays in front of the camera); only behind-camera
    geometry always aborts.
    """
    scenario = config.scenario
    n_steps = int(round(scenario.duration / scenario.dt))
    dt = scenario.dt
    desired = desired_features(scenario)
    lpinv = goal_interaction_pinv(scenario)
    model = config.model
    if model is not None:
        for note in model.mismatches(config.gain, lpinv):
            warnings.warn(f"model/run mismatch: {note}", stacklevel=2)

    camera = config.initial_camera_pose or scenario.initial_camera_pose()
    offset = np.array(config.initial_target_offset, dtype=float)
    events = sorted(
        ((float(t), np.asarray(d, dtype=float)) for t, d in config.perturbations),
        key=lambda e: e[0])
    next_event = 0
    seed = scenario.seed if config.seed is None else config.seed
    rng = np.random.default_rng(seed)
    noise = scenario.pixel_noise_sigma

    learned = config.controller in ("ilvs", "reshaped")
    t_arr = np.empty(n_steps)
    errors = np.empty((n_steps, 8))
    twists = np.empty((n_steps, 6))
    pixels = np.empty((n_steps, 8))
    cam_xyz = np.empty((n_steps, 3))
    cam_quat = np.empty((n_steps, 4))
    comp = np.empty((n_steps, 6)) if learned else None
    oov = np.zeros(n_steps, dtype=bool)
    pos_err = np.empty(n_steps)
    aborted = None

    n = 0
    for n in range(n_steps):
        t = config.t_start + n * dt
        while next_event < len(events) and events[next_event][0] <= t + 1e-12:
            offset = offset + events[next_event][1]
            next_event += 1
        target, target_twist_w = step_target(scenario, t)
        target = displace_target(target, offset)
        try:
            feats = observe(camera, target, scenario)
        except BehindCameraError:
            aborted = "behind_camera"
            break
        if noise > 0.0:
            feats = add_pixel_noise(feats, scenario.intrinsics, noise, rng)
        if config.abort_on_out_of_view and feats.out_of_view:
            aborted = "out_of_view"
            break

        e = feats.xy - desired.xy
        if config.controller == "vs":
            v = vs_control(e, config.gain, lpinv)
        elif config.controller == "oracle":
            v = oracle_controller(e, feats, camera.rotation, target_twist_w,
                                  config.gain, lpinv)
        else:
            eps = lpinv @ e
            correction = model.predict_compensation(eps)
            if config.controller == "reshaped":
                correction = vanishing_gain(t, config.t_cut, config.tau) * correction
            v = Twist.from_array(-config.gain * eps + correction)
            comp[n] = correction

        t_arr[n] = t
        errors[n] = e
        twists[n] = v.as_array()
        pixels[n] = feats.pixels
        cam_xyz[n] = camera.translation
        cam_quat[n] = se3.rotation_to_quat(camera.rotation)
        oov[n] = feats.out_of_view
        ideal = goal_camera_pose(target, scenario.desired_depth)
        pos_err[n] = np.linalg.norm(camera.translation - ideal.translation)

        camera = se3.integrate_twist(camera, v, dt)
    else:
        n = n_steps

    return Trace(
        dt=dt,
        t=t_arr[:n], errors=errors[:n], twists=twists[:n], pixels=pixels[:n],
        camera_xyz=cam_xyz[:n], camera_quat=cam_quat[:n],
        compensation=comp[:n] if comp is not None else None,
        out_of_view=oov[:n], position_error=pos_err[:n],
        aborted=aborted,
        final_camera_pose=camera, final_target_offset=offset,
    )


def compare_gains(scenario: Scenario, gains, model: CompensationModel,
                  steady_window: float = 0.2):
    """Run the plain controller at each gain plus the learning controller.

    Returns (summaries, traces): one summary dict per run with the
    steady-state pixel-error statistics over the trailing ``steady_window``
    fraction of the episode, ordered by ascending gain with the learning
    run last.
    """
    desired_px = desired_features(scenario).pixels
    summaries = []
    traces = {}
    runs = [(f"vs_gain_{g:g}", "vs", float(g)) for g in sorted(gains)]
    runs.append(("ilvs", "ilvs", model.control_gain))
    for label, controller, gain in runs:
        trace = run_episode(RunConfig(
            scenario=scenario, controller=controller, gain=gain,
            model=model if controller == "ilvs" else None))
        err = pixel_error_series(trace, desired_px)
        tail = err[int(round(len(err) * (1.0 - steady_window))):]
        summaries.append({
            "run": label,
            "controller": controller,
            "gain": gain,
            "steady_state_mean_err_px": float(tail.mean()) if len(tail) else None,
            "steady_state_std_err_px": float(tail.std()) if len(tail) else None,
            "out_of_view_fraction": float(trace.out_of_view.mean()) if len(trace) else None,
            "aborted": trace.aborted,
        })
        traces[label] = trace
    return summaries, traces


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(trace: Trace, path) -> None:
    """Write the fixed-format trace CSV (bitwise round-trip via repr floats)."""
    header = CSV_COLUMNS + (COMP_COLUMNS if trace.compensation is not None else [])
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(len(trace)):
            row = (
                [trace.t[i]]
                + list(trace.errors[i]) + list(trace.twists[i])
                + list(trace.pixels[i]) + list(trace.camera_xyz[i])
                + list(trace.camera_quat[i])
            )
            if trace.compensation is not None:
                row += list(trace.compensation[i])
            writer.writerow(_fmt(v) for v in row)


def read_trace_csv(path) -> Trace:
    """Read a trace CSV back into memory.

    Fields that are not serialized (out-of-view flags, position error,
    resume state) come back empty/identity.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} is empty") from None
        has_comp = header == CSV_COLUMNS + COMP_COLUMNS
        if not has_comp and header != CSV_COLUMNS:
            raise ConfigError(f"{path} does not have the expected trace columns")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    n = len(rows)
    dt = float(data[1, 0] - data[0, 0]) if n >= 2 else 0.0
    final_pose = (
        Pose(se3.quat_to_rotation(data[-1, 26:30]), data[-1, 23:26])
        if n else Pose.identity()
    )
    return Trace(
        dt=dt,
        t=data[:, 0],
        errors=data[:, 1:9],
        twists=data[:, 9:15],
        pixels=data[:, 15:23],
        camera_xyz=data[:, 23:26],
        camera_quat=data[:, 26:30],
        compensation=data[:, 30:36] if has_comp else None,
        out_of_view=np.zeros(n, dtype=bool),
        position_error=np.full(n, np.nan),
        aborted=None,
        final_camera_pose=final_pose,
        final_target_offset=np.zeros(3),
    )


def resume_config(config: RunConfig, trace: Trace, remaining: float) -> RunConfig:
    """Configuration continuing an episode from where ``trace`` stopped."""
    t_last = float(trace.t[-1]) if len(trace) else config.t_start - trace.dt
    return replace(
        config,
        scenario=replace(config.scenario, duration=remaining),
        initial_camera_pose=trace.final_camera_pose,
        t_start=t_last + trace.dt,
        initial_target_offset=trace.final_target_offset,
        perturbations=tuple((t, d) for t, d in config.perturbations if t > t_last + 1e-12),
    )
