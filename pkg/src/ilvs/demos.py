"""Recording oracle demonstrations and turning them into a training set.

The oracle is the feedforward tracking controller fed the true target
velocity from the simulator, so demonstrations converge exactly onto the
moving marker.  Each demonstration logs the visual error and the commanded
camera twist at every control step.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import Scenario, default_scenario, goal_camera_pose, scenario_hash
from .control import goal_interaction_pinv
from .episodes import RunConfig, Trace, read_trace_csv, run_episode, write_trace_csv
from .errors import ConfigError, OutOfViewError
from .gmr import TrainingSet
from .se3 import Pose

# Default demonstration starts: the goal pose displaced by these world-frame
# offsets (m), goal orientation.  Configurable per suite.  The y offsets are
# bounded by the narrow vertical field of view: the marker must stay visible
# from the very first frame of a demonstration.
DEFAULT_DEMO_OFFSETS = (
    (-0.05, -0.02, 0.04),
    (0.04, -0.022, 0.05),
    (0.0, 0.025, 0.06),
)

DEFAULT_GAIN = 2.0


@dataclass(frozen=True)
class Demonstration:
    """One oracle episode: samples at a constant step, error and twist aligned."""

    dt: float
    t: np.ndarray
    errors: np.ndarray      # (N, 8)
    twists: np.ndarray      # (N, 6)
    pixels: np.ndarray      # (N, 8)
    camera_xyz: np.ndarray  # (N, 3)
    camera_quat: np.ndarray  # (N, 4) w, x, y, z

    def __post_init__(self):
        steps = np.diff(self.t)
        if len(steps) and (np.any(steps <= 0.0)
                           or np.max(np.abs(steps - self.dt)) > 1e-9):
            raise ValueError("timestamps must increase by a constant dt")

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class DemoSuite:
    """A set of demonstrations sharing one scenario, gain, and error map."""

    demonstrations: tuple
    scenario: Scenario
    control_gain: float
    error_map: np.ndarray  # (6, 8) frozen pseudoinverse

    def __len__(self) -> int:
        return len(self.demonstrations)


def default_demo_poses(scenario: Scenario) -> list[Pose]:
    """The three standard demonstration start poses for a scenario."""
    goal = goal_camera_pose(scenario.target_pose0, scenario.desired_depth)
    return [goal.translated(off) for off in DEFAULT_DEMO_OFFSETS]


def record_demonstration(scenario: Scenario, gain: float, lpinv,
                         initial_pose: Pose | None = None) -> Demonstration:
    """Run the oracle for the scenario duration and log every control step.

    Aborts with OutOfViewError if the marker leaves the image: a
    demonstration must keep the target visible throughout.
    """
    trace = run_episode(RunConfig(
        scenario=scenario, controller="oracle", gain=float(gain),
        initial_camera_pose=initial_pose, abort_on_out_of_view=True))
    if trace.aborted is not None:
        raise OutOfViewError(
            f"oracle demonstration aborted ({trace.aborted}) at "
            f"t={trace.t[-1] + trace.dt if len(trace) else 0.0:.3f} s; "
            f"adjust the initial pose or scenario")
    return Demonstration(
        dt=trace.dt, t=trace.t, errors=trace.errors, twists=trace.twists,
        pixels=trace.pixels, camera_xyz=trace.camera_xyz,
        camera_quat=trace.camera_quat)


def collect_suite(scenario: Scenario, initial_poses=None,
                  gain: float = DEFAULT_GAIN) -> DemoSuite:
    """Record one demonstration per initial camera pose.

    All demonstrations share the gain and the frozen pseudoinverse; any
    single failure aborts the suite.
    """
    poses = list(initial_poses) if initial_poses is not None else default_demo_poses(scenario)
    if not poses:
        raise ConfigError("need at least one initial pose")
    for i, a in enumerate(poses):
        for b in poses[i + 1:]:
            if (np.allclose(a.translation, b.translation)
                    and np.allclose(a.rotation, b.rotation)):
                warnings.warn("duplicate demonstration poses produce duplicate "
                              "demonstrations", stacklevel=2)
    lpinv = goal_interaction_pinv(scenario)
    demos = tuple(record_demonstration(scenario, gain, lpinv, pose) for pose in poses)
    return DemoSuite(demonstrations=demos, scenario=scenario,
                     control_gain=float(gain), error_map=lpinv)


def build_training_set(suite: DemoSuite) -> TrainingSet:
    """Map every sample to its (input, target) pair.

    For each logged (e, v): input = Lp @ e and target = v + gain * Lp @ e,
    flattened across demonstrations with provenance indices.
    """
    lpinv = suite.error_map
    gain = suite.control_gain
    inputs, targets, demo_idx, sample_idx = [], [], [], []
    for d, demo in enumerate(suite.demonstrations):
        eps = demo.errors @ lpinv.T
        inputs.append(eps)
        targets.append(demo.twists + gain * eps)
        demo_idx.append(np.full(len(demo), d, dtype=int))
        sample_idx.append(np.arange(len(demo), dtype=int))
    return TrainingSet(
        inputs=np.vstack(inputs), targets=np.vstack(targets),
        demo_index=np.concatenate(demo_idx), sample_index=np.concatenate(sample_idx),
        control_gain=gain, error_map=lpinv)


# -- suite files ---------------------------------------------------------

MANIFEST_NAME = "suite.json"


def _demo_to_trace(demo: Demonstration) -> Trace:
    return Trace(
        dt=demo.dt, t=demo.t, errors=demo.errors, twists=demo.twists,
        pixels=demo.pixels, camera_xyz=demo.camera_xyz, camera_quat=demo.camera_quat,
        compensation=None, out_of_view=np.zeros(len(demo), dtype=bool),
        position_error=np.full(len(demo), np.nan), aborted=None,
        final_camera_pose=Pose.identity(), final_target_offset=np.zeros(3))


def write_demo_csv(demo: Demonstration, path) -> None:
    write_trace_csv(_demo_to_trace(demo), path)


def read_demo_csv(path) -> Demonstration:
    trace = read_trace_csv(path)
    if trace.compensation is not None:
        raise ConfigError(f"{path} has compensation columns; not a demonstration file")
    return Demonstration(
        dt=trace.dt, t=trace.t, errors=trace.errors, twists=trace.twists,
        pixels=trace.pixels, camera_xyz=trace.camera_xyz, camera_quat=trace.camera_quat)


def save_suite(suite: DemoSuite, outdir) -> Path:
    """Write demo CSVs plus a manifest with the shared training context."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = []
    for i, demo in enumerate(suite.demonstrations):
        name = f"demo_{i:02d}.csv"
        write_demo_csv(demo, outdir / name)
        names.append(name)
    manifest = {
        "demos": names,
        "lambda": suite.control_gain,
        "lhat_pinv": suite.error_map.tolist(),
        "scenario_hash": scenario_hash(suite.scenario),
    }
    path = outdir / MANIFEST_NAME
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_suite(suite_dir, scenario: Scenario | None = None) -> DemoSuite:
    """Read a recorded suite; checks the scenario hash when one is supplied."""
    suite_dir = Path(suite_dir)
    try:
        with open(suite_dir / MANIFEST_NAME) as f:
            manifest = json.load(f)
        demos = tuple(read_demo_csv(suite_dir / name) for name in manifest["demos"])
        gain = float(manifest["lambda"])
        lpinv = np.asarray(manifest["lhat_pinv"], dtype=float)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot load suite from {suite_dir}: {exc}") from exc
    if lpinv.shape != (6, 8):
        raise ConfigError("suite manifest lhat_pinv must be 6x8")
    if scenario is not None and scenario_hash(scenario) != manifest.get("scenario_hash"):
        warnings.warn("suite was recorded under a different scenario", stacklevel=2)
    return DemoSuite(demonstrations=demos,
                     scenario=scenario if scenario is not None else default_scenario(),
                     control_gain=gain, error_map=lpinv)
