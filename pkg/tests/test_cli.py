import json

import numpy as np
import pytest

from ilvs import camera, cli, demos, se3
from ilvs.se3 import Pose


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One full CLI pipeline: demo -> train -> run -> eval."""
    root = tmp_path_factory.mktemp("cli")
    suite_dir = root / "suite"
    model_path = root / "model.json"
    run_dir = root / "run"
    metrics_path = root / "metrics.json"
    assert cli.main(["demo", "--out", str(suite_dir)]) == 0
    assert cli.main(["train", "--suite", str(suite_dir), "--k", "11",
                     "--out", str(model_path), "--seed", "0"]) == 0
    assert cli.main(["run", "--controller", "ilvs", "--lambda", "2",
                     "--model", str(model_path), "--out", str(run_dir),
                     "--plots"]) == 0
    assert cli.main(["eval", "--trace", str(run_dir / "trace.csv"),
                     "--demo", str(suite_dir / "demo_00.csv"),
                     "--out", str(metrics_path)]) == 0
    return root


class TestPipeline:
    def test_artifacts_exist(self, workspace):
        assert (workspace / "suite" / "suite.json").exists()
        assert (workspace / "suite" / "demo_02.csv").exists()
        assert (workspace / "model.json").exists()
        assert (workspace / "run" / "trace.csv").exists()
        assert (workspace / "run" / "metrics.json").exists()
        assert (workspace / "run" / "feature_trajectories.svg").exists()
        assert (workspace / "run" / "error_vs_time.svg").exists()

    def test_run_metrics_content(self, workspace):
        doc = json.loads((workspace / "run" / "metrics.json").read_text())
        assert doc["steady_state_mean_err_px"] is not None
        assert doc["tracking_position_mm"][0] < 2.0

    def test_eval_metrics_content(self, workspace):
        doc = json.loads((workspace / "metrics.json").read_text())
        assert doc["rmse_features_px"][0] >= 0.0
        assert doc["rmse_velocity_mms"][0] >= 0.0

    def test_compare_subcommand(self, workspace):
        out = workspace / "cmp"
        assert cli.main(["compare", "--model", str(workspace / "model.json"),
                         "--gains", "2,5", "--out", str(out)]) == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert [row["run"] for row in doc] == ["vs_gain_2", "vs_gain_5", "ilvs"]
        assert (out / "trace_ilvs.csv").exists()

    def test_reshaped_controller(self, workspace, scenario, desired):
        out = workspace / "reshaped"
        assert cli.main(["run", "--controller", "reshaped", "--lambda", "2",
                         "--model", str(workspace / "model.json"),
                         "--t-cut", "2.0", "--tau", "0.5",
                         "--out", str(out)]) == 0
        from ilvs.episodes import read_trace_csv
        from ilvs.metrics import pixel_error_series
        trace = read_trace_csv(out / "trace.csv")
        err = pixel_error_series(trace, desired.pixels)
        # after the corrective term fades the plain-law lag returns
        assert err[-1] > 100.0
        assert np.max(np.abs(trace.compensation[-1])) < 1e-3

    def test_run_with_perturbation(self, workspace, desired):
        out = workspace / "perturbed"
        assert cli.main(["run", "--controller", "ilvs", "--lambda", "2",
                         "--model", str(workspace / "model.json"),
                         "--perturb", "4.0,0.05,0,0",
                         "--out", str(out)]) == 0
        from ilvs.episodes import read_trace_csv
        from ilvs.metrics import pixel_error_series
        err = pixel_error_series(read_trace_csv(out / "trace.csv"), desired.pixels)
        assert err[400] > 100.0 and err[-1] < 5.0

    def test_pose_override(self, workspace, scenario, tmp_path):
        pose = demos.default_demo_poses(scenario)[0]
        pose_path = tmp_path / "pose.json"
        pose_path.write_text(json.dumps(se3.pose_to_dict(pose)))
        out = workspace / "posed"
        assert cli.main(["run", "--controller", "oracle", "--lambda", "2",
                         "--pose", str(pose_path), "--out", str(out)]) == 0
        from ilvs.episodes import read_trace_csv
        trace = read_trace_csv(out / "trace.csv")
        np.testing.assert_allclose(trace.camera_xyz[0], pose.translation)


class TestExitCodes:
    def test_missing_model_for_ilvs(self, tmp_path):
        assert cli.main(["run", "--controller", "ilvs", "--lambda", "2",
                         "--out", str(tmp_path / "x")]) == 2

    def test_bad_scenario_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["demo", "--scenario", str(bad),
                         "--out", str(tmp_path / "out")]) == 2

    def test_bad_perturb_spec(self, tmp_path, workspace):
        assert cli.main(["run", "--controller", "vs", "--lambda", "2",
                         "--perturb", "oops", "--out", str(tmp_path / "x")]) == 2

    def test_behind_camera_abort(self, tmp_path):
        # camera above the marker but facing the sky: immediate geometric abort
        scenario = camera.default_scenario()
        upward = Pose(np.eye(3), [0.0, 0.0, 0.2])
        from dataclasses import replace
        doc = camera.scenario_to_dict(replace(scenario, camera_pose0=upward))
        path = tmp_path / "s.json"
        path.write_text(json.dumps(doc))
        out = tmp_path / "out"
        assert cli.main(["run", "--scenario", str(path), "--controller", "vs",
                         "--lambda", "2", "--out", str(out)]) == 3
        # partial trace still written
        assert (out / "trace.csv").exists()

    def test_nonpositive_gain(self, tmp_path):
        assert cli.main(["run", "--controller", "vs", "--lambda", "0",
                         "--out", str(tmp_path / "x")]) == 2

    def test_malformed_model(self, tmp_path):
        bad = tmp_path / "model.json"
        bad.write_text("{}")
        assert cli.main(["run", "--controller", "ilvs", "--lambda", "2",
                         "--model", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_demo_out_of_view_pose(self, tmp_path, scenario):
        pose = camera.goal_camera_pose(scenario.target_pose0, scenario.desired_depth)
        pose = pose.translated([0.5, 0.0, 0.0])
        poses_path = tmp_path / "poses.json"
        poses_path.write_text(json.dumps([se3.pose_to_dict(pose)]))
        assert cli.main(["demo", "--poses", str(poses_path),
                         "--out", str(tmp_path / "out")]) == 3

    def test_degenerate_training_data(self, tmp_path, scenario):
        # static belt + goal start: every demonstration sample is identical,
        # so mixture fitting must fail with the numeric exit code
        from dataclasses import replace
        doc = camera.scenario_to_dict(replace(scenario, belt_speed=0.0, duration=2.0))
        s_path = tmp_path / "static.json"
        s_path.write_text(json.dumps(doc))
        goal = camera.goal_camera_pose(scenario.target_pose0, scenario.desired_depth)
        poses_path = tmp_path / "poses.json"
        poses_path.write_text(json.dumps([se3.pose_to_dict(goal)]))
        suite_dir = tmp_path / "suite"
        assert cli.main(["demo", "--scenario", str(s_path),
                         "--poses", str(poses_path), "--out", str(suite_dir)]) == 0
        assert cli.main(["train", "--suite", str(suite_dir), "--k", "2",
                         "--out", str(tmp_path / "model.json")]) == 4


class TestDeterminism:
    def test_repeat_run_is_byte_identical(self, workspace, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert cli.main(["run", "--controller", "ilvs", "--lambda", "2",
                             "--model", str(workspace / "model.json"),
                             "--seed", "5", "--out", str(out)]) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
        assert (out1 / "metrics.json").read_bytes() == (out2 / "metrics.json").read_bytes()
