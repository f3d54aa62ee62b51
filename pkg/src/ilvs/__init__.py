"""Eye-in-hand conveyor tracking with a learned feedforward compensation.

Simulates a camera servoing onto a marker riding a conveyor belt, records
ideal tracking demonstrations, fits a Gaussian-mixture regressor to the
compensation twist they imply, and evaluates plain servoing against the
learned tracking controller.
"""

from .camera import (CameraIntrinsics, FeatureVector, Scenario, default_scenario,
                     desired_features, goal_camera_pose, intrinsics_from_fov,
                     load_scenario, marker_corners, observe, project, save_scenario,
                     step_target)
from .control import (goal_interaction_pinv, ilvs_control, interaction_matrix,
                      oracle_controller, pseudoinverse, reshaped_control,
                      target_feature_rate, tracking_control, vanishing_gain,
                      vs_control)
from .demos import (DemoSuite, Demonstration, build_training_set, collect_suite,
                    default_demo_poses, load_suite, record_demonstration, save_suite)
from .episodes import (RunConfig, Trace, compare_gains, read_trace_csv, run_episode,
                       write_trace_csv)
from .errors import (BehindCameraError, ConfigError, IlvsError, ModelFormatError,
                     NumericError, OutOfViewError, SimulationAbort, SingularFitError)
from .gmr import (CompensationModel, GaussianMixtureRegression, TrainingSet,
                  kmeans_init, load_model, save_model, select_n_components,
                  train_compensation_model)
from .metrics import (Metrics, episode_metrics, pixel_error_series, rmse_vs_demo,
                      tracking_phase_metrics)
from .se3 import (Pose, Twist, compose, integrate_twist, inverse, transform_point)

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError", "CameraIntrinsics", "CompensationModel", "ConfigError",
    "DemoSuite", "Demonstration", "FeatureVector", "GaussianMixtureRegression",
    "IlvsError", "Metrics", "ModelFormatError", "NumericError", "OutOfViewError",
    "Pose", "RunConfig", "Scenario", "SimulationAbort", "SingularFitError",
    "Trace", "TrainingSet", "Twist", "build_training_set", "collect_suite",
    "compare_gains", "compose", "default_demo_poses", "default_scenario",
    "desired_features", "episode_metrics", "goal_camera_pose",
    "goal_interaction_pinv", "ilvs_control", "integrate_twist",
    "interaction_matrix", "intrinsics_from_fov", "inverse", "kmeans_init",
    "load_model", "load_scenario", "load_suite", "marker_corners", "observe",
    "oracle_controller", "pixel_error_series", "project", "pseudoinverse",
    "read_trace_csv",
    "record_demonstration", "reshaped_control", "rmse_vs_demo", "run_episode",
    "save_model", "save_scenario", "save_suite", "select_n_components",
    "step_target", "target_feature_rate", "tracking_control",
    "tracking_phase_metrics", "train_compensation_model", "transform_point",
    "vanishing_gain", "vs_control", "write_trace_csv",
]
