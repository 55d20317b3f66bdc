"""Good-feature subset selection for least-squares camera pose estimation."""
from .estimator import (DegenerateGeometryError, GaussNewtonConfig, NoiseModel, PoseError,
                        covariance_from_map, covariance_from_map_weighted,
                        covariance_from_measurement, expected_bias_from_map,
                        gauss_newton_pose, pose_error)
from .geometry import (BehindCameraError, CameraIntrinsics, DegenerateFeatureError,
                       JacobianBlockSet, Pose, combined_block, jacobian_blocks,
                       point_jacobian, pose_jacobian, project, se3_exp, se3_log)
from .selector import (MetricKind, SelectionResult, brute_force_select, greedy_select,
                       metric_value, random_select, stochastic_greedy_logdet)
from .simulator import SimConfig, generate_scene, run_sweep, run_trial

__all__ = [
    "BehindCameraError", "CameraIntrinsics", "DegenerateFeatureError",
    "DegenerateGeometryError", "GaussNewtonConfig", "JacobianBlockSet", "MetricKind",
    "NoiseModel", "Pose", "PoseError", "SelectionResult", "SimConfig",
    "brute_force_select", "combined_block", "covariance_from_map",
    "covariance_from_map_weighted", "covariance_from_measurement",
    "expected_bias_from_map", "gauss_newton_pose", "generate_scene", "greedy_select",
    "jacobian_blocks", "metric_value", "point_jacobian", "pose_error", "pose_jacobian",
    "project", "random_select", "run_sweep", "run_trial", "se3_exp", "se3_log",
    "stochastic_greedy_logdet",
]
__version__ = "0.1.0"
