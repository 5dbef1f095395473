"""Registration of SPD point clouds for manipulability ellipsoid transfer."""

from .baseline import EvalReport, NnTransferMap, baseline_transfer, build_nn_map, nearest_index, rmse
from .kinematics import (
    JointTrajectory,
    PlanarSweep,
    Scripted,
    SerialManipulator,
    builtin_models,
    forward_kinematics,
    manipulability,
    sample_random_dataset,
    trajectory_dataset,
    translational_jacobian,
)
from .matching import CorrespondenceSet, EllipsoidFeatures, features_of, match, pair_weight
from .registration import (
    FitConfig,
    FitReport,
    RigidSpdTransform,
    apply_rotation,
    apply_transform,
    fit,
    parallel_transport_matrix,
    pt_initialize,
    recenter,
    scale_dispersion,
    translate_to_source,
)
from .rotation import OptimizerReport, RotationConfig, objective, optimize, random_rotation
from .spd import (
    MeanConvergenceError,
    SpdCloud,
    dispersion,
    dist,
    exp_map,
    geodesic,
    geometric_mean,
    inner,
    log_map,
    mat_exp,
    mat_inv_sqrt,
    mat_log,
    mat_pow,
    mat_sqrt,
    project_to_spd,
    random_spd,
    sym_eig,
)

__version__ = "0.1.0"
