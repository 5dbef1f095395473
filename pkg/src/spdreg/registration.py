"""Rigid registration of SPD point clouds and online application of the fit.

The fitted map from the teacher (target) domain to the student (source)
domain is a composition of congruences and one matrix power:

    1. optional parallel-transport congruence E (.) E^T aligning the means,
    2. recentering at the identity by the (post-transport) teacher mean,
    3. matrix power by the dispersion ratio s = c_S / c_T,
    4. rotation congruence R (.) R^T found by iterative match-and-optimize,
    5. translation to the student mean by S̄^{1/2} (.) S̄^{1/2}.

All stages except the power are congruences and therefore isometries of the
affine-invariant metric; the power rescales distances to the identity by
exactly s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import CorrespondenceSet, match, matched_sources
from .rotation import (
    OptimizerReport,
    RotationConfig,
    check_rotation,
    optimize,
    rotation_angle,
)
from .spd import (
    SpdCloud,
    _fn_eig_batch,
    _spd_eig_batch,
    check_spd,
    dispersion,
    geometric_mean,
    mat_inv_sqrt,
    mat_sqrt,
    symmetrize,
)

ICP_ANGLE_TOL = 1e-6
ICP_REL_OBJECTIVE_TOL = 1e-10


def _congruence(points: np.ndarray, a: np.ndarray) -> np.ndarray:
    """a M a^T applied to a stack of matrices."""
    return symmetrize(np.einsum("ij,njk,lk->nil", a, points, a))


def parallel_transport_matrix(student_mean: np.ndarray, teacher_mean: np.ndarray) -> np.ndarray:
    """Principal square root E of S̄ T̄^{-1}, satisfying E T̄ E^T = S̄.

    S̄ T̄^{-1} is similar to the SPD matrix W = S̄^{1/2} T̄^{-1} S̄^{1/2}, so its
    principal root exists and can be built from W's eigendecomposition:
    E = S̄^{1/2} W^{-1/2} S̄^{1/2} T̄^{-1}.
    """
    s_sqrt = mat_sqrt(student_mean)
    t_inv = _fn_eig_batch(np.asarray(teacher_mean, dtype=float)[None], lambda w: 1.0 / w)[0]
    w_mat = symmetrize(s_sqrt @ t_inv @ s_sqrt)
    w, v = np.linalg.eigh(w_mat)
    if w.min() <= 0.0:
        raise ValueError("parallel transport: mean product has non-positive spectrum")
    w_isqrt = (v * (1.0 / np.sqrt(w))[None, :]) @ v.T
    return s_sqrt @ w_isqrt @ s_sqrt @ t_inv


def pt_initialize(targets: SpdCloud, student_mean: np.ndarray, teacher_mean: np.ndarray) -> SpdCloud:
    """Transport every target point by the congruence E (.) E^T."""
    e = parallel_transport_matrix(student_mean, teacher_mean)
    return targets.with_points(_congruence(targets.points, e))


def recenter(cloud: SpdCloud, mean: np.ndarray) -> SpdCloud:
    """Congruence by mean^{-1/2}: moves the cloud mean to the identity."""
    return cloud.with_points(_congruence(cloud.points, mat_inv_sqrt(mean)))


def scale_dispersion(cloud: SpdCloud, exponent: float) -> SpdCloud:
    """Matrix power per point; scales distances to the identity by exponent."""
    if exponent <= 0:
        raise ValueError("dispersion exponent must be positive")
    w, v = _spd_eig_batch(cloud.points)
    pts = symmetrize((v * (w**exponent)[..., None, :]) @ np.swapaxes(v, -1, -2))
    return cloud.with_points(pts)


def apply_rotation(cloud: SpdCloud, r: np.ndarray) -> SpdCloud:
    """Congruence R (.) R^T per point."""
    return cloud.with_points(_congruence(cloud.points, np.asarray(r, dtype=float)))


def translate_to_source(cloud: SpdCloud, student_mean: np.ndarray) -> SpdCloud:
    """Congruence by S̄^{1/2}: moves an identity-centered cloud onto S̄."""
    return cloud.with_points(_congruence(cloud.points, mat_sqrt(student_mean)))


@dataclass(frozen=True)
class RigidSpdTransform:
    """Fitted transform parameters for online transfer of new teacher points.

    teacher_mean is the mean used for recentering: the recomputed mean of
    the transported cloud when used_pt, the plain teacher mean otherwise.
    """

    teacher_mean: np.ndarray
    student_mean: np.ndarray
    scale_exponent: float
    rotation: np.ndarray
    pt_matrix: np.ndarray | None = None
    used_pt: bool = False

    def __post_init__(self):
        check_spd(self.teacher_mean, "teacher_mean")
        check_spd(self.student_mean, "student_mean")
        if self.scale_exponent <= 0:
            raise ValueError("scale_exponent must be positive")
        check_rotation(self.rotation)
        if self.used_pt and self.pt_matrix is None:
            raise ValueError("used_pt requires a pt_matrix")

    @property
    def dim(self) -> int:
        return self.teacher_mean.shape[0]

    def apply(self, cloud: SpdCloud) -> SpdCloud:
        """Transfer a cloud of new teacher points to the student domain."""
        if cloud.dim != self.dim:
            raise ValueError(f"cloud dimension {cloud.dim} does not match transform dimension {self.dim}")
        pts = cloud.points
        if self.used_pt:
            pts = _congruence(pts, self.pt_matrix)
        pts = _congruence(pts, mat_inv_sqrt(self.teacher_mean))
        w, v = _spd_eig_batch(pts)
        pts = symmetrize((v * (w**self.scale_exponent)[..., None, :]) @ np.swapaxes(v, -1, -2))
        pts = _congruence(pts, self.rotation)
        pts = _congruence(pts, mat_sqrt(self.student_mean))
        return SpdCloud(pts, cloud.labels)

    def to_dict(self) -> dict:
        from .io import matrix_to_dict

        return {
            "version": 1,
            "dim": self.dim,
            "teacher_mean": matrix_to_dict(self.teacher_mean),
            "student_mean": matrix_to_dict(self.student_mean),
            "scale_exponent": float(self.scale_exponent),
            "rotation": self.rotation.tolist(),
            "pt_matrix": self.pt_matrix.tolist() if self.used_pt else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RigidSpdTransform":
        from .io import matrix_from_dict

        if doc.get("version") != 1:
            raise ValueError(f"unsupported transform version {doc.get('version')!r}")
        pt = doc.get("pt_matrix")
        return cls(
            teacher_mean=matrix_from_dict(doc["teacher_mean"]),
            student_mean=matrix_from_dict(doc["student_mean"]),
            scale_exponent=float(doc["scale_exponent"]),
            rotation=np.asarray(doc["rotation"], dtype=float),
            pt_matrix=None if pt is None else np.asarray(pt, dtype=float),
            used_pt=pt is not None,
        )


def apply_transform(transform: RigidSpdTransform, cloud: SpdCloud) -> SpdCloud:
    return transform.apply(cloud)


@dataclass(frozen=True)
class FitConfig:
    use_pt: bool = True
    weight_exponent: int = 3
    icp_max_iter: int = 100
    rotation: RotationConfig = field(default_factory=RotationConfig)
    seed: int = 0
    # run_icp=False skips matching/rotation entirely (transport-only variant)
    run_icp: bool = True

    def __post_init__(self):
        if self.icp_max_iter < 1:
            raise ValueError("icp_max_iter must be >= 1")
        if self.weight_exponent < 1:
            raise ValueError("weight_exponent must be >= 1")


@dataclass
class FitReport:
    outer_iterations: int
    converged: bool
    final_objective: float
    objective_history: list[float]
    rotation_angles: list[float]
    scale_exponent: float
    aligned_targets: SpdCloud
    last_correspondences: CorrespondenceSet | None
    optimizer: OptimizerReport | None

    def to_dict(self) -> dict:
        return {
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "final_objective": float(self.final_objective),
            "objective_history": [float(x) for x in self.objective_history],
            "rotation_angles": [float(x) for x in self.rotation_angles],
            "scale_exponent": float(self.scale_exponent),
            "optimizer": self.optimizer.to_dict() if self.optimizer is not None else None,
        }


def fit(sources: SpdCloud, targets: SpdCloud, config: FitConfig | None = None):
    """Fit the rigid manifold transform aligning targets with sources.

    Returns (RigidSpdTransform, FitReport). The report's aligned_targets is
    the training target cloud pushed through the returned transform, i.e.
    exactly what apply() produces on the training data.
    """
    config = config or FitConfig()
    if sources.dim != targets.dim:
        raise ValueError(f"dimension mismatch: sources {sources.dim}, targets {targets.dim}")
    rng = np.random.default_rng(config.seed)

    student_mean = geometric_mean(sources)
    teacher_mean = geometric_mean(targets)

    pt_mat = None
    work = targets
    if config.use_pt:
        pt_mat = parallel_transport_matrix(student_mean, teacher_mean)
        work = targets.with_points(_congruence(targets.points, pt_mat))
        teacher_mean = geometric_mean(work)

    s_rct = recenter(sources, student_mean)
    t_rct = recenter(work, teacher_mean)
    eye = np.eye(sources.dim)
    c_s = dispersion(s_rct, eye)
    c_t = dispersion(t_rct, eye)
    # a zero-dispersion target cloud (all points identical) has no scale information
    scale = c_s / c_t if c_t > 1e-300 else 1.0
    t_cur = scale_dispersion(t_rct, scale) if scale != 1.0 else t_rct

    r_total = np.eye(sources.dim)
    objective_history: list[float] = []
    rotation_angles: list[float] = []
    last_corr = None
    last_opt = None
    converged = not config.run_icp
    outer = 0
    if config.run_icp:
        for outer in range(1, config.icp_max_iter + 1):
            corr = match(t_cur, s_rct, exponent=config.weight_exponent)
            srcs = matched_sources(corr, s_rct)
            report = optimize(srcs, t_cur.points, corr.weights, config.rotation, rng)
            r_step = report.best_rotation
            r_total = r_step @ r_total
            t_cur = apply_rotation(t_cur, r_step)
            angle = rotation_angle(r_step)
            objective_history.append(report.best_objective)
            rotation_angles.append(angle)
            last_corr, last_opt = corr, report
            if angle < ICP_ANGLE_TOL:
                converged = True
                break
            if len(objective_history) >= 2:
                prev, cur = objective_history[-2], objective_history[-1]
                if abs(prev - cur) < ICP_REL_OBJECTIVE_TOL * max(1.0, abs(prev)):
                    converged = True
                    break

    transform = RigidSpdTransform(
        teacher_mean=teacher_mean,
        student_mean=student_mean,
        scale_exponent=scale,
        rotation=r_total,
        pt_matrix=pt_mat,
        used_pt=config.use_pt,
    )
    aligned = transform.apply(targets)
    report = FitReport(
        outer_iterations=outer,
        converged=converged,
        final_objective=objective_history[-1] if objective_history else float("nan"),
        objective_history=objective_history,
        rotation_angles=rotation_angles,
        scale_exponent=scale,
        aligned_targets=aligned,
        last_correspondences=last_corr,
        optimizer=last_opt,
    )
    return transform, report
