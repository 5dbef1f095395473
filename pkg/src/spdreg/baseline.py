"""Nearest-neighbor transfer baseline and the dispersion-normalized RMSE.

The baseline samples a few thousand manipulabilities per domain, pairs each
teacher sample with its nearest student sample under the affine-invariant
distance, and transfers a new teacher point by looking up the pairing of its
nearest teacher sample.

Searches are exact. The accelerated path prunes candidates with the sorted
log-spectrum lower bound: the affine-invariant distance dominates the
log-Euclidean distance, which in turn dominates the Euclidean distance
between sorted log-eigenvalue vectors, so any candidate whose bound exceeds
the best exact distance found so far can be discarded without changing the
result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import SerialManipulator, sample_random_dataset
from .spd import SpdCloud, dispersion, dist_batch, geometric_mean, mat_inv_sqrt, paired_dist, symmetrize

_SCAN_CHUNK = 128


def log_spectra(points: np.ndarray) -> np.ndarray:
    """Sorted log-eigenvalue vectors, one row per point."""
    return np.log(np.linalg.eigvalsh(points))


def _nearest_brute(query: np.ndarray, candidates: np.ndarray) -> tuple[int, float]:
    d = dist_batch(query, candidates)
    idx = int(np.argmin(d))
    return idx, float(d[idx])


def _nearest_pruned(query: np.ndarray, candidates: np.ndarray, spectra: np.ndarray) -> tuple[int, float]:
    q_spec = log_spectra(query[None])[0]
    bounds = np.linalg.norm(spectra - q_spec[None, :], axis=1)
    order = np.argsort(bounds, kind="stable")
    isq = mat_inv_sqrt(query)
    best_idx, best_d = -1, np.inf
    for start in range(0, order.shape[0], _SCAN_CHUNK):
        chunk = order[start : start + _SCAN_CHUNK]
        if bounds[chunk[0]] > best_d:
            break
        w = np.linalg.eigvalsh(symmetrize(isq @ candidates[chunk] @ isq))
        d = np.sqrt((np.log(w) ** 2).sum(axis=-1))
        for k in range(chunk.shape[0]):
            idx = int(chunk[k])
            if d[k] < best_d or (d[k] == best_d and idx < best_idx):
                best_idx, best_d = idx, float(d[k])
    return best_idx, best_d


def nearest_index(
    query: np.ndarray,
    candidates: np.ndarray,
    spectra: np.ndarray | None = None,
    accelerate: bool = True,
) -> int:
    """Index of the candidate nearest to query (ties go to the lowest index)."""
    if accelerate:
        if spectra is None:
            spectra = log_spectra(candidates)
        return _nearest_pruned(query, candidates, spectra)[0]
    return _nearest_brute(query, candidates)[0]


@dataclass(frozen=True)
class NnTransferMap:
    """Precomputed teacher-to-student nearest-neighbor mapping.

    pair_index[i] is the student sample nearest to teacher sample i;
    teacher_log_spectra holds the pruning keys for same-domain queries.
    """

    teacher_samples: SpdCloud
    student_samples: SpdCloud
    pair_index: np.ndarray
    teacher_log_spectra: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.pair_index, dtype=int)
        if idx.shape != (len(self.teacher_samples),):
            raise ValueError("pair_index length must match the teacher samples")
        if idx.min() < 0 or idx.max() >= len(self.student_samples):
            raise ValueError("pair_index contains invalid student indices")
        idx.setflags(write=False)
        object.__setattr__(self, "pair_index", idx)
        object.__setattr__(self, "teacher_log_spectra", np.asarray(self.teacher_log_spectra, dtype=float))

    def to_dict(self) -> dict:
        from .io import cloud_to_dict

        return {
            "teacher_samples": cloud_to_dict(self.teacher_samples),
            "student_samples": cloud_to_dict(self.student_samples),
            "pair_index": self.pair_index.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NnTransferMap":
        from .io import cloud_from_dict

        teacher = cloud_from_dict(doc["teacher_samples"])
        student = cloud_from_dict(doc["student_samples"])
        return cls(
            teacher_samples=teacher,
            student_samples=student,
            pair_index=np.asarray(doc["pair_index"], dtype=int),
            teacher_log_spectra=log_spectra(teacher.points),
        )


def build_nn_map(
    teacher: SerialManipulator,
    student: SerialManipulator,
    n: int,
    seed: int = 0,
    floor: float = 1e-4,
    accelerate: bool = True,
) -> NnTransferMap:
    """Sample n manipulabilities per domain and pair each teacher sample
    with its nearest student sample."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seq = np.random.SeedSequence(seed)
    t_rng, s_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    teacher_cloud = sample_random_dataset(teacher, n, t_rng, floor=floor)
    student_cloud = sample_random_dataset(student, n, s_rng, floor=floor)
    student_spectra = log_spectra(student_cloud.points)
    pair_index = np.empty(n, dtype=int)
    for i in range(n):
        if accelerate:
            pair_index[i] = _nearest_pruned(teacher_cloud.points[i], student_cloud.points, student_spectra)[0]
        else:
            pair_index[i] = _nearest_brute(teacher_cloud.points[i], student_cloud.points)[0]
    return NnTransferMap(
        teacher_samples=teacher_cloud,
        student_samples=student_cloud,
        pair_index=pair_index,
        teacher_log_spectra=log_spectra(teacher_cloud.points),
    )


def baseline_transfer(nn_map: NnTransferMap, new_points: SpdCloud, accelerate: bool = True) -> SpdCloud:
    """Map each new teacher point through its nearest teacher sample's pairing."""
    if new_points.dim != nn_map.teacher_samples.dim:
        raise ValueError("dimension mismatch between query points and the map")
    out = np.empty_like(new_points.points)
    for i, point in enumerate(new_points.points):
        if accelerate:
            j = _nearest_pruned(point, nn_map.teacher_samples.points, nn_map.teacher_log_spectra)[0]
        else:
            j = _nearest_brute(point, nn_map.teacher_samples.points)[0]
        out[i] = nn_map.student_samples.points[nn_map.pair_index[j]]
    return SpdCloud(out, new_points.labels)


@dataclass(frozen=True)
class EvalReport:
    """Dispersion-normalized RMSE between paired clouds.

    rmse = raw_rmse / dispersion_after, where raw_rmse is the root mean
    squared affine-invariant distance and dispersion_after the dispersion of
    the predicted cloud about its own geometric mean. The reference-cloud
    normalization is kept alongside as metadata.
    """

    rmse: float
    dispersion_after: float
    per_point_distances: np.ndarray
    iterations: int | None = None
    raw_rmse: float = 0.0
    reference_dispersion: float = float("nan")
    rmse_reference_normalized: float = float("nan")

    def __post_init__(self):
        if abs(self.rmse * self.dispersion_after - self.raw_rmse) > 1e-12 * max(1.0, self.raw_rmse):
            raise ValueError("inconsistent report: rmse * dispersion_after != raw_rmse")
        object.__setattr__(self, "per_point_distances", np.asarray(self.per_point_distances, dtype=float))

    def to_dict(self) -> dict:
        return {
            "rmse": float(self.rmse),
            "raw_rmse": float(self.raw_rmse),
            "dispersion_after": float(self.dispersion_after),
            "reference_dispersion": float(self.reference_dispersion),
            "rmse_reference_normalized": float(self.rmse_reference_normalized),
            "per_point_distances": [float(x) for x in self.per_point_distances],
            "iterations": self.iterations,
        }


def rmse(predicted: SpdCloud, reference: SpdCloud, iterations: int | None = None) -> EvalReport:
    """Evaluate a predicted cloud against an index-paired reference cloud."""
    if len(predicted) != len(reference):
        raise ValueError(f"paired clouds required: {len(predicted)} vs {len(reference)} points")
    if predicted.dim != reference.dim:
        raise ValueError("dimension mismatch between predicted and reference clouds")
    d = paired_dist(reference.points, predicted.points)
    raw = float(np.sqrt((d**2).mean()))
    c = dispersion(predicted, geometric_mean(predicted))
    if len(predicted) < 2 or c <= 0.0:
        raise ValueError("degenerate normalization: predicted cloud has zero dispersion")
    ref_c = dispersion(reference, geometric_mean(reference))
    return EvalReport(
        rmse=raw / c,
        dispersion_after=c,
        per_point_distances=d,
        iterations=iterations,
        raw_rmse=raw,
        reference_dispersion=ref_c,
        rmse_reference_normalized=raw / ref_c if ref_c > 0 else float("nan"),
    )
