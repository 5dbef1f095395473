"""Correspondence matching between ellipsoid clouds via geometric features.

Two ellipsoids match when their minor and major axes align and their
singularity indices and volumes agree. Each target point is paired with the
source point maximizing

    |v_min_t . v_min_s| + |v_max_t . v_max_s| + exp(-|p_t - p_s|) + exp(-|vol_t - vol_s|)

which lies in (0, 4]. Raw weights are raised to a configurable exponent
before being fed to the rotation optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spd import SpdCloud, _points_of, _spd_eig_batch, check_symmetric, symmetrize

DEGENERACY_GAP = 1e-8


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in `dim` dimensions."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


@dataclass(frozen=True)
class EllipsoidFeatures:
    """Geometric descriptors of one SPD ellipsoid.

    v_min / v_max are unit eigenvectors of the extreme eigenvalues, p is the
    singularity index lambda_max / lambda_min (>= 1) and vol the ellipsoid
    volume with semi-axes sqrt(lambda_i). `degenerate` flags a repeated
    extreme eigenvalue, where the extreme eigenvectors are only defined up
    to the eigensolver's deterministic ordering.
    """

    v_min: np.ndarray
    v_max: np.ndarray
    p: float
    vol: float
    degenerate: bool = False


def _cloud_features(points: np.ndarray):
    """Vectorized features for a stack (n, d, d): (v_min, v_max, p, vol, degenerate)."""
    w, v = _spd_eig_batch(symmetrize(points), "feature extraction input")
    dim = points.shape[-1]
    v_min = v[:, :, 0]
    v_max = v[:, :, -1]
    p = w[:, -1] / w[:, 0]
    vol = unit_ball_volume(dim) * np.sqrt(w.prod(axis=1))
    if dim >= 2:
        degenerate = (w[:, 1] - w[:, 0] < DEGENERACY_GAP) | (w[:, -1] - w[:, -2] < DEGENERACY_GAP)
    else:
        degenerate = np.zeros(points.shape[0], dtype=bool)
    return v_min, v_max, p, vol, degenerate


def features_of(m: np.ndarray) -> EllipsoidFeatures:
    """Extract the matching features of a single SPD matrix."""
    m = np.asarray(m, dtype=float)
    check_symmetric(m)
    v_min, v_max, p, vol, degenerate = _cloud_features(m[None])
    return EllipsoidFeatures(
        v_min=v_min[0], v_max=v_max[0], p=float(p[0]), vol=float(vol[0]), degenerate=bool(degenerate[0])
    )


def pair_weight(t: EllipsoidFeatures, s: EllipsoidFeatures) -> float:
    """Raw matching weight between two feature tuples, in (0, 4]."""
    if t.v_min.shape != s.v_min.shape:
        raise ValueError("feature dimension mismatch")
    return float(
        abs(np.dot(t.v_min, s.v_min))
        + abs(np.dot(t.v_max, s.v_max))
        + math.exp(-abs(t.p - s.p))
        + math.exp(-abs(t.vol - s.vol))
    )


def weight_matrix(targets, sources) -> np.ndarray:
    """Raw pair weights for every (target i, source j) combination."""
    tp = _points_of(targets)
    sp = _points_of(sources)
    if tp.shape[-1] != sp.shape[-1]:
        raise ValueError("clouds must share one dimension")
    t_min, t_max, t_p, t_vol, _ = _cloud_features(tp)
    s_min, s_max, s_p, s_vol, _ = _cloud_features(sp)
    w = np.abs(t_min @ s_min.T)
    w += np.abs(t_max @ s_max.T)
    w += np.exp(-np.abs(t_p[:, None] - s_p[None, :]))
    w += np.exp(-np.abs(t_vol[:, None] - s_vol[None, :]))
    return w


@dataclass(frozen=True)
class CorrespondenceSet:
    """Pairs (target_index, source_index) with weights already raised to `exponent`.

    Every target index appears exactly once; source indices may repeat.
    """

    pairs: tuple[tuple[int, int], ...]
    weights: np.ndarray
    exponent: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.pairs) != w.shape[0]:
            raise ValueError("pairs and weights length mismatch")
        t_idx = [p[0] for p in self.pairs]
        if sorted(t_idx) != list(range(len(t_idx))):
            raise ValueError("every target index must appear exactly once")
        if self.exponent < 1:
            raise ValueError("exponent must be a positive integer")
        if not np.all(np.isfinite(w)) or w.min() <= 0 or w.max() > 4.0**self.exponent + 1e-9:
            raise ValueError("weights must be finite and in (0, 4^exponent]")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))

    @property
    def source_indices(self) -> np.ndarray:
        return np.array([j for _, j in self.pairs], dtype=int)

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "pairs": [[i, j] for i, j in self.pairs],
            "weights": [float(x) for x in self.weights],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CorrespondenceSet":
        return cls(
            pairs=tuple((int(i), int(j)) for i, j in doc["pairs"]),
            weights=np.asarray(doc["weights"], dtype=float),
            exponent=int(doc["exponent"]),
        )


def match(targets, sources, exponent: int = 3, one_to_one: bool = False) -> CorrespondenceSet:
    """Pair each target point with its best-weight source point.

    Default matching is per-target argmax (many-to-one allowed, ties broken
    by lowest source index). With one_to_one=True a maximum-weight
    assignment is computed instead; this requires at least as many sources
    as targets.
    """
    w = weight_matrix(targets, sources)
    if one_to_one:
        if w.shape[1] < w.shape[0]:
            raise ValueError("one-to-one matching needs |sources| >= |targets|")
        from scipy.optimize import linear_sum_assignment

        rows, cols = linear_sum_assignment(-w)
        order = np.argsort(rows)
        pairs = tuple((int(rows[k]), int(cols[k])) for k in order)
    else:
        best = np.argmax(w, axis=1)
        pairs = tuple((i, int(best[i])) for i in range(w.shape[0]))
    raw = np.array([w[i, j] for i, j in pairs])
    return CorrespondenceSet(pairs=pairs, weights=raw**exponent, exponent=exponent)


def matched_sources(corr: CorrespondenceSet, sources: SpdCloud) -> np.ndarray:
    """Source points rearranged to align index-wise with the targets."""
    return sources.points[corr.source_indices]
