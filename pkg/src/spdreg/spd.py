"""Core operations on the manifold of symmetric positive-definite matrices.

All matrix functions go through the symmetric eigendecomposition, which is
exact for symmetric inputs and keeps a single code path for log, exp, sqrt
and fractional powers. The metric is the affine-invariant one: congruence
M -> A M A^T by any invertible A is an isometry.

Scalar operations act on (d, d) arrays; helpers with a ``_batch`` suffix act
on (n, d, d) stacks and are used by the registration pipeline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class MeanConvergenceError(RuntimeError):
    """Karcher mean iteration did not reach tolerance within max_iter.

    Carries the last iterate and the residual norm so callers can inspect
    or resume.
    """

    def __init__(self, message: str, last_iterate: np.ndarray, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Exactly symmetric part (m + m^T) / 2, batched over leading axes."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def check_symmetric(m: np.ndarray, tol: float = 1e-9, name: str = "matrix") -> None:
    """Raise ValueError if m deviates from symmetry beyond tol (relative)."""
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    err = float(np.abs(m - np.swapaxes(m, -1, -2)).max())
    if err > tol * scale:
        raise ValueError(f"{name} is not symmetric: asymmetry {err:.3e} exceeds {tol:.0e} * {scale:.3e}")


def check_spd(m: np.ndarray, name: str = "matrix") -> None:
    """Raise ValueError unless m is symmetric with strictly positive spectrum."""
    check_symmetric(m, name=name)
    w = np.linalg.eigvalsh(symmetrize(np.asarray(m, dtype=float)))
    if w.min() <= 0.0:
        raise ValueError(f"{name} is not positive definite: min eigenvalue {w.min():.3e}")


def sym_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, orthonormal eigenvectors as columns)
    such that V diag(w) V^T reconstructs the input.
    """
    m = np.asarray(m, dtype=float)
    check_symmetric(m)
    return np.linalg.eigh(symmetrize(m))


def _fn_eig_batch(m: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to the spectrum of a stack of symmetric matrices."""
    w, v = np.linalg.eigh(m)
    return symmetrize((v * fn(w)[..., None, :]) @ np.swapaxes(v, -1, -2))


def _spd_eig_batch(m: np.ndarray, name: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(m)
    if w.min() <= 0.0:
        raise ValueError(f"{name} is not positive definite: min eigenvalue {w.min():.3e}")
    return w, v


def _rebuild(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return symmetrize((v * w[..., None, :]) @ np.swapaxes(v, -1, -2))


def mat_log(m: np.ndarray) -> np.ndarray:
    """Matrix logarithm of an SPD matrix (symmetric result)."""
    m = symmetrize(np.asarray(m, dtype=float))
    check_symmetric(m)
    w, v = _spd_eig_batch(m, "mat_log input")
    return _rebuild(np.log(w), v)


def mat_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix (SPD result)."""
    m = np.asarray(m, dtype=float)
    check_symmetric(m)
    return _fn_eig_batch(symmetrize(m), np.exp)


def mat_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of an SPD matrix."""
    m = symmetrize(np.asarray(m, dtype=float))
    check_symmetric(m)
    w, v = _spd_eig_batch(m, "mat_sqrt input")
    return _rebuild(np.sqrt(w), v)


def mat_inv_sqrt(m: np.ndarray) -> np.ndarray:
    """Inverse principal square root of an SPD matrix."""
    m = symmetrize(np.asarray(m, dtype=float))
    check_symmetric(m)
    w, v = _spd_eig_batch(m, "mat_inv_sqrt input")
    return _rebuild(1.0 / np.sqrt(w), v)


def mat_pow(m: np.ndarray, s: float) -> np.ndarray:
    """Fractional power M^s of an SPD matrix (eigenvalue mapping w -> w^s)."""
    m = symmetrize(np.asarray(m, dtype=float))
    check_symmetric(m)
    w, v = _spd_eig_batch(m, "mat_pow input")
    return _rebuild(w**s, v)


def _sqrt_pair(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(M^{1/2}, M^{-1/2}) from one eigendecomposition."""
    w, v = _spd_eig_batch(symmetrize(np.asarray(m, dtype=float)))
    sw = np.sqrt(w)
    return _rebuild(sw, v), _rebuild(1.0 / sw, v)


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def dist(a: np.ndarray, b: np.ndarray) -> float:
    """Affine-invariant Riemannian distance between SPD matrices.

    ||log(a^{-1/2} b a^{-1/2})||_F, i.e. sqrt(sum_i log^2 lambda_i) over the
    eigenvalues of a^{-1/2} b a^{-1/2}.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    isq = mat_inv_sqrt(a)
    w = np.linalg.eigvalsh(symmetrize(isq @ b @ isq))
    if w.min() <= 0.0:
        raise ValueError("dist: second argument is not positive definite")
    return float(np.sqrt((np.log(w) ** 2).sum()))


def dist_batch(a: np.ndarray, bs: np.ndarray) -> np.ndarray:
    """Distances from one SPD matrix a to a stack bs of shape (n, d, d)."""
    isq = mat_inv_sqrt(a)
    w = np.linalg.eigvalsh(symmetrize(isq @ bs @ isq))
    return np.sqrt((np.log(w) ** 2).sum(axis=-1))


def paired_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise distances between two aligned stacks of SPD matrices."""
    wa, va = _spd_eig_batch(a)
    isq = _rebuild(1.0 / np.sqrt(wa), va)
    w = np.linalg.eigvalsh(symmetrize(isq @ b @ isq))
    return np.sqrt((np.log(w) ** 2).sum(axis=-1))


def inner(l1: np.ndarray, l2: np.ndarray, base: np.ndarray) -> float:
    """Riemannian inner product of two tangent vectors at a base point.

    <base^{-1/2} l1 base^{-1/2}, base^{-1/2} l2 base^{-1/2}>_F.
    """
    l1 = np.asarray(l1, dtype=float)
    l2 = np.asarray(l2, dtype=float)
    _check_same_dim(l1, l2)
    _check_same_dim(l1, np.asarray(base))
    isq = mat_inv_sqrt(base)
    x = isq @ l1 @ isq
    y = isq @ l2 @ isq
    return float((x * y).sum())


def log_map(m: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Project an SPD point m to the tangent space at base.

    base^{1/2} log(base^{-1/2} m base^{-1/2}) base^{1/2}; the norm of the
    result under ``inner`` at base equals dist(base, m).
    """
    m = np.asarray(m, dtype=float)
    _check_same_dim(m, np.asarray(base))
    sq, isq = _sqrt_pair(base)
    return symmetrize(sq @ mat_log(isq @ m @ isq) @ sq)


def exp_map(l: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Map a symmetric tangent vector at base back to the manifold."""
    l = np.asarray(l, dtype=float)
    check_symmetric(l, name="tangent vector")
    _check_same_dim(l, np.asarray(base))
    sq, isq = _sqrt_pair(base)
    return symmetrize(sq @ mat_exp(isq @ l @ isq) @ sq)


def geodesic(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Point at parameter t on the geodesic from a (t=0) to b (t=1).

    a^{1/2} (a^{-1/2} b a^{-1/2})^t a^{1/2}. Values of t outside [0, 1]
    extrapolate and emit a warning.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    if t < 0.0 or t > 1.0:
        warnings.warn(f"geodesic parameter t={t} outside [0, 1]: extrapolating", stacklevel=2)
    sq, isq = _sqrt_pair(a)
    return symmetrize(sq @ mat_pow(isq @ b @ isq, t) @ sq)


def _points_of(cloud) -> np.ndarray:
    if isinstance(cloud, SpdCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim != 3:
        raise ValueError(f"expected a point stack of shape (n, d, d), got {pts.shape}")
    return pts


def geometric_mean(cloud, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Karcher (geometric) mean of a set of SPD matrices.

    Closed form for one or two points; otherwise the fixed-point iteration
    X <- exp_X(mean_i log_X(M_i)) starting from the log-Euclidean mean,
    stopped when the Riemannian norm of the mean tangent drops below tol.

    Raises MeanConvergenceError (carrying the last iterate and residual)
    when max_iter is exhausted.
    """
    pts = _points_of(cloud)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("geometric mean of an empty set")
    if n == 1:
        return pts[0].copy()
    if n == 2:
        return geodesic(pts[0], pts[1], 0.5)

    logs = _fn_eig_batch(pts, np.log)
    x = _fn_eig_batch(logs.mean(axis=0)[None], np.exp)[0]
    residual = np.inf
    for _ in range(max_iter):
        w, v = _spd_eig_batch(x[None], "mean iterate")
        sw = np.sqrt(w[0])
        sq = _rebuild(sw, v[0])
        isq = _rebuild(1.0 / sw, v[0])
        h = _fn_eig_batch(symmetrize(isq @ pts @ isq), np.log).mean(axis=0)
        residual = float(np.linalg.norm(h))
        if residual < tol:
            return symmetrize(x)
        x = symmetrize(sq @ _fn_eig_batch(h[None], np.exp)[0] @ sq)
    raise MeanConvergenceError(
        f"geometric mean did not converge in {max_iter} iterations (residual {residual:.3e})",
        last_iterate=x,
        residual=residual,
    )


def dispersion(cloud, center: np.ndarray) -> float:
    """Mean (unsquared) Riemannian distance of the points to a center."""
    pts = _points_of(cloud)
    if pts.shape[0] == 0:
        raise ValueError("dispersion of an empty cloud")
    _check_same_dim(pts, np.asarray(center))
    return float(dist_batch(center, pts).mean())


def project_to_spd(m: np.ndarray, floor: float = 1e-4) -> np.ndarray:
    """Clamp eigenvalues of a symmetric matrix to at least floor.

    Matrices that are already positive definite with all eigenvalues above
    the floor pass through unchanged (up to exact symmetrization).
    """
    m = np.asarray(m, dtype=float)
    check_symmetric(m)
    w, v = np.linalg.eigh(symmetrize(m))
    return _rebuild(np.maximum(w, floor), v)


def random_spd(rng: np.random.Generator, dim: int, log_scale: float = 1.0) -> np.ndarray:
    """Random SPD matrix: random rotation of eigenvalues exp(U(-log_scale, log_scale))."""
    q = random_orthogonal(rng, dim)
    w = np.exp(rng.uniform(-log_scale, log_scale, size=dim))
    return _rebuild(w, q)


def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-ish random rotation via QR of a Gaussian matrix, det fixed to +1."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, -1] = -q[:, -1]
    return q


@dataclass(frozen=True)
class SpdCloud:
    """Ordered set of SPD matrices sharing one dimension.

    Points are stored as an (n, d, d) float array, exactly symmetrized on
    construction; labels, when given, carry one string per point.
    """

    points: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[1] != pts.shape[2]:
            raise ValueError(f"points must have shape (n, d, d), got {pts.shape}")
        if pts.shape[0] == 0:
            raise ValueError("cloud must be non-empty")
        check_symmetric(pts, name="cloud points")
        pts = symmetrize(pts)
        if np.linalg.eigvalsh(pts).min() <= 0.0:
            raise ValueError("cloud contains a non positive definite point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != pts.shape[0]:
                raise ValueError(f"{len(labels)} labels for {pts.shape[0]} points")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.points[i]

    def __iter__(self):
        return iter(self.points)

    def with_points(self, points: np.ndarray) -> "SpdCloud":
        """New cloud with replaced points and the same labels."""
        return SpdCloud(points, self.labels)

    def subset(self, indices) -> "SpdCloud":
        idx = np.asarray(indices, dtype=int)
        labels = tuple(self.labels[i] for i in idx) if self.labels is not None else None
        return SpdCloud(self.points[idx], labels)
