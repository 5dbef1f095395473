"""Multi-start Riemannian gradient descent over SO(D).

Minimizes the weighted sum of squared affine-invariant distances

    f(R) = sum_i w_i d^2(S_i, R T_i R^T)

by steepest descent with Armijo backtracking. The ambient gradient is
projected to the tangent space at R (skew-symmetric part of R^T G) and the
iterate is retracted with the matrix exponential, which keeps every iterate
exactly orthogonal.

Writing K_i = T_i^{-1/2} R^T S_i R T_i^{-1/2} (similar to S_i^{-1/2} X_i
S_i^{-1/2} up to inversion, with X_i = R T_i R^T):

    f(R)      = sum_i w_i sum_k log^2 eig_k(K_i)
    grad f(R) = -4 R sum_i w_i T_i^{-1/2} log(K_i) T_i^{1/2}

so one batched eigendecomposition per evaluation serves N pairs at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm

from .spd import _points_of, _rebuild, _spd_eig_batch, symmetrize

ARMIJO_FACTOR = 0.5
ARMIJO_DECREASE = 1e-4
REL_DECREASE_TOL = 1e-10


@dataclass(frozen=True)
class RotationConfig:
    restarts: int = 8
    max_iter: int = 100
    grad_tol: float = 1e-7
    step_init: float = 1.0
    # objective small enough to skip remaining restarts (exact fit found)
    early_stop_objective: float = 1e-12


@dataclass
class OptimizerReport:
    best_rotation: np.ndarray
    objective_history: list[float]
    restarts: int
    converged: bool
    iterations: int

    @property
    def best_objective(self) -> float:
        return self.objective_history[-1]

    def to_dict(self) -> dict:
        return {
            "objective_history": [float(x) for x in self.objective_history],
            "best_objective": float(self.best_objective),
            "restarts": self.restarts,
            "converged": self.converged,
            "iterations": self.iterations,
            "rotation": self.best_rotation.tolist(),
        }


def check_rotation(r: np.ndarray, tol: float = 1e-10) -> None:
    r = np.asarray(r, dtype=float)
    if np.linalg.norm(r.T @ r - np.eye(r.shape[0])) > tol:
        raise ValueError("matrix is not orthogonal")
    if np.linalg.det(r) < 0:
        raise ValueError("matrix has negative determinant")


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    from .spd import random_orthogonal

    return random_orthogonal(rng, dim)


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation (Frobenius norm of its log over sqrt 2)."""
    r = np.asarray(r, dtype=float)
    d = r.shape[0]
    if d == 2:
        return float(abs(np.arctan2(r[1, 0], r[0, 0])))
    if d == 3:
        c = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
        return float(np.arccos(c))
    return float(np.linalg.norm(np.real(logm(r))) / np.sqrt(2.0))


class _PairedObjective:
    """Precomputed quantities for one (sources, targets, weights) problem."""

    def __init__(self, sources, targets, weights):
        s = _points_of(sources)
        t = _points_of(targets)
        w = np.asarray(weights, dtype=float)
        if s.shape != t.shape:
            raise ValueError(f"paired clouds must have equal shapes, got {s.shape} vs {t.shape}")
        if w.shape != (s.shape[0],):
            raise ValueError("one weight per pair required")
        self.s = s
        self.w = w
        self.dim = s.shape[-1]
        tw, tv = _spd_eig_batch(t, "targets")
        stw = np.sqrt(tw)
        self.t_sqrt = _rebuild(stw, tv)
        self.t_isqrt = _rebuild(1.0 / stw, tv)

    def _core(self, r: np.ndarray) -> np.ndarray:
        b = np.einsum("ji,njk,kl->nil", r, self.s, r)
        return symmetrize(self.t_isqrt @ b @ self.t_isqrt)

    def value(self, r: np.ndarray) -> float:
        lam = np.linalg.eigvalsh(self._core(r))
        return float(self.w @ (np.log(lam) ** 2).sum(axis=1))

    def euclidean_grad(self, r: np.ndarray) -> np.ndarray:
        lam, vec = np.linalg.eigh(self._core(r))
        log_k = _rebuild(np.log(lam), vec)
        per_pair = self.t_isqrt @ log_k @ self.t_sqrt
        return -4.0 * r @ np.einsum("n,nij->ij", self.w, per_pair)


def objective(r: np.ndarray, sources, targets, weights) -> float:
    """Weighted sum of squared distances sum_i w_i d^2(S_i, R T_i R^T)."""
    return _PairedObjective(sources, targets, weights).value(np.asarray(r, dtype=float))


def euclidean_gradient(r: np.ndarray, sources, targets, weights) -> np.ndarray:
    """Gradient of the objective with respect to the ambient entries of R."""
    return _PairedObjective(sources, targets, weights).euclidean_grad(np.asarray(r, dtype=float))


def tangent_projection(r: np.ndarray, ambient_grad: np.ndarray) -> np.ndarray:
    """Skew-symmetric part of R^T G: the Riemannian gradient coordinates at R."""
    x = r.T @ ambient_grad
    return 0.5 * (x - x.T)


def riemannian_step(r: np.ndarray, ambient_grad: np.ndarray, step: float) -> np.ndarray:
    """Descend along the projected gradient and retract back onto SO(D)."""
    xi = tangent_projection(r, ambient_grad)
    return r @ expm(-step * xi)


def _descend(problem: _PairedObjective, r0: np.ndarray, config: RotationConfig):
    r = r0
    f = problem.value(r)
    history = [f]
    converged = False
    step = config.step_init
    for _ in range(config.max_iter):
        xi = tangent_projection(r, problem.euclidean_grad(r))
        grad_sq = float((xi * xi).sum())
        if np.sqrt(grad_sq) < config.grad_tol:
            converged = True
            break
        alpha = step
        f_try = None
        while alpha > 1e-14:
            r_try = r @ expm(-alpha * xi)
            f_try = problem.value(r_try)
            if f_try <= f - ARMIJO_DECREASE * alpha * grad_sq:
                break
            alpha *= ARMIJO_FACTOR
        else:
            # no decrease possible at any step: numerically stationary
            converged = True
            break
        rel_drop = (f - f_try) / max(abs(f), 1e-300)
        r, f = r_try, f_try
        history.append(f)
        step = min(alpha * 2.0, 1e3)
        if rel_drop < REL_DECREASE_TOL or f < config.early_stop_objective:
            converged = True
            break
    return r, f, history, converged


def optimize(sources, targets, weights, config: RotationConfig | None = None,
             rng: np.random.Generator | None = None) -> OptimizerReport:
    """Multi-start descent; returns the lowest-objective restart.

    The first start is the identity; the remaining config.restarts - 1 are
    uniform random rotations from rng (seeded rng gives a deterministic
    result; ties favor the earlier restart).
    """
    config = config or RotationConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    problem = _PairedObjective(sources, targets, weights)
    dim = problem.dim

    best = None
    for k in range(max(1, config.restarts)):
        r0 = np.eye(dim) if k == 0 else random_rotation(rng, dim)
        r, f, history, converged = _descend(problem, r0, config)
        if not np.isfinite(f):
            continue
        if best is None or f < best[0]:
            best = (f, r, history, converged)
        if best[0] < config.early_stop_objective:
            break
    if best is None:
        raise RuntimeError("rotation optimization produced no finite objective")
    f, r, history, converged = best
    return OptimizerReport(
        best_rotation=r,
        objective_history=history,
        restarts=max(1, config.restarts),
        converged=converged,
        iterations=len(history) - 1,
    )
