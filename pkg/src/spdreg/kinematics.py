"""Serial-manipulator kinematics and manipulability dataset generation.

Chains follow the standard (distal) Denavit-Hartenberg convention,
T_i = Rz(theta_i) Tz(d_i) Tx(a_i) Rx(alpha_i) with theta_i = q_i + offset_i,
prefixed by a rigid base pose. Only the translational part of the geometric
Jacobian is used, so every manipulability matrix is 3x3; planar arms embed
in 3D with their out-of-plane eigenvalue clamped to the configured floor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .spd import SpdCloud, project_to_spd

DEFAULT_EIGENVALUE_FLOOR = 1e-4


@dataclass(frozen=True)
class SerialManipulator:
    """DH-parameterized revolute chain with joint limits and a base pose.

    dh rows are (a, d, alpha, theta_offset); limits rows are (min, max) in
    radians, one per joint.
    """

    name: str
    dh: np.ndarray
    limits: np.ndarray
    base_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    base_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        dh = np.asarray(self.dh, dtype=float).reshape(-1, 4)
        limits = np.asarray(self.limits, dtype=float).reshape(-1, 2)
        if dh.shape[0] != limits.shape[0]:
            raise ValueError("one limits row per DH row required")
        if np.any(limits[:, 0] >= limits[:, 1]):
            raise ValueError("joint limits must satisfy min < max")
        object.__setattr__(self, "dh", dh)
        object.__setattr__(self, "limits", limits)
        object.__setattr__(self, "base_rotation", np.asarray(self.base_rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "base_translation", np.asarray(self.base_translation, dtype=float).reshape(3))

    @property
    def n_joints(self) -> int:
        return self.dh.shape[0]

    def mid_pose(self) -> np.ndarray:
        """Joint vector at the middle of every limit range."""
        return self.limits.mean(axis=1)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dh": self.dh.tolist(),
            "limits": self.limits.tolist(),
            "base_pose": {
                "rotation": self.base_rotation.tolist(),
                "translation": self.base_translation.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SerialManipulator":
        pose = doc.get("base_pose") or {}
        return cls(
            name=str(doc["name"]),
            dh=np.asarray(doc["dh"], dtype=float),
            limits=np.asarray(doc["limits"], dtype=float),
            base_rotation=np.asarray(pose.get("rotation", np.eye(3)), dtype=float),
            base_translation=np.asarray(pose.get("translation", np.zeros(3)), dtype=float),
        )


@dataclass(frozen=True)
class FkResult:
    """World-frame end-effector position plus the frame origins and z axes.

    origins[i] and z_axes[i] describe frame i (index 0 is the base frame);
    joint i+1 rotates about z_axes[i] through origins[i].
    """

    position: np.ndarray
    origins: np.ndarray
    z_axes: np.ndarray


def _dh_transform(a: float, d: float, alpha: float, theta: float) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def check_limits(m: SerialManipulator, q: np.ndarray) -> bool:
    """True when q lies within the joint limits (inclusive)."""
    q = np.asarray(q, dtype=float)
    return bool(np.all(q >= m.limits[:, 0] - 1e-12) and np.all(q <= m.limits[:, 1] + 1e-12))


def forward_kinematics(m: SerialManipulator, q) -> FkResult:
    """Compose the DH chain at joint vector q (warns when q is out of limits)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (m.n_joints,):
        raise ValueError(f"expected {m.n_joints} joint angles, got shape {q.shape}")
    if not check_limits(m, q):
        warnings.warn(f"{m.name}: joint vector outside limits", stacklevel=2)
    t = np.eye(4)
    t[:3, :3] = m.base_rotation
    t[:3, 3] = m.base_translation
    origins = [t[:3, 3].copy()]
    z_axes = [t[:3, 2].copy()]
    for i in range(m.n_joints):
        a, d, alpha, off = m.dh[i]
        t = t @ _dh_transform(a, d, alpha, q[i] + off)
        origins.append(t[:3, 3].copy())
        z_axes.append(t[:3, 2].copy())
    return FkResult(position=origins[-1], origins=np.array(origins), z_axes=np.array(z_axes))


def translational_jacobian(m: SerialManipulator, q) -> np.ndarray:
    """3 x N translational Jacobian: column i is z_{i-1} x (p_e - p_{i-1})."""
    fk = forward_kinematics(m, q)
    p_e = fk.position
    cols = [np.cross(fk.z_axes[i], p_e - fk.origins[i]) for i in range(m.n_joints)]
    return np.column_stack(cols)


def manipulability(m: SerialManipulator, q, floor: float = DEFAULT_EIGENVALUE_FLOOR) -> np.ndarray:
    """Translational manipulability J J^T, eigenvalue-floored onto the SPD cone."""
    j = translational_jacobian(m, q)
    return project_to_spd(j @ j.T, floor=floor)


def _cloud_from_configs(m: SerialManipulator, qs: np.ndarray, labels, floor: float) -> SpdCloud:
    points = np.stack([manipulability(m, q, floor=floor) for q in qs])
    return SpdCloud(points, tuple(labels))


def sample_random_dataset(
    m: SerialManipulator,
    count: int,
    seed: int | np.random.Generator = 0,
    floor: float = DEFAULT_EIGENVALUE_FLOOR,
) -> SpdCloud:
    """Manipulabilities at joint vectors drawn uniformly within the limits."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    qs = rng.uniform(m.limits[:, 0], m.limits[:, 1], size=(count, m.n_joints))
    labels = [f"rand-{i:04d}" for i in range(count)]
    return _cloud_from_configs(m, qs, labels, floor)


@dataclass(frozen=True)
class JointTrajectory:
    """Ordered joint-space samples, shape (steps, n_joints)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError(f"samples must have shape (steps, n_joints), got {s.shape}")
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True)
class PlanarSweep:
    """2-DoF protocol: joint 0 held at n_fixed angles, joint 1 sweeps 180 degrees."""

    n_fixed: int = 20
    n_steps: int = 20


@dataclass(frozen=True)
class Scripted:
    """Evaluate explicit joint trajectories."""

    trajectories: tuple[JointTrajectory, ...]


def two_joint_sweep(
    m: SerialManipulator,
    fixed_joint: int,
    moving_joint: int,
    n_fixed: int,
    n_steps: int,
    sweep_span: float = np.pi,
) -> list[JointTrajectory]:
    """Trajectories holding one joint at evenly spaced angles while another sweeps.

    Remaining joints stay at the middle of their ranges; the sweep covers
    sweep_span radians centered in the moving joint's range (clipped to it).
    """
    lo_f, hi_f = m.limits[fixed_joint]
    lo_m, hi_m = m.limits[moving_joint]
    span = min(sweep_span, hi_m - lo_m)
    center = 0.5 * (lo_m + hi_m)
    fixed_angles = np.linspace(lo_f, hi_f, n_fixed, endpoint=False)
    sweep = np.linspace(center - span / 2.0, center + span / 2.0, n_steps)
    home = m.mid_pose()
    trajectories = []
    for angle in fixed_angles:
        qs = np.tile(home, (n_steps, 1))
        qs[:, fixed_joint] = angle
        qs[:, moving_joint] = sweep
        trajectories.append(JointTrajectory(qs))
    return trajectories


def fractional_line(m: SerialManipulator, f_start, f_end, n_steps: int) -> JointTrajectory:
    """Straight joint-space line between fractional limit coordinates in [0, 1]^N."""
    f_start = np.asarray(f_start, dtype=float)
    f_end = np.asarray(f_end, dtype=float)
    lo, hi = m.limits[:, 0], m.limits[:, 1]
    q0 = lo + f_start * (hi - lo)
    q1 = lo + f_end * (hi - lo)
    ts = np.linspace(0.0, 1.0, n_steps)[:, None]
    return JointTrajectory((1.0 - ts) * q0 + ts * q1)


def trajectory_dataset(
    m: SerialManipulator,
    protocol,
    floor: float = DEFAULT_EIGENVALUE_FLOOR,
) -> tuple[SpdCloud, list[str]]:
    """Manipulability cloud for a trajectory protocol, labeled by trajectory and step."""
    if isinstance(protocol, PlanarSweep):
        if m.n_joints != 2:
            raise ValueError(f"planar sweep protocol needs a 2-DoF arm, {m.name} has {m.n_joints}")
        trajectories = two_joint_sweep(m, 0, 1, protocol.n_fixed, protocol.n_steps)
    elif isinstance(protocol, Scripted):
        trajectories = list(protocol.trajectories)
        for traj in trajectories:
            if traj.samples.shape[1] != m.n_joints:
                raise ValueError(
                    f"trajectory has {traj.samples.shape[1]} joints, {m.name} has {m.n_joints}"
                )
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    qs = np.concatenate([t.samples for t in trajectories], axis=0)
    labels = [
        f"traj{k:02d}-step{j:03d}"
        for k, t in enumerate(trajectories)
        for j in range(t.samples.shape[0])
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cloud = _cloud_from_configs(m, qs, labels, floor)
    return cloud, labels


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def builtin_models() -> dict[str, SerialManipulator]:
    """Built-in manipulator models.

    planar2_horizontal / planar2_vertical: unit-link 2R arms differing only
    by a 90 degree base rotation about world x, so their manipulability
    domains are related by that rotation congruence exactly.

    panda7: 7-DoF Panda arm, standard-DH table with the official joint
    limits.

    surrogate7_teacher: synthetic 7-DoF stand-in for a human arm with a
    0.8 m stretched reach (0.30 upper arm + 0.28 forearm + 0.22 hand) and
    human-like joint ranges. It is not a biomechanical model.
    """
    planar_dh = [[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]
    planar_limits = [[-np.pi, np.pi], [-np.pi, np.pi]]
    planar2_horizontal = SerialManipulator("planar2_horizontal", planar_dh, planar_limits)
    planar2_vertical = SerialManipulator(
        "planar2_vertical", planar_dh, planar_limits, base_rotation=_rot_x(np.pi / 2.0)
    )

    panda_dh = [
        [0.0, 0.333, -np.pi / 2, 0.0],
        [0.0, 0.0, np.pi / 2, 0.0],
        [0.0825, 0.316, np.pi / 2, 0.0],
        [-0.0825, 0.0, -np.pi / 2, 0.0],
        [0.0, 0.384, np.pi / 2, 0.0],
        [0.088, 0.0, np.pi / 2, 0.0],
        [0.0, 0.107, 0.0, 0.0],
    ]
    panda_limits = [
        [-2.8973, 2.8973],
        [-1.7628, 1.7628],
        [-2.8973, 2.8973],
        [-3.0718, -0.0698],
        [-2.8973, 2.8973],
        [-0.0175, 3.7525],
        [-2.8973, 2.8973],
    ]
    panda7 = SerialManipulator("panda7", panda_dh, panda_limits)

    surrogate_dh = [
        [0.0, 0.0, np.pi / 2, 0.0],
        [0.0, 0.0, -np.pi / 2, 0.0],
        [0.0, 0.30, np.pi / 2, 0.0],
        [0.0, 0.0, -np.pi / 2, 0.0],
        [0.0, 0.28, np.pi / 2, 0.0],
        [0.0, 0.0, -np.pi / 2, 0.0],
        [0.0, 0.22, 0.0, 0.0],
    ]
    surrogate_limits = [
        [-0.8, 2.8],
        [-1.6, 1.6],
        [-1.5, 1.5],
        [0.0, 2.6],
        [-1.57, 1.57],
        [-1.2, 1.2],
        [-0.9, 0.9],
    ]
    surrogate7_teacher = SerialManipulator("surrogate7_teacher", surrogate_dh, surrogate_limits)

    return {
        "planar2_horizontal": planar2_horizontal,
        "planar2_vertical": planar2_vertical,
        "panda7": panda7,
        "surrogate7_teacher": surrogate7_teacher,
    }


def planar_eval_trajectories(n_steps: int = 40) -> list[JointTrajectory]:
    """Three fixed 2-DoF joint-space lines used as held-out evaluation sets."""
    lines = [
        ((0.937, -1.5), (0.937, 1.5)),
        ((-1.0, -2.0), (1.0, 0.5)),
        ((1.3, 2.2), (-0.4, 0.2)),
    ]
    out = []
    for (a0, a1), (b0, b1) in lines:
        ts = np.linspace(0.0, 1.0, n_steps)[:, None]
        q = (1.0 - ts) * np.array([a0, a1]) + ts * np.array([b0, b1])
        out.append(JointTrajectory(q))
    return out
