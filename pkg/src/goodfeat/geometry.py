"""Rigid poses, pinhole projection and the per-feature Jacobian blocks.

Poses are camera-to-world transforms: a world point ``p`` sits at
``R.T @ (p - t)`` in the camera frame.  Perturbations are applied on the
right, ``pose @ exp(xi)``, with twists ordered ``[rho; phi]``
(translation first, rotation second).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

# cond([Hp; 0 0 1]) above this marks the feature as degenerate
MAX_AUGMENTED_COND = 1e8
# switch to the quaternion branch of the SO(3) log this close to pi
LOG_PI_MARGIN = 1e-3


class BehindCameraError(ValueError):
    """Landmark has non-positive depth in the camera frame."""


class DegenerateFeatureError(ValueError):
    """The augmented projection block cannot be inverted reliably."""


def skew(w):
    w = np.asarray(w, dtype=float)
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def inverse(self) -> "Pose":
        return inverse(self)

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """Map world points (``(3,)`` or ``(n, 3)``) into the camera frame."""
        return (np.asarray(points, dtype=float) - self.translation) @ self.rotation


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 500.0
    fy: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def in_image(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return ((uv[:, 0] >= 0) & (uv[:, 0] < self.width)
                & (uv[:, 1] >= 0) & (uv[:, 1] < self.height))

    def back_project(self, uv: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Camera-frame points at the given depth behind pixels ``uv``."""
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        depth = np.asarray(depth, dtype=float).reshape(-1)
        x = (uv[:, 0] - self.cx) / self.fx * depth
        y = (uv[:, 1] - self.cy) / self.fy * depth
        return np.column_stack([x, y, depth])


# ---------------------------------------------------------------------------
# SE(3)
# ---------------------------------------------------------------------------

def so3_exp(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    K = skew(phi)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return (np.eye(3) + np.sin(theta) / theta * K
            + (1.0 - np.cos(theta)) / theta**2 * K @ K)


def so3_log(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(w)
    c = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = np.arctan2(s, c)
    if theta > np.pi - LOG_PI_MARGIN:
        # the antisymmetric part vanishes near pi; go through the quaternion
        return Rotation.from_matrix(R).as_rotvec()
    if theta < 1e-8:
        return w
    return theta / s * w


def _left_jacobian(phi):
    theta = np.linalg.norm(phi)
    K = skew(phi)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * K + K @ K / 6.0
    return (np.eye(3) + (1.0 - np.cos(theta)) / theta**2 * K
            + (theta - np.sin(theta)) / theta**3 * K @ K)


def _left_jacobian_inv(phi):
    theta = np.linalg.norm(phi)
    K = skew(phi)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * K + K @ K / 12.0
    half = 0.5 * theta
    coef = (1.0 - half * np.cos(half) / np.sin(half)) / theta**2
    return np.eye(3) - 0.5 * K + coef * K @ K


def se3_exp(xi) -> Pose:
    """Exponential map of a twist ``[rho; phi]``."""
    xi = np.asarray(xi, dtype=float).reshape(6)
    rho, phi = xi[:3], xi[3:]
    return Pose(so3_exp(phi), _left_jacobian(phi) @ rho)


def se3_log(pose: Pose) -> np.ndarray:
    phi = so3_log(pose.rotation)
    rho = _left_jacobian_inv(phi) @ pose.translation
    return np.concatenate([rho, phi])


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(a: Pose) -> Pose:
    Rt = a.rotation.T
    return Pose(Rt, -Rt @ a.translation)


# ---------------------------------------------------------------------------
# Projection and Jacobians
# ---------------------------------------------------------------------------

def _camera_points(pose: Pose, landmarks) -> np.ndarray:
    pc = pose.to_camera(np.atleast_2d(np.asarray(landmarks, dtype=float)))
    if np.any(pc[:, 2] <= 0):
        raise BehindCameraError("landmark has non-positive depth in camera frame")
    return pc


def project_points(pose: Pose, landmarks, cam: CameraIntrinsics) -> np.ndarray:
    """Vectorised pinhole projection, ``(n, 3)`` world points to ``(n, 2)`` pixels."""
    pc = _camera_points(pose, landmarks)
    u = cam.cx + cam.fx * pc[:, 0] / pc[:, 2]
    v = cam.cy + cam.fy * pc[:, 1] / pc[:, 2]
    return np.column_stack([u, v])


def project(pose: Pose, landmark, cam: CameraIntrinsics) -> np.ndarray:
    """Project one landmark; returns ``array([u, v])``."""
    return project_points(pose, landmark, cam)[0]


def _projection_derivative(pc, cam):
    # d(u, v)/d(camera-frame point), shape (n, 2, 3)
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    J = np.zeros((len(pc), 2, 3))
    J[:, 0, 0] = cam.fx / z
    J[:, 0, 2] = -cam.fx * x / z**2
    J[:, 1, 1] = cam.fy / z
    J[:, 1, 2] = -cam.fy * y / z**2
    return J


def pose_jacobians(pose: Pose, landmarks, cam: CameraIntrinsics) -> np.ndarray:
    """Derivatives of the projection w.r.t. a right-perturbation twist, ``(n, 2, 6)``."""
    pc = _camera_points(pose, landmarks)
    J = _projection_derivative(pc, cam)
    # pc(xi) = exp(-xi) pc  =>  d pc = -d rho + [pc]x d phi
    D = np.zeros((len(pc), 3, 6))
    D[:, :, :3] = -np.eye(3)
    D[:, 0, 4], D[:, 0, 5] = -pc[:, 2], pc[:, 1]
    D[:, 1, 3], D[:, 1, 5] = pc[:, 2], -pc[:, 0]
    D[:, 2, 3], D[:, 2, 4] = -pc[:, 1], pc[:, 0]
    return J @ D


def point_jacobians(pose: Pose, landmarks, cam: CameraIntrinsics) -> np.ndarray:
    """Derivatives of the projection w.r.t. world landmark coordinates, ``(n, 2, 3)``."""
    pc = _camera_points(pose, landmarks)
    return _projection_derivative(pc, cam) @ pose.rotation.T


def pose_jacobian(pose: Pose, landmark, cam: CameraIntrinsics) -> np.ndarray:
    return pose_jacobians(pose, landmark, cam)[0]


def point_jacobian(pose: Pose, landmark, cam: CameraIntrinsics) -> np.ndarray:
    return point_jacobians(pose, landmark, cam)[0]


def combined_block(Hx_i, Hp_i, max_cond: float = MAX_AUGMENTED_COND) -> np.ndarray:
    """Fold one feature's pose and point Jacobians into a 3x6 block.

    Both blocks gain a third row, ``[0 0 1]`` for ``Hp_i`` and zeros for
    ``Hx_i``, so the point block becomes square and can be inverted.

    Raises
    ------
    DegenerateFeatureError
        If the augmented point block is singular or too ill-conditioned.
    """
    Hx_i = np.asarray(Hx_i, dtype=float).reshape(2, 6)
    Hp_i = np.asarray(Hp_i, dtype=float).reshape(2, 3)
    A = np.vstack([Hp_i, [0.0, 0.0, 1.0]])
    B = np.vstack([Hx_i, np.zeros(6)])
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > max_cond:
        raise DegenerateFeatureError(f"augmented point block has cond {cond:.3g}")
    return np.linalg.solve(A, B)


@dataclass
class JacobianBlockSet:
    """Per-feature Jacobians evaluated at one linearisation pose.

    ``Hx`` is ``(n, 2, 6)``, ``Hp`` is ``(n, 2, 3)`` and ``Hc`` is
    ``(n, 3, 6)``.  Features whose augmented block was rejected keep their
    ``Hx``/``Hp`` rows but have ``valid[i] = False`` and a NaN ``Hc`` block.
    """

    Hx: np.ndarray
    Hp: np.ndarray
    Hc: np.ndarray
    valid: np.ndarray
    pose: Pose

    def __len__(self):
        return len(self.Hx)

    def subset(self, indices) -> "JacobianBlockSet":
        idx = np.asarray(indices, dtype=int)
        return JacobianBlockSet(self.Hx[idx], self.Hp[idx], self.Hc[idx],
                                self.valid[idx], self.pose)

    def stacked_Hx(self) -> np.ndarray:
        return self.Hx.reshape(-1, 6)

    def stacked_Hc(self) -> np.ndarray:
        return self.Hc.reshape(-1, 6)

    def block_diag_Hp(self) -> np.ndarray:
        n = len(self)
        out = np.zeros((2 * n, 3 * n))
        for i, blk in enumerate(self.Hp):
            out[2 * i:2 * i + 2, 3 * i:3 * i + 3] = blk
        return out


def jacobian_blocks(pose: Pose, landmarks, cam: CameraIntrinsics) -> JacobianBlockSet:
    Hx = pose_jacobians(pose, landmarks, cam)
    Hp = point_jacobians(pose, landmarks, cam)
    Hc = np.full((len(Hx), 3, 6), np.nan)
    valid = np.zeros(len(Hx), dtype=bool)
    for i in range(len(Hx)):
        try:
            Hc[i] = combined_block(Hx[i], Hp[i])
            valid[i] = True
        except DegenerateFeatureError:
            pass
    return JacobianBlockSet(Hx, Hp, Hc, valid, pose)
